// Command-line front end: config-driven runs of the SGD simulator, the limit
// ODE/SDE evaluators, and the named experiments.
//
// Exit codes: 0 success, 1 config error, 2 numerical failure
// (blow-up / non-convergence), 3 experiment tolerance failure.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sgdlim/config.hpp"
#include "sgdlim/parallel.hpp"

namespace fs = std::filesystem;
using namespace sgdlim;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  int d_override = 0;
  bool quiet = false;
};

RunConfig resolve_config(const GlobalArgs& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.seed_set) cfg.master_seed = g.seed;
  if (g.threads > 0) cfg.threads = g.threads;
  if (g.d_override > 0) cfg.mixture.d = g.d_override;
  if (g.quiet) cfg.quiet = true;
  if (cfg.threads > 0) set_worker_count(cfg.threads);
  return cfg;
}

void echo_config(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream os(fs::path(cfg.out_dir) / "effective-config.json");
  os << cfg.effective_json() << "\n";
}

int emit_report(const RunConfig& cfg, const ExperimentReport& rep) {
  write_report_files(cfg.out_dir, rep);
  if (!cfg.quiet) std::cout << rep.human_text();
  return rep.pass() ? 0 : 3;
}

int cmd_sgd(const RunConfig& cfg) {
  echo_config(cfg);
  const ProjectiveModel model = build_model(cfg);
  const MixtureSpec spec = build_mixture(cfg, model);
  const double delta = cfg.sgd.c_lr / spec.d;
  bool truncated = false;
  for (int r = 0; r < cfg.sgd.replicas; ++r) {
    SgdConfig sc;
    sc.c_lr = cfg.sgd.c_lr;
    sc.total_time = cfg.sgd.T;
    sc.record_stride = cfg.sgd.record_stride;
    sc.r_exit = cfg.sgd.r_exit;
    sc.zeta_exit = cfg.sgd.zeta_exit;
    sc.master_seed = cfg.master_seed;
    sc.replica = r;
    const Trajectory traj = run_sgd(model, spec, build_init(cfg, model, spec, r), sc);
    const std::string path =
        (fs::path(cfg.out_dir) / (cfg.run_id + "_" + std::to_string(r) + ".csv")).string();
    write_trajectory_csv(path, traj, delta);
    truncated = truncated || traj.blew_up;
    if (!cfg.quiet) {
      std::cout << "replica " << r << ": steps " << traj.steps_run << "/"
                << traj.steps_planned;
      if (traj.exit_step_r) std::cout << " exit_r@" << *traj.exit_step_r;
      if (traj.exit_step_deloc) std::cout << " exit_deloc@" << *traj.exit_step_deloc;
      if (traj.blew_up) std::cout << " BLOWUP";
      std::cout << " -> " << path << "\n";
    }
  }
  return truncated ? 2 : 0;
}

int cmd_ode(const RunConfig& cfg) {
  echo_config(cfg);
  const ProjectiveModel model = build_model(cfg);
  const MixtureSpec spec = build_mixture(cfg, model);
  const SummaryState u0 = compute_summary(build_init(cfg, model, spec, 0), spec, model);
  const OdeSolution sol = solve_ode(u0, model, spec.moments(), cfg.sgd.c_lr,
                                    build_ode(cfg), build_evaluator(cfg));
  const std::string path = (fs::path(cfg.out_dir) / (cfg.run_id + "_ode.csv")).string();
  write_ode_csv(path, sol);
  if (!cfg.quiet)
    std::cout << "ode: " << sol.steps << " steps (" << sol.rejected_steps
              << " rejected), max psd clip " << sol.max_psd_clip << " -> " << path << "\n";
  return sol.blew_up ? 2 : 0;
}

int cmd_drift(const RunConfig& cfg) {
  echo_config(cfg);
  const ProjectiveModel model = build_model(cfg);
  const MixtureSpec spec = build_mixture(cfg, model);
  const ParameterState st = build_init(cfg, model, spec, 0);
  const SummaryState u = compute_summary(st, spec, model);

  const DriftResult h = drift_h(u, model, spec.moments(), cfg.sgd.c_lr, build_evaluator(cfg));
  SgdConfig sc;
  sc.c_lr = cfg.sgd.c_lr;
  const DriftEstimate oracle = one_step_drift_oracle(
      model, spec, st, sc, std::max<long>(cfg.evaluator.n_samples, 1000),
      derive_seed(cfg.master_seed, "oracle"));

  std::cout.precision(8);
  std::cout << "coordinate          drift_h        oracle         oracle_se\n";
  for (int i = 0; i < h.h.size(); ++i) {
    std::cout << u.layout.coord_name(i) << "\t" << h.h(i) << "\t" << oracle.drift(i) << "\t"
              << oracle.se(i) << "\n";
  }
  return 0;
}

int cmd_fixedpoint(const RunConfig& cfg) {
  echo_config(cfg);
  const ProjectiveModel model = build_model(cfg);
  const MixtureSpec spec = build_mixture(cfg, model);
  const SummaryState u0 = compute_summary(build_init(cfg, model, spec, 0), spec, model);
  const FixedPoint fp =
      find_fixed_point(u0, model, spec.moments(), cfg.sgd.c_lr, build_evaluator(cfg));
  std::cout.precision(10);
  std::cout << "converged: " << (fp.converged ? "yes" : "no") << "\n"
            << "residual:  " << fp.residual << "\n"
            << "iterations: " << fp.iterations << "\n";
  const Eigen::VectorXd u = fp.u_star.flatten();
  for (int i = 0; i < u.size(); ++i)
    std::cout << fp.u_star.layout.coord_name(i) << " = " << u(i) << "\n";
  if (fp.stability.size()) {
    std::cout << "jacobian eigenvalues:";
    for (int i = 0; i < fp.stability.size(); ++i)
      std::cout << " " << fp.stability(i).real() << (fp.stability(i).imag() >= 0 ? "+" : "")
                << fp.stability(i).imag() << "i";
    std::cout << "\n";
  }
  return fp.converged ? 0 : 2;
}

int cmd_sde(const RunConfig& cfg) {
  echo_config(cfg);
  const ProjectiveModel model = build_model(cfg);
  const MixtureSpec spec = build_mixture(cfg, model);
  const SummaryState u0 = compute_summary(build_init(cfg, model, spec, 0), spec, model);
  const DriftEvaluatorConfig dcfg = build_evaluator(cfg);
  const FixedPoint fp = find_fixed_point(u0, model, spec.moments(), cfg.sgd.c_lr, dcfg);
  if (!fp.converged) {
    std::cerr << "sde: no fixed point found (best residual " << fp.residual << ")\n";
    return 2;
  }
  SdeSpec sde;
  sde.u_star = fp.u_star;
  sde.jacobian = jacobian_h(fp.u_star, model, spec.moments(), cfg.sgd.c_lr, dcfg);
  const VolatilityResult vol =
      volatility_sigma(fp.u_star, model, spec.moments(), cfg.sgd.c_lr,
                       std::max<long>(cfg.evaluator.n_samples, 100000),
                       derive_seed(cfg.master_seed, "volatility"));
  sde.sigma = vol.sigma;
  sde.sigma_sqrt = vol.sigma_sqrt;
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream os(fs::path(cfg.out_dir) / (cfg.run_id + "_sde_spec.txt"));
    os << sde.serialize();
  }
  const int m = fp.u_star.layout.coord_count();
  const SdeEnsemble ens = simulate_sde(
      [m](int) { return Eigen::VectorXd::Zero(m); }, sde, cfg.sgd.T,
      1e-3 * cfg.sgd.T, 2000, 10, derive_seed(cfg.master_seed, "sde"));
  std::ofstream os(fs::path(cfg.out_dir) / (cfg.run_id + "_sde_var.csv"));
  os.precision(17);
  os << "t";
  for (int i = 0; i < m; ++i) os << ",var_" << fp.u_star.layout.coord_name(i);
  os << "\n";
  for (std::size_t ti = 0; ti < ens.times.size(); ++ti) {
    os << ens.times[ti];
    const Eigen::VectorXd v = ens.variance_at(ti);
    for (int i = 0; i < m; ++i) os << ',' << v(i);
    os << "\n";
  }
  if (!cfg.quiet)
    std::cout << "sde: R*-state residual " << fp.residual << ", sigma clipped mass "
              << vol.clipped_mass << "\n";
  return 0;
}

int cmd_experiment(const RunConfig& cfg, const std::string& name) {
  echo_config(cfg);
  const auto& p = cfg.experiment;
  if (name == "ballistic-universality") {
    BallisticConfig bc;
    bc.seed = cfg.master_seed;
    if (p.d) bc.d = *p.d;
    if (p.c_lr) bc.c_lr = *p.c_lr;
    if (p.T) bc.T = *p.T;
    if (p.replicas) bc.replicas = *p.replicas;
    if (p.d_list) bc.d_scan = *p.d_list;
    if (p.dists) bc.dists = *p.dists;
    if (p.tolerance) bc.tol_abs = *p.tolerance;
    return emit_report(cfg, exp_ballistic_universality(bc).report);
  }
  if (name == "localized-init") {
    LocalizedInitConfig lc;
    lc.seed = cfg.master_seed;
    lc.two_point_m4 = {2.0, 6.0};
    if (p.d) lc.d = *p.d;
    if (p.n_samples) lc.n_samples = *p.n_samples;
    if (p.dists) lc.dists = *p.dists;
    if (p.tolerance) lc.tolerance = *p.tolerance;
    return emit_report(cfg, exp_localized_init(lc));
  }
  if (name == "diffusive-gap") {
    DiffusiveGapConfig dc;
    dc.seed = cfg.master_seed;
    if (p.d) dc.d = *p.d;
    if (p.c_lr) dc.c_lr = *p.c_lr;
    if (p.rho) dc.rho = *p.rho;
    if (p.n_samples) dc.n_samples = *p.n_samples;
    return emit_report(cfg, exp_diffusive_gap(dc));
  }
  if (name == "delocalization") {
    DelocalizationConfig dl;
    dl.seed = cfg.master_seed;
    if (p.d_list) dl.d_list = *p.d_list;
    if (p.c_lr) dl.c_lr = *p.c_lr;
    if (p.T) dl.T = *p.T;
    if (p.replicas) dl.replicas = *p.replicas;
    if (p.dists && !p.dists->empty()) dl.dist = p.dists->front();
    return emit_report(cfg, exp_delocalization(dl));
  }
  if (name == "dgec-probe") {
    DgecConfig dg;
    dg.seed = cfg.master_seed;
    if (p.d_list) dg.d_list = *p.d_list;
    if (p.c_lr) dg.c_lr = *p.c_lr;
    if (p.dists && !p.dists->empty()) dg.dist = p.dists->front();
    return emit_report(cfg, exp_dgec_probe(dg));
  }
  if (name == "clt-gap-scaling") {
    CltScalingConfig cc;
    cc.seed = cfg.master_seed;
    if (p.d) cc.d = *p.d;
    if (p.n_samples) cc.n_samples = *p.n_samples;
    if (p.dists && !p.dists->empty()) cc.dist = p.dists->front();
    return emit_report(cfg, exp_clt_gap_scaling(cc));
  }
  std::cerr << "unknown experiment: " << name
            << " (expected ballistic-universality, localized-init, diffusive-gap, "
               "delocalization, dgec-probe, clt-gap-scaling)\n";
  return 1;
}

int cmd_validate(const RunConfig& cfg) {
  ValidateConfig vc;
  vc.seed = cfg.master_seed;
  const ExperimentReport rep = run_validation(vc);
  if (!cfg.quiet) std::cout << rep.human_text();
  return rep.pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"high-dimensional online SGD scaling-limit toolkit"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "config file (json)");
  app.add_option("--out", g.out_dir, "output directory override");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed override");
  app.add_option("--threads", g.threads, "worker threads (default: cores)");
  app.add_option("--d", g.d_override, "ambient dimension override");
  app.add_flag("--quiet", g.quiet, "suppress console output");

  auto* sub_sgd = app.add_subcommand("sgd", "run online SGD replicas, write CSV");
  auto* sub_ode = app.add_subcommand("ode", "integrate the limit ODE, write CSV");
  auto* sub_drift = app.add_subcommand("drift", "drift formula vs one-step oracle");
  auto* sub_fp = app.add_subcommand("fixedpoint", "search for an ODE fixed point");
  auto* sub_sde = app.add_subcommand("sde", "fixed point + linearized SDE ensemble");
  std::string exp_name;
  auto* sub_exp = app.add_subcommand("experiment", "run a named experiment");
  sub_exp->add_option("name", exp_name, "experiment name")->required();
  auto* sub_val = app.add_subcommand("validate", "gradient and moment self-tests");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    const RunConfig cfg = resolve_config(g);
    if (sub_sgd->parsed()) return cmd_sgd(cfg);
    if (sub_ode->parsed()) return cmd_ode(cfg);
    if (sub_drift->parsed()) return cmd_drift(cfg);
    if (sub_fp->parsed()) return cmd_fixedpoint(cfg);
    if (sub_sde->parsed()) return cmd_sde(cfg);
    if (sub_exp->parsed()) return cmd_experiment(cfg, exp_name);
    if (sub_val->parsed()) return cmd_validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
