#include "sgdlim/experiments.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sgdlim/parallel.hpp"

namespace sgdlim {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

ClaimResult check_abs(const std::string& name, double measured, double expected, double tol,
                      double ci, const std::string& note = "") {
  ClaimResult c;
  c.name = name;
  c.measured = measured;
  c.expected = expected;
  c.tolerance = tol;
  c.ci = ci;
  c.pass = std::abs(measured - expected) <= tol;
  c.note = note;
  return c;
}

// pass when |measured| is within the confidence halfwidth of zero
ClaimResult check_zero(const std::string& name, double measured, double ci,
                       const std::string& note = "") {
  ClaimResult c;
  c.name = name;
  c.measured = measured;
  c.expected = 0.0;
  c.ci = ci;
  c.tolerance = ci;
  c.pass = std::abs(measured) <= ci;
  c.note = note;
  return c;
}

ClaimResult info(const std::string& name, double measured, const std::string& note = "") {
  ClaimResult c;
  c.name = name;
  c.measured = measured;
  c.informational = true;
  c.pass = true;
  c.note = note;
  return c;
}

}  // namespace

MixtureSpec make_pm_flat_mixture(int d, double mean_norm, const NoiseDistribution& noise) {
  MixtureSpec spec;
  spec.d = d;
  spec.means.push_back(make_mean("flat", d, mean_norm, 0));
  spec.means.push_back(make_mean("flat", d, -mean_norm, 0));
  spec.weights = Eigen::VectorXd::Constant(2, 0.5);
  spec.labels = {0, 1};
  spec.noise = noise;
  return spec;
}

ParameterState gaussian_init(const ProjectiveModel& model, int d, uint64_t seed,
                             double column_scale) {
  Rng rng = make_stream(seed, "init");
  ParameterState st;
  st.theta = Eigen::MatrixXd::Zero(d, model.z_dim());
  const double sd = column_scale / std::sqrt(static_cast<double>(d));
  for (int a = 0; a < model.k_trained; ++a)
    for (int i = 0; i < d; ++i) st.theta(i, a) = sd * rng.normal();
  st.w = Eigen::VectorXd::Zero(model.k2);
  for (int b = 0; b < model.k2; ++b) st.w(b) = 0.5 * rng.normal();
  return st;
}

// ---------------------------------------------------------------------------
// ballistic universality
// ---------------------------------------------------------------------------

BallisticResult exp_ballistic_universality(const BallisticConfig& cfg) {
  const auto t0 = Clock::now();
  BallisticResult out;
  ExperimentReport& rep = out.report;
  rep.name = "ballistic_universality";
  rep.param("model", cfg.model);
  rep.param("d", static_cast<double>(cfg.d));
  rep.param("c_lr", cfg.c_lr);
  rep.param("T", cfg.T);
  rep.param("replicas", static_cast<double>(cfg.replicas));
  rep.param("seed", static_cast<double>(cfg.seed));
  for (const auto& s : cfg.dists) rep.param("dist", s);

  if (cfg.model != "logistic" && cfg.model != "two_layer" && cfg.model != "multi_index")
    throw std::invalid_argument("exp_ballistic_universality: unknown model " + cfg.model);

  struct ArmCurves {
    std::vector<Curve> curves;
    double max_zeta = -1e300;
  };

  auto make_model = [&]() -> ProjectiveModel {
    if (cfg.model == "logistic") return make_logistic(2, 0.0);
    if (cfg.model == "two_layer") return make_two_layer(2, 2, activation_tanh(), 0.0);
    return make_multi_index(link_he3_plus_he2());
  };
  const ProjectiveModel model = make_model();

  auto make_mixture = [&](int d, const NoiseDistribution& noise) -> MixtureSpec {
    if (cfg.model == "multi_index") {
      MixtureSpec spec;
      spec.d = d;
      spec.means.push_back(make_mean("zero", d, 0.0, 0));
      spec.weights = Eigen::VectorXd::Constant(1, 1.0);
      spec.labels = {0};
      spec.noise = noise;
      return spec;
    }
    return make_pm_flat_mixture(d, 1.0, noise);
  };

  auto make_init = [&](int d, int replica) -> ParameterState {
    ParameterState st = gaussian_init(model, d, derive_seed(cfg.seed, "init", d, replica));
    if (model.k_frozen > 0) {
      // single-index ground truth: unit flat teacher
      st.theta.col(model.k_trained) = make_mean("flat", d, 1.0, 0);
    }
    return st;
  };

  // arm index layout: 0 = gaussian, 1 = self-comparison gaussian, 2.. = cfg.dists
  std::vector<std::string> arm_names = {"standard_gaussian", "self_gaussian"};
  for (const auto& s : cfg.dists) arm_names.push_back(s);

  auto run_arm = [&](int d, int arm) -> ArmCurves {
    const NoiseDistribution noise =
        arm == 1 ? NoiseDistribution::standard_gaussian()
                 : NoiseDistribution::from_name(arm_names[arm], 0.0);
    const MixtureSpec spec = make_mixture(d, noise);
    const double delta = cfg.c_lr / static_cast<double>(d);
    ArmCurves arm_out;
    arm_out.curves.resize(cfg.replicas);
    std::vector<double> zetas(cfg.replicas, -1e300);
    parallel_for(static_cast<std::size_t>(cfg.replicas), [&](std::size_t r) {
      SgdConfig sc;
      sc.c_lr = cfg.c_lr;
      sc.total_time = cfg.T;
      sc.master_seed = derive_seed(cfg.seed, "data", static_cast<uint64_t>(d) * 100 + arm, r);
      sc.replica = static_cast<int>(r);
      const Trajectory traj = run_sgd(model, spec, make_init(d, static_cast<int>(r)), sc);
      arm_out.curves[r] = curve_from_trajectory(traj, delta);
      for (const auto& rec : traj.records) zetas[r] = std::max(zetas[r], rec.deloc.zeta_eff);
    });
    for (double z : zetas) arm_out.max_zeta = std::max(arm_out.max_zeta, z);
    return arm_out;
  };

  std::vector<int> d_values = cfg.d_scan;
  if (std::find(d_values.begin(), d_values.end(), cfg.d) == d_values.end())
    d_values.push_back(cfg.d);
  std::sort(d_values.begin(), d_values.end());

  std::vector<double> scan_dev;  // worst dist-vs-gaussian deviation per d
  std::vector<double> scan_floor;

  for (int d : d_values) {
    std::vector<ArmCurves> arms(arm_names.size());
    for (std::size_t a = 0; a < arm_names.size(); ++a) arms[a] = run_arm(d, static_cast<int>(a));
    for (std::size_t a = 0; a < arm_names.size(); ++a)
      out.max_zeta.emplace_back(d, arm_names[a], arms[a].max_zeta);

    std::vector<Curve> means;
    for (auto& arm : arms)
      means.push_back(mean_curve(arm.curves, cfg.T, cfg.grid_points));

    const double floor = compare_trajectories(means[0], means[1], cfg.T, cfg.grid_points).sup;
    const double tol = std::max(cfg.tol_abs, cfg.tol_floor_mult * floor);
    scan_floor.push_back(floor);

    double worst = 0.0;
    for (std::size_t a = 2; a < arm_names.size(); ++a) {
      const double dev = compare_trajectories(means[a], means[0], cfg.T, cfg.grid_points).sup;
      worst = std::max(worst, dev);
      if (d == cfg.d) {
        ClaimResult c = check_abs("sup_dev[" + arm_names[a] + " vs gaussian], d=" + fmt(d),
                                  dev, 0.0, tol, 0.0);
        c.note = "floor=" + fmt(floor);
        rep.claims.push_back(c);
      }
    }
    scan_dev.push_back(worst);
    if (d != cfg.d)
      rep.claims.push_back(info("sup_dev[worst dist vs gaussian], d=" + fmt(d), worst,
                                "floor=" + fmt(floor)));

    if (d == cfg.d) {
      // limit ODE from the replica-averaged realized initial summary
      const MixtureSpec spec0 = make_mixture(d, NoiseDistribution::standard_gaussian());
      SummaryState u0 = compute_summary(make_init(d, 0), spec0, model);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(u0.layout.coord_count());
      for (int r = 0; r < cfg.replicas; ++r)
        acc += compute_summary(make_init(d, r), spec0, model).flatten();
      u0 = u0.with_coords(acc / cfg.replicas);

      DriftEvaluatorConfig dcfg;
      dcfg.method = DriftMethod::GaussHermite;
      dcfg.order = 10;
      OdeConfig ocfg;
      ocfg.T = cfg.T;
      ocfg.solver = OdeSolverKind::Rk45;
      const OdeSolution sol =
          solve_ode(u0, model, spec0.moments(), cfg.c_lr, ocfg, dcfg);
      const Curve ode = curve_from_ode(sol);
      for (std::size_t a = 0; a < arm_names.size(); ++a) {
        if (a == 1) continue;
        const double dev = compare_trajectories(means[a], ode, cfg.T, cfg.grid_points).sup;
        rep.claims.push_back(check_abs(
            "sup_dev[" + arm_names[a] + " vs ODE], d=" + fmt(d), dev, 0.0, tol, 0.0));
      }
      rep.claims.push_back(info("ode_psd_clip", sol.max_psd_clip));
    }
  }

  for (std::size_t i = 0; i + 1 < d_values.size(); ++i) {
    ClaimResult c;
    c.name = "dev non-increasing d=" + fmt(d_values[i]) + "->" + fmt(d_values[i + 1]);
    c.measured = scan_dev[i + 1];
    c.expected = scan_dev[i];
    c.tolerance = cfg.mono_slack;
    c.pass = scan_dev[i + 1] <= scan_dev[i] + cfg.mono_slack;
    c.note = "floors " + fmt(scan_floor[i]) + ", " + fmt(scan_floor[i + 1]);
    rep.claims.push_back(c);
  }

  rep.wall_seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// localized initialization
// ---------------------------------------------------------------------------

namespace {

MixtureSpec centered_mixture(int d, const NoiseDistribution& noise) {
  MixtureSpec spec;
  spec.d = d;
  spec.means.push_back(make_mean("zero", d, 0.0, 0));
  spec.weights = Eigen::VectorXd::Constant(1, 1.0);
  spec.labels = {0};
  spec.noise = noise;
  return spec;
}

}  // namespace

ExperimentReport exp_localized_init(const LocalizedInitConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentReport rep;
  rep.name = "localized_init";
  rep.param("d", static_cast<double>(cfg.d));
  rep.param("n_samples", static_cast<double>(cfg.n_samples));
  rep.param("seed", static_cast<double>(cfg.seed));

  const ProjectiveModel model = make_multi_index(link_square());
  const int d = cfg.d;

  ParameterState st;
  st.theta = Eigen::MatrixXd::Zero(d, 2);
  st.theta(0, 0) = 1.0;                              // theta_0 = e_1
  st.theta.col(1) = make_mean("flat", d, 1.0, 0);    // theta_* = d^(-1/2) * ones
  st.w = Eigen::VectorXd(0);

  std::vector<std::pair<std::string, NoiseDistribution>> arms;
  for (const auto& name : cfg.dists) arms.emplace_back(name, NoiseDistribution::from_name(name, 0.0));
  for (double m4 : cfg.two_point_m4)
    arms.emplace_back("two_point_m4=" + fmt(m4), NoiseDistribution::two_point_with_m4(m4));

  Eigen::VectorXd probe = Eigen::VectorXd::Zero(d);
  probe(0) = 1.0;

  // Reported in the half-squared-error normalization <grad(L/2), e1> so the
  // limits read 4 (gaussian) and 2(m4 - 1); the raw loss gives twice these.
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const auto& [name, noise] = arms[a];
    const MixtureSpec spec = centered_mixture(d, noise);
    const GradProjectionEstimate est = grad_projection_oracle(
        model, spec, st, probe, cfg.n_samples, derive_seed(cfg.seed, "arm", a));
    const double predicted = 2.0 * (noise.m4() - 1.0);
    rep.claims.push_back(check_abs("<grad(L/2), e1>[" + name + "]", 0.5 * est.value(0),
                                   predicted, cfg.tolerance, 2.0 * est.se(0),
                                   "limit 2(m4-1), m4=" + fmt(noise.m4())));
  }

  // control arm: delocalized init restores universality
  ParameterState deloc = st;
  {
    Rng rng = make_stream(cfg.seed, "deloc_init");
    for (int i = 0; i < d; ++i) deloc.theta(i, 0) = rng.normal();
    deloc.theta.col(0) /= deloc.theta.col(0).norm();
  }
  const Eigen::VectorXd probe_deloc = deloc.theta.col(0);
  const MixtureSpec spec_gauss = centered_mixture(d, NoiseDistribution::standard_gaussian());
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const auto& [name, noise] = arms[a];
    if (noise.kind() == NoiseKind::StandardGaussian) continue;
    const MixtureSpec spec = centered_mixture(d, noise);
    const GradProjectionEstimate gap = crn_grad_projection_gap(
        model, spec, spec_gauss, deloc, probe_deloc, cfg.n_samples,
        derive_seed(cfg.seed, "deloc_arm", a));
    rep.claims.push_back(check_zero("delocalized-init gap[" + name + " - gaussian]",
                                    0.5 * gap.value(0), 2.0 * gap.se(0),
                                    "universality restored"));
  }

  rep.wall_seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// diffusive gap
// ---------------------------------------------------------------------------

ExperimentReport exp_diffusive_gap(const DiffusiveGapConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentReport rep;
  rep.name = "diffusive_gap";
  rep.param("rho", cfg.rho);
  rep.param("d", static_cast<double>(cfg.d));
  rep.param("c_lr", cfg.c_lr);
  rep.param("n_samples", static_cast<double>(cfg.n_samples));
  rep.param("seed", static_cast<double>(cfg.seed));

  const ProjectiveModel model = make_multi_index(link_he3_plus_he2());
  const double s = cfg.rho * cfg.rho;
  const int d = cfg.d;

  // fixed point of the limit dynamics on the m = 0 slice
  SummaryState guess;
  guess.layout = SummaryLayout{1, 1, 1, 0};
  guess.gram = Eigen::MatrixXd::Zero(3, 3);
  guess.gram(0, 0) = cfg.r_guess;
  guess.gram(1, 1) = s;
  guess.w = Eigen::VectorXd(0);

  MixtureSpec::Moments mix;
  mix.weights = Eigen::VectorXd::Constant(1, 1.0);
  mix.labels = {0};

  DriftEvaluatorConfig dcfg;
  dcfg.method = DriftMethod::GaussHermite;
  dcfg.order = 14;

  FixedPointConfig fcfg;
  const FixedPoint fp_newton =
      fixed_point_by_newton(guess, model, mix, cfg.c_lr, dcfg, fcfg);
  const FixedPoint fp_integrate =
      fixed_point_by_integration(guess, model, mix, cfg.c_lr, dcfg, fcfg);

  {
    ClaimResult c;
    c.name = "fixed point exists (both solvers converge)";
    c.measured = fp_newton.converged && fp_integrate.converged ? 1.0 : 0.0;
    c.expected = 1.0;
    c.tolerance = 0.0;
    c.pass = fp_newton.converged && fp_integrate.converged;
    c.note = "newton residual " + fmt(fp_newton.residual) + ", integration residual " +
             fmt(fp_integrate.residual);
    rep.claims.push_back(c);
  }

  if (!(fp_newton.converged && fp_integrate.converged)) {
    ClaimResult c;
    c.name = "diffusive gap vs 18*m3*rho*R*";
    c.pass = false;
    c.note = "skipped: no uninformative fixed point at this c_lr (R-drift has no root on "
             "the m=0 slice; the c_lr E[(d1 psi)^2] term dominates)";
    rep.claims.push_back(c);
    rep.wall_seconds = seconds_since(t0);
    return rep;
  }

  const double r_newton = fp_newton.u_star.gram(0, 0);
  const double r_int = fp_integrate.u_star.gram(0, 0);
  rep.claims.push_back(check_abs("R* solver agreement |newton - integration|",
                                 std::abs(r_newton - r_int), 0.0, cfg.solver_agree_tol, 0.0,
                                 "R*=" + fmt(r_newton)));
  const double r_star = r_newton;
  const SummaryState u_star = fp_newton.u_star;

  // delocalized theta_0 orthogonal to the teacher with ||theta_0||^2 = R*
  const Eigen::VectorXd teacher_dir = make_mean("flat", d, 1.0, 0);
  ParameterState st;
  st.theta = Eigen::MatrixXd::Zero(d, 2);
  {
    Rng rng = make_stream(cfg.seed, "theta0");
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = rng.normal();
    v -= v.dot(teacher_dir) * teacher_dir;
    v *= std::sqrt(r_star) / v.norm();
    st.theta.col(0) = v;
  }
  st.theta.col(1) = cfg.rho * teacher_dir;
  st.w = Eigen::VectorXd(0);
  rep.claims.push_back(info("theta0 zeta_eff", deloc_report(st, 1).zeta_eff,
                            "delocalization of the prepared initialization"));

  const double m3 = NoiseDistribution::centered_exponential().m3();
  const double sqd = std::sqrt(static_cast<double>(d));

  const MixtureSpec spec_exp = centered_mixture(d, NoiseDistribution::centered_exponential());
  const MixtureSpec spec_gauss = centered_mixture(d, NoiseDistribution::standard_gaussian());

  // drift of m = <theta, theta_*> is -<grad L, theta_*>
  const Eigen::VectorXd probe = st.theta.col(1);
  const GradProjectionEstimate gap_est = crn_grad_projection_gap(
      model, spec_exp, spec_gauss, st, probe, cfg.n_samples, derive_seed(cfg.seed, "gap"));
  const double gap = -sqd * gap_est.value(0);
  const double gap_ci = 4.0 * sqd * gap_est.se(0);
  const double predicted = 18.0 * m3 * cfg.rho * r_star;
  rep.claims.push_back(check_abs("sqrt(d) drift gap (centered_exponential - gaussian)", gap,
                                 predicted, cfg.gap_rel_tol * predicted, gap_ci,
                                 "18*m3*rho*R* with m3=" + fmt(m3) + ", R*=" + fmt(r_star)));

  // gaussian arm: finite-d drift equals the limit drift exactly in law
  {
    const GradProjectionEstimate g1 = grad_projection_oracle(
        model, spec_gauss, st, probe, cfg.n_samples, derive_seed(cfg.seed, "gauss_arm"));
    const int m_coord = u_star.layout.gram_coord(0, 1);
    const double h_m = drift_h(u_star, model, mix, cfg.c_lr, dcfg).h(m_coord);
    rep.claims.push_back(check_zero("gaussian arm: sqrt(d)(drift - h_m(u*))",
                                    sqd * (-g1.value(0) - h_m), 4.0 * sqd * g1.se(0),
                                    "h vanishes at its own fixed point up to the slice "
                                    "residual; h_m=" + fmt(h_m)));
  }

  // rho scan at fixed theta_0 and R*: the Berry-Esseen correction is linear
  // in rho at leading order
  {
    const double rho2 = cfg.rho * cfg.scan_rho_factor;
    ParameterState st2 = st;
    st2.theta.col(1) = rho2 * teacher_dir;
    const Eigen::VectorXd probe2 = st2.theta.col(1);
    const GradProjectionEstimate gap2_est =
        crn_grad_projection_gap(model, spec_exp, spec_gauss, st2, probe2, cfg.n_samples,
                                derive_seed(cfg.seed, "gap_scan"));
    const double gap2 = -sqd * gap2_est.value(0);
    const double ratio = gap2 / gap;
    const double ratio_ci =
        std::abs(ratio) * 4.0 *
        std::sqrt(std::pow(sqd * gap2_est.se(0) / gap2, 2) + std::pow(gap_ci / 4.0 / gap, 2));
    ClaimResult c;
    c.name = "gap ratio rho=" + fmt(rho2) + " vs rho=" + fmt(cfg.rho);
    c.measured = ratio;
    c.ci = ratio_ci;
    c.expected = 0.5 * (cfg.ratio_lo + cfg.ratio_hi);
    c.tolerance = 0.5 * (cfg.ratio_hi - cfg.ratio_lo);
    c.pass = ratio >= cfg.ratio_lo && ratio <= cfg.ratio_hi;
    c.note = "theta_0 and R* held fixed, theta_* rescaled";
    rep.claims.push_back(c);
  }

  rep.wall_seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// delocalization persistence
// ---------------------------------------------------------------------------

ExperimentReport exp_delocalization(const DelocalizationConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentReport rep;
  rep.name = "delocalization";
  rep.param("model", cfg.model);
  rep.param("dist", cfg.dist);
  rep.param("T", cfg.T);
  rep.param("replicas", static_cast<double>(cfg.replicas));
  rep.param("seed", static_cast<double>(cfg.seed));

  const ProjectiveModel model = make_logistic(2, 0.0);
  const NoiseDistribution noise = NoiseDistribution::from_name(cfg.dist, 0.0);

  std::vector<double> max_zeta_per_d;
  for (int d : cfg.d_list) {
    const MixtureSpec spec = make_pm_flat_mixture(d, 1.0, noise);
    std::vector<double> zetas(cfg.replicas, -1e300);
    parallel_for(static_cast<std::size_t>(cfg.replicas), [&](std::size_t r) {
      SgdConfig sc;
      sc.c_lr = cfg.c_lr;
      sc.total_time = cfg.T;
      sc.master_seed = derive_seed(cfg.seed, "deloc_data", d, r);
      const ParameterState init =
          gaussian_init(model, d, derive_seed(cfg.seed, "init", d, r));
      const Trajectory traj = run_sgd(model, spec, init, sc);
      for (const auto& rec : traj.records) zetas[r] = std::max(zetas[r], rec.deloc.zeta_eff);
    });
    double mz = -1e300;
    for (double z : zetas) mz = std::max(mz, z);
    max_zeta_per_d.push_back(mz);
    if (d >= cfg.min_d_for_bound) {
      ClaimResult c = check_abs("max zeta_eff, d=" + fmt(d), mz, 0.0, cfg.zeta_bound, 0.0,
                                "bound applies at d >= " + fmt(cfg.min_d_for_bound));
      rep.claims.push_back(c);
    } else {
      rep.claims.push_back(info("max zeta_eff, d=" + fmt(d), mz));
    }
  }
  for (std::size_t i = 0; i + 1 < cfg.d_list.size(); ++i) {
    ClaimResult c;
    c.name = "max zeta_eff non-increasing d=" + fmt(cfg.d_list[i]) + "->" +
             fmt(cfg.d_list[i + 1]);
    c.measured = max_zeta_per_d[i + 1];
    c.expected = max_zeta_per_d[i];
    c.tolerance = cfg.mono_slack;
    c.pass = max_zeta_per_d[i + 1] <= max_zeta_per_d[i] + cfg.mono_slack;
    rep.claims.push_back(c);
  }
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// DGEC probe and CLT gap scaling: battery machinery
// ---------------------------------------------------------------------------

namespace {

// Smooth battery elements over the k1-dimensional projection, each scaled so
// the C^3-bounded norm is <= 1.
struct BatteryElement {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> f;
};

std::vector<BatteryElement> make_battery(int k1) {
  std::vector<BatteryElement> battery;
  std::vector<Eigen::VectorXd> dirs;
  for (int i = 0; i < k1; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(k1);
    e(i) = 1.0;
    dirs.push_back(e);
  }
  if (k1 >= 2) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(k1, 1.0 / std::sqrt(double(k1)));
    dirs.push_back(v);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(k1);
    w(0) = 1.0 / std::sqrt(2.0);
    w(1) = -1.0 / std::sqrt(2.0);
    dirs.push_back(w);
  }
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Eigen::VectorXd v = dirs[i];
    battery.push_back({"tanh_form_" + std::to_string(i),
                       [v](const Eigen::VectorXd& z) { return 0.5 * std::tanh(v.dot(z)); }});
  }
  battery.push_back({"gauss_bump_0", [](const Eigen::VectorXd& z) {
                       return 0.5 * std::exp(-0.5 * z.squaredNorm());
                     }});
  {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(k1);
    c(0) = 1.0;
    battery.push_back({"gauss_bump_e1", [c](const Eigen::VectorXd& z) {
                         return 0.5 * std::exp(-0.5 * (z - c).squaredNorm());
                       }});
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(2, dirs.size()); ++i) {
    const Eigen::VectorXd v = dirs[i];
    battery.push_back({"tanh_cubed_" + std::to_string(i), [v](const Eigen::VectorXd& z) {
                         const double t = std::tanh(v.dot(z));
                         return t * t * t / 6.0;
                       }});
  }
  return battery;
}

struct BatteryGap {
  Eigen::VectorXd mean;  // per element
  Eigen::VectorXd se;
  double max_abs() const { return mean.cwiseAbs().maxCoeff(); }
  int argmax() const {
    int idx = 0;
    mean.cwiseAbs().maxCoeff(&idx);
    return idx;
  }
};

// E[f(theta^T X_a)] - E[f(theta^T X_b)] for every battery element. With
// coupled=true the two laws consume one uniform stream (CRN); otherwise the
// arms draw independently (the self-comparison noise floor).
BatteryGap battery_gap(const std::vector<BatteryElement>& battery,
                       const Eigen::MatrixXd& theta, const MixtureSpec& spec_a,
                       const MixtureSpec& spec_b, bool coupled, long n, uint64_t seed) {
  const int d = spec_a.d;
  const int k1 = static_cast<int>(theta.cols());
  const int nb = static_cast<int>(battery.size());
  const long block_size = 8192;
  const long blocks = (n + block_size - 1) / block_size;
  struct Acc {
    Eigen::VectorXd sum, sq;
  };
  std::vector<Acc> acc(blocks);

  // per-class projections of the means
  const int k = spec_a.num_classes();
  Eigen::MatrixXd mean_proj_a(k1, k), mean_proj_b(k1, k);
  for (int a = 0; a < k; ++a) {
    mean_proj_a.col(a) = theta.transpose() * spec_a.means[a];
    mean_proj_b.col(a) = theta.transpose() * spec_b.means[a];
  }

  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t blk) {
    Rng rng = make_stream(seed, "battery", blk);
    Acc& A = acc[blk];
    A.sum = Eigen::VectorXd::Zero(nb);
    A.sq = Eigen::VectorXd::Zero(nb);
    const long lo = static_cast<long>(blk) * block_size;
    const long hi = std::min<long>(lo + block_size, n);
    Eigen::VectorXd za(k1), zb(k1);
    for (long s = lo; s < hi; ++s) {
      const int j = sample_class(spec_a, rng);
      za.setZero();
      zb.setZero();
      if (coupled) {
        for (int i = 0; i < d; ++i) {
          const double u = rng.uniform_open();
          const double xa = spec_a.noise.from_uniform(u);
          const double xb = spec_b.noise.from_uniform(u);
          for (int c = 0; c < k1; ++c) {
            za(c) += theta(i, c) * xa;
            zb(c) += theta(i, c) * xb;
          }
        }
      } else {
        for (int i = 0; i < d; ++i) {
          const double xa = spec_a.noise.sample(rng);
          const double xb = spec_b.noise.sample(rng);
          for (int c = 0; c < k1; ++c) {
            za(c) += theta(i, c) * xa;
            zb(c) += theta(i, c) * xb;
          }
        }
      }
      za += mean_proj_a.col(j);
      zb += mean_proj_b.col(j);
      for (int e = 0; e < nb; ++e) {
        const double diff = battery[e].f(za) - battery[e].f(zb);
        A.sum(e) += diff;
        A.sq(e) += diff * diff;
      }
    }
  });

  BatteryGap gap;
  gap.mean = Eigen::VectorXd::Zero(nb);
  gap.se = Eigen::VectorXd::Zero(nb);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(nb);
  for (const auto& A : acc) {
    if (A.sum.size() == 0) continue;
    gap.mean += A.sum;
    sq += A.sq;
  }
  gap.mean /= static_cast<double>(n);
  for (int e = 0; e < nb; ++e) {
    const double var =
        std::max(0.0, sq(e) / static_cast<double>(n) - gap.mean(e) * gap.mean(e));
    gap.se(e) = std::sqrt(var / static_cast<double>(n));
  }
  return gap;
}

}  // namespace

ExperimentReport exp_dgec_probe(const DgecConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentReport rep;
  rep.name = "dgec_probe";
  rep.param("dist", cfg.dist);
  rep.param("c_lr", cfg.c_lr);
  rep.param("seed", static_cast<double>(cfg.seed));

  const ProjectiveModel model = make_logistic(2, 0.0);
  const NoiseDistribution noise = NoiseDistribution::from_name(cfg.dist, 0.0);
  const auto battery = make_battery(model.k_trained);

  std::vector<long> n_per_d = cfg.n_samples;
  if (n_per_d.empty()) {
    for (int d : cfg.d_list)
      n_per_d.push_back(std::max<long>(cfg.n_min, static_cast<long>(cfg.coord_budget / d)));
  }

  // gap(t, d) indexed by [time][d]
  std::vector<std::vector<double>> gaps(cfg.times.size());

  for (std::size_t di = 0; di < cfg.d_list.size(); ++di) {
    const int d = cfg.d_list[di];
    const long n = n_per_d[di];
    const MixtureSpec spec_nu = make_pm_flat_mixture(d, 1.0, noise);
    const MixtureSpec spec_gauss =
        make_pm_flat_mixture(d, 1.0, NoiseDistribution::standard_gaussian());

    for (std::size_t ti = 0; ti < cfg.times.size(); ++ti) {
      const double t = cfg.times[ti];
      // theta at checkpoint t along the nu-run
      ParameterState st = gaussian_init(model, d, derive_seed(cfg.seed, "init", d));
      if (t > 0.0) {
        SgdConfig sc;
        sc.c_lr = cfg.c_lr;
        sc.total_time = t;
        sc.master_seed = derive_seed(cfg.seed, "dgec_run", d);
        sc.keep_final_state = true;
        const Trajectory traj = run_sgd(model, spec_nu, st, sc);
        st = *traj.final_state;
      }
      const Eigen::MatrixXd theta = st.theta.leftCols(model.k_trained);

      const BatteryGap gap =
          battery_gap(battery, theta, spec_nu, spec_gauss, /*coupled=*/true, n,
                      derive_seed(cfg.seed, "gap", d, ti));
      gaps[ti].push_back(gap.max_abs());
      rep.claims.push_back(
          info("battery max gap, d=" + fmt(d) + ", t=" + fmt(t), gap.max_abs(),
               "argmax " + battery[gap.argmax()].name + ", se " +
                   fmt(gap.se(gap.argmax()))));

      const BatteryGap self =
          battery_gap(battery, theta, spec_nu, spec_nu, /*coupled=*/false, n,
                      derive_seed(cfg.seed, "self", d, ti));
      double worst_ratio = 0.0;
      for (int e = 0; e < self.mean.size(); ++e)
        worst_ratio = std::max(worst_ratio, std::abs(self.mean(e)) / (4.0 * self.se(e)));
      ClaimResult c;
      c.name = "self-comparison at noise floor, d=" + fmt(d) + ", t=" + fmt(t);
      c.measured = worst_ratio;
      c.expected = 0.0;
      c.tolerance = 1.0;  // |mean| <= 4 se for every element
      c.ci = 0.0;
      c.pass = worst_ratio <= 1.0;
      rep.claims.push_back(c);
    }
  }

  for (std::size_t ti = 0; ti < cfg.times.size(); ++ti) {
    for (std::size_t di = 0; di + 1 < cfg.d_list.size(); ++di) {
      ClaimResult c;
      c.name = "gap decreasing in d, t=" + fmt(cfg.times[ti]) + ", d=" +
               fmt(cfg.d_list[di]) + "->" + fmt(cfg.d_list[di + 1]);
      c.measured = gaps[ti][di + 1];
      c.expected = gaps[ti][di];
      c.tolerance = cfg.mono_slack;
      c.pass = gaps[ti][di + 1] <= gaps[ti][di] + cfg.mono_slack;
      rep.claims.push_back(c);
    }
  }

  rep.wall_seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// CLT gap scaling
// ---------------------------------------------------------------------------

ExperimentReport exp_clt_gap_scaling(const CltScalingConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentReport rep;
  rep.name = "clt_gap_scaling";
  rep.param("dist", cfg.dist);
  rep.param("d", static_cast<double>(cfg.d));
  rep.param("n_samples", static_cast<double>(cfg.n_samples));
  rep.param("seed", static_cast<double>(cfg.seed));

  const NoiseDistribution nu = NoiseDistribution::from_name(cfg.dist, 0.0);
  const NoiseDistribution gauss = NoiseDistribution::standard_gaussian();
  const int d = cfg.d;
  const long n = cfg.n_samples;

  // family theta(alpha) = alpha e_1 + sqrt(1-alpha^2) * flat(d-1);
  // inner products reduce to (X_1, sum_i>1 X_i), so the whole family is
  // evaluated in one pass over the data
  struct Member {
    double alpha, beta, l3;
  };
  std::vector<Member> family;
  for (double a : cfg.alphas) {
    Member m;
    m.alpha = a;
    m.beta = std::sqrt(1.0 - a * a) / std::sqrt(static_cast<double>(d - 1));
    m.l3 = a * a * a + std::pow(1.0 - a * a, 1.5) / std::sqrt(static_cast<double>(d - 1));
    family.push_back(m);
  }
  // end members: pure flat and pure spike, reported alongside the fit
  Member flat{0.0, 1.0 / std::sqrt(static_cast<double>(d - 1)),
              1.0 / std::sqrt(static_cast<double>(d - 1))};
  Member spike{1.0, 0.0, 1.0};
  std::vector<Member> all = family;
  all.push_back(flat);
  all.push_back(spike);
  const int nf = static_cast<int>(all.size());

  auto felem = [](double x) { return 0.5 * std::tanh(x); };  // third-moment sensitive

  const long block_size = 8192;
  const long blocks = (n + block_size - 1) / block_size;
  struct Acc {
    Eigen::VectorXd sum, sq;
  };
  std::vector<Acc> acc(blocks);
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t blk) {
    Rng rng = make_stream(cfg.seed, "clt", blk);
    Acc& A = acc[blk];
    A.sum = Eigen::VectorXd::Zero(nf);
    A.sq = Eigen::VectorXd::Zero(nf);
    const long lo = static_cast<long>(blk) * block_size;
    const long hi = std::min<long>(lo + block_size, n);
    for (long s = lo; s < hi; ++s) {
      double x1a = 0, x1b = 0, resta = 0, restb = 0;
      {
        const double u = rng.uniform_open();
        x1a = nu.from_uniform(u);
        x1b = gauss.from_uniform(u);
      }
      for (int i = 1; i < d; ++i) {
        const double u = rng.uniform_open();
        resta += nu.from_uniform(u);
        restb += gauss.from_uniform(u);
      }
      for (int m = 0; m < nf; ++m) {
        const double za = all[m].alpha * x1a + all[m].beta * resta;
        const double zb = all[m].alpha * x1b + all[m].beta * restb;
        const double diff = felem(za) - felem(zb);
        A.sum(m) += diff;
        A.sq(m) += diff * diff;
      }
    }
  });
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(nf), sq = Eigen::VectorXd::Zero(nf);
  for (const auto& A : acc) {
    if (A.sum.size() == 0) continue;
    mean += A.sum;
    sq += A.sq;
  }
  mean /= static_cast<double>(n);
  Eigen::VectorXd se(nf);
  for (int m = 0; m < nf; ++m)
    se(m) = std::sqrt(
        std::max(0.0, sq(m) / static_cast<double>(n) - mean(m) * mean(m)) /
        static_cast<double>(n));

  // log-log least squares over the interpolating family
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int nfam = static_cast<int>(family.size());
  for (int m = 0; m < nfam; ++m) {
    const double x = std::log(all[m].l3);
    const double y = std::log(std::abs(mean(m)));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (nfam * sxy - sx * sy) / (nfam * sxx - sx * sx);

  for (int m = 0; m < nfam; ++m)
    rep.claims.push_back(info("gap alpha=" + fmt(all[m].alpha), mean(m),
                              "l3cubed=" + fmt(all[m].l3) + ", se=" + fmt(se(m))));
  rep.claims.push_back(info("gap flat theta", mean(nfam),
                            "l3cubed=" + fmt(flat.l3) + ", se=" + fmt(se(nfam))));
  rep.claims.push_back(info("gap spike theta (e1)", mean(nfam + 1),
                            "l3cubed=1, se=" + fmt(se(nfam + 1))));

  ClaimResult c;
  c.name = "log-log slope of |gap| vs ||theta||_3^3";
  c.measured = slope;
  c.expected = 1.0;
  c.tolerance = 0.5 * (cfg.slope_hi - cfg.slope_lo);
  c.pass = slope >= cfg.slope_lo && slope <= cfg.slope_hi;
  rep.claims.push_back(c);

  rep.wall_seconds = seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// validation self-test
// ---------------------------------------------------------------------------

ExperimentReport run_validation(const ValidateConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentReport rep;
  rep.name = "validate";
  rep.param("probes", static_cast<double>(cfg.probes));
  rep.param("fd_tol", cfg.fd_tol);

  std::vector<ProjectiveModel> zoo;
  zoo.push_back(make_logistic(2, 0.1));
  zoo.push_back(make_logistic(3, 0.0));
  zoo.push_back(make_two_layer(2, 2, activation_tanh(), 0.1));
  zoo.push_back(make_two_layer(2, 2, activation_sigmoid(), 0.0));
  zoo.push_back(make_two_layer(1, 2, activation_smoothed_relu(), 0.0));
  zoo.push_back(make_multi_index(link_square()));
  zoo.push_back(make_multi_index(link_he3_plus_he2()));
  zoo.push_back(make_multi_index(link_poly({0.0, 0.0, 1.0, 0.5})));

  for (std::size_t i = 0; i < zoo.size(); ++i) {
    const double err = gradient_fd_check(zoo[i], cfg.probes, derive_seed(cfg.seed, "fd", i));
    rep.claims.push_back(
        check_abs("fd gradients [" + zoo[i].name + "]", err, 0.0, cfg.fd_tol, 0.0));
  }

  std::vector<NoiseDistribution> dists = {
      NoiseDistribution::standard_gaussian(), NoiseDistribution::rademacher(),
      NoiseDistribution::uniform_scaled(), NoiseDistribution::centered_exponential(),
      NoiseDistribution::two_point(0.2764)};
  for (std::size_t di = 0; di < dists.size(); ++di) {
    const auto& dist = dists[di];
    const auto xs = sample_iid(dist, cfg.moment_samples, derive_seed(cfg.seed, "mom", di));
    const double n = static_cast<double>(xs.size());
    for (int p = 1; p <= 4; ++p) {
      double sum = 0, sum2 = 0;
      for (double x : xs) {
        const double v = std::pow(x, p);
        sum += v;
        sum2 += v * v;
      }
      const double m_hat = sum / n;
      const double se = std::sqrt(std::max(0.0, sum2 / n - m_hat * m_hat) / n);
      const double target = dist.moment(p);
      rep.claims.push_back(check_abs(
          "moment p=" + std::to_string(p) + " [" + dist.name() + "]", m_hat, target,
          cfg.moment_se_mult * se, cfg.moment_se_mult * se));
    }
  }

  rep.wall_seconds = seconds_since(t0);
  return rep;
}

}  // namespace sgdlim
