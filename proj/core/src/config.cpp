#include "sgdlim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace sgdlim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error at '" + path + "': " + what);
}

void expect_keys(const json& obj, const std::string& path,
                 const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) fail(path + "." + key, "unknown key");
}

template <typename T>
T get_or(const json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(path + "." + key, e.what());
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse failure: ") + e.what());
  }
  expect_keys(root, "",
              {"run_id", "master_seed", "threads", "out", "quiet", "model", "mixture", "sgd",
               "evaluator", "ode", "experiment"});

  RunConfig cfg;
  cfg.run_id = get_or<std::string>(root, "", "run_id", cfg.run_id);
  cfg.master_seed = get_or<uint64_t>(root, "", "master_seed", cfg.master_seed);
  cfg.threads = get_or<int>(root, "", "threads", cfg.threads);
  cfg.out_dir = get_or<std::string>(root, "", "out", cfg.out_dir);
  cfg.quiet = get_or<bool>(root, "", "quiet", cfg.quiet);

  if (root.contains("model")) {
    const json& m = root["model"];
    expect_keys(m, "model",
                {"type", "k1", "num_classes", "activation", "lambda", "link", "poly",
                 "teacher_recipe", "rho"});
    cfg.model.type = get_or<std::string>(m, "model", "type", cfg.model.type);
    cfg.model.k1 = get_or<int>(m, "model", "k1", cfg.model.k1);
    cfg.model.num_classes = get_or<int>(m, "model", "num_classes", cfg.model.num_classes);
    cfg.model.activation = get_or<std::string>(m, "model", "activation", cfg.model.activation);
    cfg.model.lambda = get_or<double>(m, "model", "lambda", cfg.model.lambda);
    cfg.model.link = get_or<std::string>(m, "model", "link", cfg.model.link);
    cfg.model.poly = get_or<std::vector<double>>(m, "model", "poly", cfg.model.poly);
    cfg.model.teacher_recipe =
        get_or<std::string>(m, "model", "teacher_recipe", cfg.model.teacher_recipe);
    cfg.model.rho = get_or<double>(m, "model", "rho", cfg.model.rho);
    static const std::set<std::string> types = {"logistic", "two_layer", "multi_index",
                                                "zero"};
    if (!types.count(cfg.model.type)) fail("model.type", "unknown model " + cfg.model.type);
  }

  if (root.contains("mixture")) {
    const json& m = root["mixture"];
    expect_keys(m, "mixture", {"d", "noise", "noise_param", "means", "weights", "labels"});
    cfg.mixture.d = get_or<int>(m, "mixture", "d", cfg.mixture.d);
    cfg.mixture.noise = get_or<std::string>(m, "mixture", "noise", cfg.mixture.noise);
    cfg.mixture.noise_param = get_or<double>(m, "mixture", "noise_param", cfg.mixture.noise_param);
    cfg.mixture.weights = get_or<std::vector<double>>(m, "mixture", "weights", {});
    cfg.mixture.labels = get_or<std::vector<int>>(m, "mixture", "labels", {});
    if (m.contains("means")) {
      if (!m["means"].is_array()) fail("mixture.means", "expected an array");
      int idx = 0;
      for (const json& e : m["means"]) {
        const std::string path = "mixture.means[" + std::to_string(idx++) + "]";
        expect_keys(e, path, {"recipe", "scale", "file", "seed"});
        MeanConfig mc;
        mc.recipe = get_or<std::string>(e, path, "recipe", mc.recipe);
        mc.scale = get_or<double>(e, path, "scale", mc.scale);
        mc.file = get_or<std::string>(e, path, "file", mc.file);
        mc.seed = get_or<uint64_t>(e, path, "seed", mc.seed);
        cfg.mixture.means.push_back(mc);
      }
    }
    // the noise name is validated eagerly so a bad config dies before compute
    try {
      NoiseDistribution::from_name(cfg.mixture.noise, cfg.mixture.noise_param);
    } catch (const std::invalid_argument& e) {
      fail("mixture.noise", e.what());
    }
  }

  if (root.contains("sgd")) {
    const json& s = root["sgd"];
    expect_keys(s, "sgd", {"c_lr", "T", "record_stride", "r_exit", "zeta_exit", "replicas"});
    cfg.sgd.c_lr = get_or<double>(s, "sgd", "c_lr", cfg.sgd.c_lr);
    cfg.sgd.T = get_or<double>(s, "sgd", "T", cfg.sgd.T);
    cfg.sgd.record_stride = get_or<long>(s, "sgd", "record_stride", cfg.sgd.record_stride);
    cfg.sgd.r_exit = get_or<double>(s, "sgd", "r_exit", cfg.sgd.r_exit);
    cfg.sgd.zeta_exit = get_or<double>(s, "sgd", "zeta_exit", cfg.sgd.zeta_exit);
    cfg.sgd.replicas = get_or<int>(s, "sgd", "replicas", cfg.sgd.replicas);
    if (cfg.sgd.c_lr <= 0) fail("sgd.c_lr", "must be positive");
    if (cfg.sgd.replicas < 1) fail("sgd.replicas", "must be >= 1");
  }

  if (root.contains("evaluator")) {
    const json& e = root["evaluator"];
    expect_keys(e, "evaluator", {"method", "n_samples", "order", "crn_seed"});
    cfg.evaluator.method = get_or<std::string>(e, "evaluator", "method", cfg.evaluator.method);
    cfg.evaluator.n_samples = get_or<long>(e, "evaluator", "n_samples", cfg.evaluator.n_samples);
    cfg.evaluator.order = get_or<int>(e, "evaluator", "order", cfg.evaluator.order);
    cfg.evaluator.crn_seed = get_or<uint64_t>(e, "evaluator", "crn_seed", cfg.evaluator.crn_seed);
    if (cfg.evaluator.method != "monte_carlo" && cfg.evaluator.method != "gauss_hermite")
      fail("evaluator.method", "must be monte_carlo or gauss_hermite");
  }

  if (root.contains("ode")) {
    const json& o = root["ode"];
    expect_keys(o, "ode", {"solver", "T", "dt", "rtol"});
    cfg.ode.solver = get_or<std::string>(o, "ode", "solver", cfg.ode.solver);
    cfg.ode.T = get_or<double>(o, "ode", "T", cfg.ode.T);
    cfg.ode.dt = get_or<double>(o, "ode", "dt", cfg.ode.dt);
    cfg.ode.rtol = get_or<double>(o, "ode", "rtol", cfg.ode.rtol);
    if (cfg.ode.solver != "rk4" && cfg.ode.solver != "rk45")
      fail("ode.solver", "must be rk4 or rk45");
  }

  if (root.contains("experiment")) {
    const json& e = root["experiment"];
    expect_keys(e, "experiment",
                {"d", "c_lr", "T", "replicas", "rho", "n_samples", "d_list", "dists",
                 "tolerance"});
    if (e.contains("d")) cfg.experiment.d = e["d"].get<int>();
    if (e.contains("c_lr")) cfg.experiment.c_lr = e["c_lr"].get<double>();
    if (e.contains("T")) cfg.experiment.T = e["T"].get<double>();
    if (e.contains("replicas")) cfg.experiment.replicas = e["replicas"].get<int>();
    if (e.contains("rho")) cfg.experiment.rho = e["rho"].get<double>();
    if (e.contains("n_samples")) cfg.experiment.n_samples = e["n_samples"].get<long>();
    if (e.contains("d_list")) cfg.experiment.d_list = e["d_list"].get<std::vector<int>>();
    if (e.contains("dists"))
      cfg.experiment.dists = e["dists"].get<std::vector<std::string>>();
    if (e.contains("tolerance")) cfg.experiment.tolerance = e["tolerance"].get<double>();
  }

  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string RunConfig::effective_json() const {
  json j;
  j["run_id"] = run_id;
  j["master_seed"] = master_seed;
  j["threads"] = threads;
  j["out"] = out_dir;
  j["quiet"] = quiet;
  j["model"] = {{"type", model.type},
                {"k1", model.k1},
                {"num_classes", model.num_classes},
                {"activation", model.activation},
                {"lambda", model.lambda},
                {"link", model.link},
                {"poly", model.poly},
                {"teacher_recipe", model.teacher_recipe},
                {"rho", model.rho}};
  json means = json::array();
  for (const auto& m : mixture.means)
    means.push_back(
        {{"recipe", m.recipe}, {"scale", m.scale}, {"file", m.file}, {"seed", m.seed}});
  j["mixture"] = {{"d", mixture.d},
                  {"noise", mixture.noise},
                  {"noise_param", mixture.noise_param},
                  {"means", means},
                  {"weights", mixture.weights},
                  {"labels", mixture.labels}};
  j["sgd"] = {{"c_lr", sgd.c_lr},
              {"T", sgd.T},
              {"record_stride", sgd.record_stride},
              {"r_exit", sgd.r_exit},
              {"zeta_exit", sgd.zeta_exit},
              {"replicas", sgd.replicas}};
  j["evaluator"] = {{"method", evaluator.method},
                    {"n_samples", evaluator.n_samples},
                    {"order", evaluator.order},
                    {"crn_seed", evaluator.crn_seed}};
  j["ode"] = {{"solver", ode.solver}, {"T", ode.T}, {"dt", ode.dt}, {"rtol", ode.rtol}};
  json exp = json::object();
  if (experiment.d) exp["d"] = *experiment.d;
  if (experiment.c_lr) exp["c_lr"] = *experiment.c_lr;
  if (experiment.T) exp["T"] = *experiment.T;
  if (experiment.replicas) exp["replicas"] = *experiment.replicas;
  if (experiment.rho) exp["rho"] = *experiment.rho;
  if (experiment.n_samples) exp["n_samples"] = *experiment.n_samples;
  if (experiment.d_list) exp["d_list"] = *experiment.d_list;
  if (experiment.dists) exp["dists"] = *experiment.dists;
  if (experiment.tolerance) exp["tolerance"] = *experiment.tolerance;
  j["experiment"] = exp;
  return j.dump(2);
}

ProjectiveModel build_model(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  if (m.type == "logistic") return make_logistic(m.k1, m.lambda);
  if (m.type == "two_layer")
    return make_two_layer(m.k1, m.num_classes, activation_from_name(m.activation), m.lambda);
  if (m.type == "zero") return make_zero_model(m.k1, m.lambda);
  if (m.type == "multi_index") {
    if (m.link == "square") return make_multi_index(link_square());
    if (m.link == "he3_he2") return make_multi_index(link_he3_plus_he2());
    if (m.link == "poly") return make_multi_index(link_poly(m.poly));
    throw ConfigError("config error at 'model.link': unknown link " + m.link);
  }
  throw ConfigError("config error at 'model.type': unknown model " + m.type);
}

MixtureSpec build_mixture(const RunConfig& cfg, const ProjectiveModel& model) {
  MixtureSpec spec;
  spec.d = cfg.mixture.d;
  spec.noise = NoiseDistribution::from_name(cfg.mixture.noise, cfg.mixture.noise_param);

  std::vector<MeanConfig> means = cfg.mixture.means;
  if (means.empty()) {
    if (model.k_frozen > 0) {
      means.push_back({"zero", 0.0, "", 0});  // index models use centered features
    } else {
      // default classification mixture: +-flat unit means
      means.push_back({"flat", 1.0, "", 0});
      means.push_back({"flat", -1.0, "", 0});
    }
  }
  for (const auto& mc : means) {
    if (mc.recipe == "file") {
      auto loaded = mc.file.ends_with(".f64") ? load_means_f64(mc.file, spec.d)
                                              : load_means_csv(mc.file);
      for (auto& v : loaded) {
        if (v.size() != spec.d)
          throw ConfigError("config error at 'mixture.means': file vector length " +
                            std::to_string(v.size()) + " != d");
        spec.means.push_back(mc.scale * v);
      }
    } else {
      spec.means.push_back(make_mean(mc.recipe, spec.d, mc.scale, mc.seed));
    }
  }

  const int k = static_cast<int>(spec.means.size());
  if (cfg.mixture.weights.empty()) {
    spec.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  } else {
    if (static_cast<int>(cfg.mixture.weights.size()) != k)
      throw ConfigError("config error at 'mixture.weights': size must match means");
    spec.weights =
        Eigen::Map<const Eigen::VectorXd>(cfg.mixture.weights.data(), k);
  }
  if (cfg.mixture.labels.empty()) {
    for (int a = 0; a < k; ++a)
      spec.labels.push_back(model.num_classes > 1 ? a % model.num_classes : 0);
  } else {
    spec.labels = cfg.mixture.labels;
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config error at '") + e.what() + "'");
  }
  return spec;
}

ParameterState build_init(const RunConfig& cfg, const ProjectiveModel& model,
                          const MixtureSpec& spec, int replica) {
  ParameterState st = gaussian_init(
      model, spec.d, derive_seed(cfg.master_seed, "init", replica), 1.0);
  if (cfg.model.type == "multi_index") {
    st.theta.col(model.k_trained) =
        make_mean(cfg.model.teacher_recipe == "rho_flat" ? "flat" : cfg.model.teacher_recipe,
                  spec.d, cfg.model.rho, derive_seed(cfg.master_seed, "teacher"));
  }
  return st;
}

DriftEvaluatorConfig build_evaluator(const RunConfig& cfg) {
  DriftEvaluatorConfig d;
  d.method = cfg.evaluator.method == "monte_carlo" ? DriftMethod::MonteCarlo
                                                   : DriftMethod::GaussHermite;
  d.n_samples = cfg.evaluator.n_samples;
  d.order = cfg.evaluator.order;
  d.crn_seed = cfg.evaluator.crn_seed ? cfg.evaluator.crn_seed
                                      : derive_seed(cfg.master_seed, "crn");
  return d;
}

OdeConfig build_ode(const RunConfig& cfg) {
  OdeConfig o;
  o.solver = cfg.ode.solver == "rk4" ? OdeSolverKind::Rk4 : OdeSolverKind::Rk45;
  o.T = cfg.ode.T;
  o.dt = cfg.ode.dt;
  o.rtol = cfg.ode.rtol;
  return o;
}

namespace {

void write_csv_header(std::ostream& os, const SummaryLayout& lay, const char* step_name) {
  os << step_name << ",t";
  for (int i = 0; i < lay.coord_count(); ++i) os << ',' << lay.coord_name(i);
  os << ",linf,l3cubed,zeta_eff\n";
}

}  // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& traj, double delta) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.precision(17);
  if (traj.records.empty()) return;
  write_csv_header(os, traj.records.front().u.layout, "step");
  for (const auto& rec : traj.records) {
    os << rec.step << ',' << static_cast<double>(rec.step) * delta;
    const Eigen::VectorXd u = rec.u.flatten();
    for (int i = 0; i < u.size(); ++i) os << ',' << u(i);
    os << ',' << rec.deloc.linf << ',' << rec.deloc.l3cubed << ',' << rec.deloc.zeta_eff
       << '\n';
  }
}

void write_ode_csv(const std::string& path, const OdeSolution& sol) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.precision(17);
  if (sol.states.empty()) return;
  write_csv_header(os, sol.states.front().layout, "step");
  for (std::size_t i = 0; i < sol.states.size(); ++i) {
    os << i << ',' << sol.times[i];
    const Eigen::VectorXd u = sol.states[i].flatten();
    for (int j = 0; j < u.size(); ++j) os << ',' << u(j);
    os << ",,," << '\n';
  }
}

}  // namespace sgdlim
