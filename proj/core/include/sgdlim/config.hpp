#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgdlim/dynamics.hpp"
#include "sgdlim/experiments.hpp"

namespace sgdlim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  std::string type = "logistic";  // logistic|two_layer|multi_index|zero
  int k1 = 2;
  int num_classes = 2;           // two_layer heads
  std::string activation = "tanh";
  double lambda = 0.0;
  std::string link = "he3_he2";  // multi_index: square|he3_he2|poly
  std::vector<double> poly;      // coefficients for link = poly
  std::string teacher_recipe = "rho_flat";
  double rho = 1.0;              // teacher norm for multi_index
};

struct MeanConfig {
  std::string recipe = "flat";  // flat|rho_flat|coordinate_e1|random_unit|zero|file
  double scale = 1.0;
  std::string file;  // csv or .f64 payload when recipe = file
  uint64_t seed = 0;
};

struct MixtureConfig {
  int d = 2000;
  std::string noise = "standard_gaussian";
  double noise_param = 0.5;  // two_point p
  std::vector<MeanConfig> means;
  std::vector<double> weights;  // empty -> uniform
  std::vector<int> labels;      // empty -> identity
};

struct InitConfig {
  std::string recipe = "gaussian";  // gaussian|coordinate_e1
  double scale = 1.0;
};

struct SgdRunConfig {
  double c_lr = 1.0;
  double T = 5.0;
  long record_stride = 0;
  double r_exit = 1e6;
  double zeta_exit = 0.5;
  int replicas = 20;
};

struct EvaluatorConfig {
  std::string method = "gauss_hermite";
  long n_samples = 100000;
  int order = 10;
  uint64_t crn_seed = 0;  // 0 -> derived from master seed
};

struct OdeRunConfig {
  std::string solver = "rk45";
  double T = 5.0;
  double dt = 1e-2;
  double rtol = 1e-8;
};

struct ExperimentParams {
  // free-form per-experiment knobs with schema-checked names; unset values
  // fall back to the experiment defaults
  std::optional<int> d;
  std::optional<double> c_lr;
  std::optional<double> T;
  std::optional<int> replicas;
  std::optional<double> rho;
  std::optional<long> n_samples;
  std::optional<std::vector<int>> d_list;
  std::optional<std::vector<std::string>> dists;
  std::optional<double> tolerance;
};

struct RunConfig {
  std::string run_id = "run";
  uint64_t master_seed = 1;
  int threads = 0;  // 0 = hardware
  std::string out_dir = "out";
  bool quiet = false;
  ModelConfig model;
  MixtureConfig mixture;
  SgdRunConfig sgd;
  EvaluatorConfig evaluator;
  OdeRunConfig ode;
  ExperimentParams experiment;

  std::string effective_json() const;  // defaults filled, reproducible echo
};

// Parses and validates a config file; unknown keys are rejected with the
// offending path in the message.
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// Builders shared by the CLI subcommands.
ProjectiveModel build_model(const RunConfig& cfg);
MixtureSpec build_mixture(const RunConfig& cfg, const ProjectiveModel& model);
ParameterState build_init(const RunConfig& cfg, const ProjectiveModel& model,
                          const MixtureSpec& spec, int replica);
DriftEvaluatorConfig build_evaluator(const RunConfig& cfg);
OdeConfig build_ode(const RunConfig& cfg);

// CSV writers: header then one row per record with columns
// step,t,<canonical u entries>,linf,l3cubed,zeta_eff
void write_trajectory_csv(const std::string& path, const Trajectory& traj, double delta);
void write_ode_csv(const std::string& path, const OdeSolution& sol);

}  // namespace sgdlim
