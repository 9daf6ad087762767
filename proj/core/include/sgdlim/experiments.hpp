#pragma once

#include <string>
#include <vector>

#include "sgdlim/fluctuations.hpp"
#include "sgdlim/report.hpp"

namespace sgdlim {

// Shared mixture construction used by the classification experiments:
// two flat means +-mu with ||mu|| = mean_norm, equal weights, labels 0/1.
MixtureSpec make_pm_flat_mixture(int d, double mean_norm, const NoiseDistribution& noise);

// theta_0 with i.i.d. N(0, 1/d) entries per trained column (frozen columns
// appended afterwards by the caller when the model has them)
ParameterState gaussian_init(const ProjectiveModel& model, int d, uint64_t seed,
                             double column_scale = 1.0);

struct BallisticResult {
  ExperimentReport report;
  // max over replicas and records of zeta_eff, per (d, dist) arm, exposed so
  // the delocalization criterion can piggyback on the same runs
  std::vector<std::tuple<int, std::string, double>> max_zeta;
};

struct BallisticConfig {
  std::string model = "logistic";
  std::vector<std::string> dists = {"rademacher", "uniform_scaled", "centered_exponential"};
  int d = 2000;
  double c_lr = 1.0;
  double T = 5.0;
  int replicas = 50;
  std::vector<int> d_scan = {500, 1000, 2000};  // includes the headline d
  double tol_abs = 0.05;          // sup-deviation tolerance floor
  double tol_floor_mult = 3.0;    // ... or this multiple of the self-comparison floor
  double mono_slack = 0.0;        // allowed increase in the d-scan deviations
  int grid_points = 201;
  uint64_t seed = 1;
};

// Replica-averaged summary curves per noise law vs the Gaussian arm and vs
// the limit ODE; finite-size scan in d.
BallisticResult exp_ballistic_universality(const BallisticConfig& cfg);

struct LocalizedInitConfig {
  int d = 4000;
  std::vector<std::string> dists = {"standard_gaussian", "rademacher"};
  std::vector<double> two_point_m4;  // extra two-point laws by fourth moment
  long n_samples = 500000;
  double tolerance = 0.2;  // |measured - 2(m4-1)| bound
  uint64_t seed = 1;
};

// Phase retrieval at theta_0 = e_1, theta_* = d^(-1/2) 1: the one-step drift
// <grad L, theta_0> distinguishes noise laws through m4; the delocalized
// control arm restores universality.
ExperimentReport exp_localized_init(const LocalizedInitConfig& cfg);

struct DiffusiveGapConfig {
  double rho = 0.2;
  int d = 4000;
  double c_lr = 1.0;
  double scan_rho_factor = 0.5;  // second rho for the linearity scan
  long n_samples = 1000000;
  double r_guess = 0.2;          // fixed-point search start
  double gap_rel_tol = 0.30;     // |gap/pred - 1| bound
  double ratio_lo = 0.4, ratio_hi = 0.6;
  double solver_agree_tol = 1e-4;
  uint64_t seed = 1;
};

// Drift gap sqrt(d)(drift_nu - drift_gauss) of <theta, theta_*> at the
// uninformative fixed point vs 18 m3 rho R*. The rho scan holds theta_0 and
// R* fixed and rescales only theta_*, isolating the linear-in-rho term.
ExperimentReport exp_diffusive_gap(const DiffusiveGapConfig& cfg);

struct DelocalizationConfig {
  std::string model = "logistic";
  std::string dist = "standard_gaussian";
  std::vector<int> d_list = {500, 2000, 8000};
  double c_lr = 1.0;
  double T = 5.0;
  int replicas = 50;
  double zeta_bound = 0.25;  // applies from min_d_for_bound up
  int min_d_for_bound = 2000;
  double mono_slack = 0.0;
  uint64_t seed = 1;
};

ExperimentReport exp_delocalization(const DelocalizationConfig& cfg);

struct DgecConfig {
  std::string dist = "centered_exponential";
  std::vector<int> d_list = {500, 2000, 8000};
  std::vector<double> times = {0.0, 2.0};
  double c_lr = 1.0;
  // per-d sample counts; resolved as coord_budget / d when empty
  std::vector<long> n_samples;
  double coord_budget = 8e9;
  long n_min = 1000000;
  double mono_slack = 0.0;
  uint64_t seed = 1;
};

// Battery probe of the law of theta^T X along the nu-run vs the Gaussian
// equivalent, at fixed checkpoint times, as a function of d.
ExperimentReport exp_dgec_probe(const DgecConfig& cfg);

struct CltScalingConfig {
  std::string dist = "centered_exponential";
  int d = 4000;
  std::vector<double> alphas = {0.9, 0.75, 0.6, 0.45, 0.3};  // spike weights
  long n_samples = 10000000;
  double slope_lo = 0.8, slope_hi = 1.2;
  uint64_t seed = 1;
};

// Lindeberg bound probe: log-log regression of the battery gap against
// ||theta||_3^3 over a flat-to-spiked family with ||theta||_2 = 1.
ExperimentReport exp_clt_gap_scaling(const CltScalingConfig& cfg);

struct ValidateConfig {
  int probes = 100;
  double fd_tol = 1e-5;
  long moment_samples = 1000000;
  double moment_se_mult = 5.0;
  uint64_t seed = 1;
};

// Self-test: finite-difference gradient checks for the model zoo plus
// empirical moment checks for every noise law.
ExperimentReport run_validation(const ValidateConfig& cfg);

}  // namespace sgdlim
