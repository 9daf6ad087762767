#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "sgdlim/models.hpp"
#include "sgdlim/summary.hpp"

namespace sgdlim {

struct SgdConfig {
  double c_lr = 1.0;        // delta = c_lr / d, exactly
  double total_time = 5.0;  // continuous horizon T; steps = ceil(T d / c_lr)
  long record_stride = 0;   // 0 -> max(1, d/100)
  double r_exit = 1e6;      // exit when ||Theta||_2^2 >= r_exit (checked every step)
  double zeta_exit = 0.5;   // delocalization exit, checked at record strides only
  uint64_t master_seed = 1;
  int replica = 0;
  bool keep_final_state = false;
};

struct TrajectoryRecord {
  long step = 0;
  SummaryState u;
  DelocReport deloc;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  std::optional<long> exit_step_r;
  std::optional<long> exit_step_deloc;
  bool blew_up = false;
  long steps_planned = 0;
  long steps_run = 0;
  std::optional<ParameterState> final_state;
};

// Online SGD Theta_l = Theta_{l-1} - delta * grad L(Theta_{l-1}, X^l) with
// fresh data each step. Deterministic given (master_seed, replica); frozen
// columns are never written.
Trajectory run_sgd(const ProjectiveModel& model, const MixtureSpec& spec,
                   const ParameterState& init, const SgdConfig& cfg);

struct DriftEstimate {
  Eigen::VectorXd drift;  // per canonical summary coordinate
  Eigen::VectorXd se;
  SummaryState at;
  long n = 0;
};

// Monte Carlo estimate of E[u(Theta_1) - u(Theta_0)] / delta at a fixed
// parameter state, over fresh data. This is the executable ground truth the
// analytic drift formula is validated against.
DriftEstimate one_step_drift_oracle(const ProjectiveModel& model, const MixtureSpec& spec,
                                    const ParameterState& state, const SgdConfig& cfg,
                                    long n_samples, uint64_t seed);

struct GradProjectionEstimate {
  Eigen::VectorXd value;  // E[<grad_{theta_a} L, v>] per trained column a
  Eigen::VectorXd se;
};

// Population gradient projected on a probe direction v.
GradProjectionEstimate grad_projection_oracle(const ProjectiveModel& model,
                                              const MixtureSpec& spec,
                                              const ParameterState& state,
                                              const Eigen::VectorXd& v, long n_samples,
                                              uint64_t seed);

// Same quantity, difference between two noise laws with common random
// numbers (one uniform stream, two inverse CDFs). spec_b must differ from
// spec_a only in the noise distribution.
GradProjectionEstimate crn_grad_projection_gap(const ProjectiveModel& model,
                                               const MixtureSpec& spec_a,
                                               const MixtureSpec& spec_b,
                                               const ParameterState& state,
                                               const Eigen::VectorXd& v, long n_samples,
                                               uint64_t seed);

}  // namespace sgdlim
