#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "sgdlim/dynamics.hpp"

namespace sgdlim {

struct FixedPoint {
  SummaryState u_star;
  double residual = 0.0;  // ||h||_inf over the searched coordinates
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXcd stability;  // eigenvalues of the full Jacobian at u_star
};

struct FixedPointConfig {
  double tol = 1e-6;
  int max_iterations = 200;
  double integrate_t_max = 500.0;
  // pinned canonical coordinates (held at their u_guess values); if empty
  // and the model declares an uninformative slice, that slice is used
  std::vector<int> slice;
  bool use_model_slice = true;
};

// Damped Newton with a finite-difference Jacobian from u_guess; falls back
// to long-time slice-restricted integration when Newton stalls. The
// stability spectrum is attached when a fixed point is found.
FixedPoint find_fixed_point(const SummaryState& u_guess, const ProjectiveModel& model,
                            const MixtureSpec::Moments& mix, double c_lr,
                            const DriftEvaluatorConfig& drift_cfg,
                            const FixedPointConfig& fp_cfg = {});

// The two search strategies exposed separately so they can cross-check each
// other (independent solvers, same root).
FixedPoint fixed_point_by_newton(const SummaryState& u_guess, const ProjectiveModel& model,
                                 const MixtureSpec::Moments& mix, double c_lr,
                                 const DriftEvaluatorConfig& drift_cfg,
                                 const FixedPointConfig& fp_cfg = {});
FixedPoint fixed_point_by_integration(const SummaryState& u_guess,
                                      const ProjectiveModel& model,
                                      const MixtureSpec::Moments& mix, double c_lr,
                                      const DriftEvaluatorConfig& drift_cfg,
                                      const FixedPointConfig& fp_cfg = {});

// Central finite differences of drift_h in the canonical coordinates with a
// fixed evaluator seed. Perturbations that leave the PSD cone are clipped
// back onto it and the realized coordinate difference is used.
Eigen::MatrixXd jacobian_h(const SummaryState& u_star, const ProjectiveModel& model,
                           const MixtureSpec::Moments& mix, double c_lr,
                           const DriftEvaluatorConfig& drift_cfg, double fd_step_rel = 1e-4,
                           double fd_step_floor = 1e-6);

struct VolatilityResult {
  Eigen::MatrixXd sigma;        // c_lr * Cov(S_u, S_u'), PSD-projected
  Eigen::MatrixXd sigma_sqrt;   // symmetric square root
  double clipped_mass = 0.0;    // eigenvalue mass removed by the projection
  Eigen::VectorXd se_diag;      // MC standard error of the diagonal entries
};

// Monte Carlo covariance of the per-step fluctuation variables
//   S(G_ij) = Z_j d1_i psi (+ Z_i d1_j psi when j is trained), S(w_b) = d2_b psi
// with class A ~ Cat(p), scaled by c_lr.
VolatilityResult volatility_sigma(const SummaryState& u_star, const ProjectiveModel& model,
                                  const MixtureSpec::Moments& mix, double c_lr,
                                  long n_samples, uint64_t seed);

struct SdeSpec {
  SummaryState u_star;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sigma_sqrt;

  std::string serialize() const;  // structured text, canonical coordinate order
};

struct SdeEnsemble {
  std::vector<double> times;
  // paths[p][t_index] = u_tilde
  std::vector<std::vector<Eigen::VectorXd>> paths;

  Eigen::VectorXd variance_at(std::size_t t_index) const;
};

// Euler-Maruyama for du~ = J u~ dt + sigma_sqrt dB. init(path) supplies the
// (matched) initial condition per path.
SdeEnsemble simulate_sde(const std::function<Eigen::VectorXd(int path)>& init,
                         const SdeSpec& spec, double T, double dt, int n_paths,
                         int record_every, uint64_t seed);

// sqrt(d)-rescaled trajectory records about u_star
std::vector<RescaledState> empirical_rescaled(const Trajectory& traj,
                                              const SummaryState& u_star, int d);

}  // namespace sgdlim
