#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "sgdlim/mixture.hpp"
#include "sgdlim/models.hpp"

namespace sgdlim {

// Column ordering of the Gram matrix G = (theta, mu)^T (theta, mu):
// trained theta columns, then frozen ground-truth columns, then class means.
// The canonical flattening below is the single coordinate system shared by
// the ODE drift, the SDE matrices, the drift oracle, and all CSV output:
// upper-triangular G entries (row, col) restricted to rows that are trained
// columns (all other entries are constants along any trajectory), followed
// by the w entries.
struct SummaryLayout {
  int k_trained = 0;
  int k_frozen = 0;
  int k_means = 0;
  int k2 = 0;

  int gram_dim() const { return k_trained + k_frozen + k_means; }
  bool trained(int col) const { return col < k_trained; }
  int coord_count() const {
    return k_trained * gram_dim() - k_trained * (k_trained - 1) / 2 + k2;
  }
  std::vector<std::pair<int, int>> gram_pairs() const;
  // index of entry (i,j), i <= j, i trained, in the canonical vector
  int gram_coord(int i, int j) const;
  int w_coord(int b) const { return coord_count() - k2 + b; }
  std::string coord_name(int idx) const;

  bool operator==(const SummaryLayout&) const = default;
};

SummaryLayout layout_for(const ProjectiveModel& model, int k_means);

struct SummaryState {
  SummaryLayout layout;
  Eigen::MatrixXd gram;  // gram_dim x gram_dim, symmetric PSD up to clipping
  Eigen::VectorXd w;
  double t = 0.0;

  Eigen::VectorXd flatten() const;
  // canonical coordinates replaced, constant entries kept
  SummaryState with_coords(const Eigen::VectorXd& coords) const;
};

// exact inner products (theta, mu)^T (theta, mu); symmetric by construction
SummaryState compute_summary(const ParameterState& state, const MixtureSpec& spec,
                             const ProjectiveModel& model);

struct DelocReport {
  double linf = 0.0;      // max over trained columns and coordinates
  double l3cubed = 0.0;   // max over trained columns of ||theta^a||_3^3
  double zeta_eff = 0.0;  // log_d(sqrt(d) * linf); "stays in D_zeta" reads zeta_eff <= zeta
};

DelocReport deloc_report(const ParameterState& state, int k_trained);

struct RescaledState {
  Eigen::VectorXd u_tilde;
  double t = 0.0;
};

// u_tilde = sqrt(d) (u - u_star) over the canonical coordinates; exact
// affine map, invertible via unrescale.
RescaledState rescale(const SummaryState& u, const SummaryState& u_star, int d);
SummaryState unrescale(const RescaledState& r, const SummaryState& u_star, int d);

}  // namespace sgdlim
