#include "sgdlim/summary.hpp"

#include <cmath>
#include <stdexcept>

namespace sgdlim {

std::vector<std::pair<int, int>> SummaryLayout::gram_pairs() const {
  std::vector<std::pair<int, int>> pairs;
  const int r = gram_dim();
  for (int i = 0; i < k_trained; ++i)
    for (int j = i; j < r; ++j) pairs.emplace_back(i, j);
  return pairs;
}

int SummaryLayout::gram_coord(int i, int j) const {
  if (i > j) std::swap(i, j);
  if (!trained(i)) throw std::invalid_argument("gram_coord: entry is constant (not tracked)");
  const int r = gram_dim();
  // row i starts after rows 0..i-1, row m contributing (r - m) entries
  return i * r - i * (i - 1) / 2 + (j - i);
}

std::string SummaryLayout::coord_name(int idx) const {
  const auto pairs = gram_pairs();
  if (idx < static_cast<int>(pairs.size()))
    return "G_" + std::to_string(pairs[idx].first) + "_" + std::to_string(pairs[idx].second);
  return "w_" + std::to_string(idx - static_cast<int>(pairs.size()));
}

SummaryLayout layout_for(const ProjectiveModel& model, int k_means) {
  return SummaryLayout{model.k_trained, model.k_frozen, k_means, model.k2};
}

Eigen::VectorXd SummaryState::flatten() const {
  Eigen::VectorXd v(layout.coord_count());
  int idx = 0;
  for (const auto& [i, j] : layout.gram_pairs()) v(idx++) = gram(i, j);
  for (int b = 0; b < layout.k2; ++b) v(idx++) = w(b);
  return v;
}

SummaryState SummaryState::with_coords(const Eigen::VectorXd& coords) const {
  if (coords.size() != layout.coord_count())
    throw std::invalid_argument("with_coords: coordinate count mismatch");
  SummaryState out = *this;
  int idx = 0;
  for (const auto& [i, j] : layout.gram_pairs()) {
    out.gram(i, j) = coords(idx);
    out.gram(j, i) = coords(idx);
    ++idx;
  }
  for (int b = 0; b < layout.k2; ++b) out.w(b) = coords(idx++);
  return out;
}

SummaryState compute_summary(const ParameterState& state, const MixtureSpec& spec,
                             const ProjectiveModel& model) {
  const int kz = model.z_dim();
  const int k = spec.num_classes();
  if (state.theta.cols() != kz)
    throw std::invalid_argument("compute_summary: theta column count mismatch");
  SummaryState out;
  out.layout = layout_for(model, k);
  const int r = out.layout.gram_dim();
  Eigen::MatrixXd cols(state.d(), r);
  cols.leftCols(kz) = state.theta;
  for (int a = 0; a < k; ++a) cols.col(kz + a) = spec.means[a];
  out.gram = cols.transpose() * cols;
  out.gram = 0.5 * (out.gram + out.gram.transpose()).eval();
  out.w = state.w;
  return out;
}

DelocReport deloc_report(const ParameterState& state, int k_trained) {
  DelocReport rep;
  const int d = state.d();
  for (int a = 0; a < k_trained; ++a) {
    double linf = 0.0, l3 = 0.0;
    for (int i = 0; i < d; ++i) {
      const double v = std::abs(state.theta(i, a));
      linf = std::max(linf, v);
      l3 += v * v * v;
    }
    rep.linf = std::max(rep.linf, linf);
    rep.l3cubed = std::max(rep.l3cubed, l3);
  }
  rep.zeta_eff = d > 1 && rep.linf > 0.0
                     ? std::log(std::sqrt(static_cast<double>(d)) * rep.linf) /
                           std::log(static_cast<double>(d))
                     : -std::numeric_limits<double>::infinity();
  return rep;
}

RescaledState rescale(const SummaryState& u, const SummaryState& u_star, int d) {
  if (!(u.layout == u_star.layout))
    throw std::invalid_argument("rescale: summary layouts do not match");
  RescaledState r;
  r.u_tilde = std::sqrt(static_cast<double>(d)) * (u.flatten() - u_star.flatten());
  r.t = u.t;
  return r;
}

SummaryState unrescale(const RescaledState& r, const SummaryState& u_star, int d) {
  SummaryState out =
      u_star.with_coords(u_star.flatten() + r.u_tilde / std::sqrt(static_cast<double>(d)));
  out.t = r.t;
  return out;
}

}  // namespace sgdlim
