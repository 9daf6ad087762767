#include "sgdlim/distributions.hpp"

#include <cmath>
#include <stdexcept>

namespace sgdlim {

NoiseDistribution::NoiseDistribution(NoiseKind kind, std::string name, double m3, double m4)
    : kind_(kind), name_(std::move(name)), m3_(m3), m4_(m4) {}

NoiseDistribution NoiseDistribution::standard_gaussian() {
  return {NoiseKind::StandardGaussian, "standard_gaussian", 0.0, 3.0};
}

NoiseDistribution NoiseDistribution::rademacher() {
  return {NoiseKind::Rademacher, "rademacher", 0.0, 1.0};
}

NoiseDistribution NoiseDistribution::uniform_scaled() {
  return {NoiseKind::UniformScaled, "uniform_scaled", 0.0, 9.0 / 5.0};
}

NoiseDistribution NoiseDistribution::centered_exponential() {
  return {NoiseKind::CenteredExponential, "centered_exponential", 2.0, 9.0};
}

NoiseDistribution NoiseDistribution::two_point(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("two_point: p must be in (0,1)");
  const double q = 1.0 - p;
  NoiseDistribution d{NoiseKind::TwoPoint, "two_point", (q - p) / std::sqrt(p * q),
                      1.0 / (p * q) - 3.0};
  d.tp_p_ = p;
  d.tp_a_ = std::sqrt(q / p);
  d.tp_b_ = -std::sqrt(p / q);
  return d;
}

NoiseDistribution NoiseDistribution::two_point_with_m4(double m4) {
  if (m4 < 1.0) throw std::invalid_argument("two_point_with_m4: m4 must be >= 1");
  // m4 = 1/(p(1-p)) - 3; the p < 1/2 branch gives positive skew
  const double pq = 1.0 / (m4 + 3.0);
  const double p = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * pq));
  return two_point(p);
}

NoiseDistribution NoiseDistribution::from_name(const std::string& name, double param) {
  if (name == "standard_gaussian") return standard_gaussian();
  if (name == "rademacher") return rademacher();
  if (name == "uniform_scaled") return uniform_scaled();
  if (name == "centered_exponential") return centered_exponential();
  if (name == "two_point") return two_point(param);
  throw std::invalid_argument("unknown noise distribution: " + name);
}

double NoiseDistribution::moment(int p) const {
  if (p < 0) throw std::invalid_argument("moment: p must be >= 0");
  if (p == 0) return 1.0;
  switch (kind_) {
    case NoiseKind::StandardGaussian: {
      if (p % 2 == 1) return 0.0;
      double m = 1.0;
      for (int k = p - 1; k > 1; k -= 2) m *= k;
      return m;
    }
    case NoiseKind::Rademacher:
      return p % 2 == 0 ? 1.0 : 0.0;
    case NoiseKind::UniformScaled:
      if (p % 2 == 1) return 0.0;
      return std::pow(3.0, p / 2.0) / (p + 1.0);
    case NoiseKind::CenteredExponential: {
      // central moments of Exp(1) are the derangement numbers:
      // D_k = k * D_{k-1} + (-1)^k, D_1 = 0
      double dk = 0.0;
      for (int k = 2; k <= p; ++k) dk = k * dk + ((k % 2 == 0) ? 1.0 : -1.0);
      return p == 1 ? 0.0 : dk;
    }
    case NoiseKind::TwoPoint:
      return tp_p_ * std::pow(tp_a_, p) + (1.0 - tp_p_) * std::pow(tp_b_, p);
  }
  return 0.0;
}

double NoiseDistribution::sample(Rng& rng) const {
  switch (kind_) {
    case NoiseKind::StandardGaussian:
      return rng.normal();
    case NoiseKind::Rademacher:
      return (rng.next_u64() & 1) ? 1.0 : -1.0;
    case NoiseKind::UniformScaled:
      return std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
    case NoiseKind::CenteredExponential:
      return -std::log(rng.uniform_open()) - 1.0;
    case NoiseKind::TwoPoint:
      return rng.uniform() < tp_p_ ? tp_a_ : tp_b_;
  }
  return 0.0;
}

void NoiseDistribution::fill_iid(std::span<double> out, Rng& rng) const {
  switch (kind_) {
    case NoiseKind::StandardGaussian:
      for (double& v : out) v = rng.normal();
      return;
    case NoiseKind::Rademacher:
      for (double& v : out) v = (rng.next_u64() & 1) ? 1.0 : -1.0;
      return;
    case NoiseKind::UniformScaled: {
      const double s = std::sqrt(3.0);
      for (double& v : out) v = s * (2.0 * rng.uniform() - 1.0);
      return;
    }
    case NoiseKind::CenteredExponential:
      for (double& v : out) v = -std::log(rng.uniform_open()) - 1.0;
      return;
    case NoiseKind::TwoPoint:
      for (double& v : out) v = rng.uniform() < tp_p_ ? tp_a_ : tp_b_;
      return;
  }
}

double NoiseDistribution::from_uniform(double u) const {
  switch (kind_) {
    case NoiseKind::StandardGaussian:
      return inverse_normal_cdf(u);
    case NoiseKind::Rademacher:
      return u < 0.5 ? -1.0 : 1.0;
    case NoiseKind::UniformScaled:
      return std::sqrt(3.0) * (2.0 * u - 1.0);
    case NoiseKind::CenteredExponential:
      return -std::log1p(-u) - 1.0;
    case NoiseKind::TwoPoint:
      return u < tp_p_ ? tp_a_ : tp_b_;
  }
  return 0.0;
}

std::vector<double> sample_iid(const NoiseDistribution& dist, std::size_t n, uint64_t seed) {
  Rng rng(derive_seed(seed, "sample_iid"));
  std::vector<double> out(n);
  dist.fill_iid(out, rng);
  return out;
}

}  // namespace sgdlim
