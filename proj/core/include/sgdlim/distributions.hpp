#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgdlim/rng.hpp"

namespace sgdlim {

enum class NoiseKind {
  StandardGaussian,
  Rademacher,
  UniformScaled,        // uniform on [-sqrt(3), sqrt(3)]
  CenteredExponential,  // Exp(1) - 1
  TwoPoint,             // {a, b} with P(a) = p, standardized
};

// A standardized scalar law: mean 0, variance 1 analytically for every kind.
// This is the axis along which universality is probed, so the analytic third
// and fourth moments are first-class data.
class NoiseDistribution {
 public:
  static NoiseDistribution standard_gaussian();
  static NoiseDistribution rademacher();
  static NoiseDistribution uniform_scaled();
  static NoiseDistribution centered_exponential();
  static NoiseDistribution two_point(double p);
  // two-point law with a prescribed fourth moment (m4 > 1)
  static NoiseDistribution two_point_with_m4(double m4);
  static NoiseDistribution from_name(const std::string& name, double param);

  NoiseKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double m3() const { return m3_; }
  double m4() const { return m4_; }
  // all built-in laws have every moment finite
  bool all_moments_finite() const { return true; }

  // exact analytic p-th moment
  double moment(int p) const;

  double sample(Rng& rng) const;
  void fill_iid(std::span<double> out, Rng& rng) const;

  // inverse-CDF map, for common-random-number coupling across kinds
  double from_uniform(double u) const;

 private:
  NoiseDistribution(NoiseKind kind, std::string name, double m3, double m4);
  NoiseKind kind_;
  std::string name_;
  double m3_ = 0, m4_ = 0;
  double tp_p_ = 0.5, tp_a_ = 1.0, tp_b_ = -1.0;  // two-point parameters
};

// n i.i.d. draws, reproducible given seed
std::vector<double> sample_iid(const NoiseDistribution& dist, std::size_t n, uint64_t seed);

}  // namespace sgdlim
