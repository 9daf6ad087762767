#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sgdlim/distributions.hpp"
#include "sgdlim/rng.hpp"

namespace sgdlim {

// Labeled mixture data: hidden class j ~ Cat(weights), X = means[j] + Y with
// Y_i i.i.d. from the noise law, class label y = labels[j].
struct MixtureSpec {
  int d = 0;
  std::vector<Eigen::VectorXd> means;
  Eigen::VectorXd weights;
  std::vector<int> labels;  // class -> label in [0, num_labels)
  NoiseDistribution noise = NoiseDistribution::standard_gaussian();

  int num_classes() const { return static_cast<int>(means.size()); }
  int num_labels() const;
  void validate() const;  // throws std::invalid_argument naming the field

  // just weights + labels: what the limiting dynamics sees of the mixture
  struct Moments {
    Eigen::VectorXd weights;
    std::vector<int> labels;
  };
  Moments moments() const { return {weights, labels}; }
};

struct Datum {
  Eigen::VectorXd x;
  int j = 0;                // hidden class
  Eigen::VectorXd one_hot;  // label as one-hot over [num_labels]
};

Datum sample_datum(const MixtureSpec& spec, Rng& rng);

// draw the hidden class only
int sample_class(const MixtureSpec& spec, Rng& rng);

struct MeanDelocReport {
  std::vector<bool> flags;       // max_i |mu^a_i| <= d^(-1/2+zeta)
  std::vector<double> linf;      // max_i |mu^a_i|
  bool all() const;
};

// Def of the coordinate-delocalized set applied to each class mean.
MeanDelocReport delocalization_of_means(const MixtureSpec& spec, double zeta);

// Named mean constructions used by the config schema:
//   flat           scale * d^(-1/2) * (1,...,1)
//   rho_flat       rho * d^(-1/2) * (1,...,1)
//   coordinate_e1  scale * e_1
//   random_unit    scale * (uniform random unit vector from seed)
//   zero           the zero vector
Eigen::VectorXd make_mean(const std::string& recipe, int d, double scale, uint64_t seed);

// one vector per non-empty line, comma- or whitespace-separated entries
std::vector<Eigen::VectorXd> load_means_csv(const std::string& path);
// raw little-endian float64 payload, n_vectors * d values
std::vector<Eigen::VectorXd> load_means_f64(const std::string& path, int d);

}  // namespace sgdlim
