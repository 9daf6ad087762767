#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgdlim/mixture.hpp"

namespace sgdlim {

// Loss L(Theta, X) = psi(theta^T X, w; y) + Lambda ||theta||^2 where theta
// holds k_trained trained direction vectors followed by k_frozen frozen
// ground-truth vectors. z passed to the callbacks spans all k_trained +
// k_frozen inner products; gradients are only ever taken over the trained
// part (grad1) and over w (grad2).
struct ProjectiveModel {
  std::string name;
  int k_trained = 0;
  int k_frozen = 0;
  int k2 = 0;            // dim of w
  int num_classes = 1;   // label arity the loss expects
  double lambda = 0.0;   // l2 regularization
  double growth_order = 1.0;  // polynomial growth metadata for psi derivatives

  std::function<double(std::span<const double> z, std::span<const double> w, int y)> psi;
  std::function<void(std::span<const double> z, std::span<const double> w, int y,
                     std::span<double> g1)>
      grad1;
  std::function<void(std::span<const double> z, std::span<const double> w, int y,
                     std::span<double> g2)>
      grad2;

  // For fixed-point searches: canonical summary coordinates pinned on the
  // model's uninformative symmetry slice (empty if the model declares none).
  std::function<std::vector<int>(int gram_dim)> uninformative_slice;

  int z_dim() const { return k_trained + k_frozen; }
};

// Trained + frozen parameter columns; frozen columns never change under SGD.
struct ParameterState {
  Eigen::MatrixXd theta;  // d x (k_trained + k_frozen), frozen columns last
  Eigen::VectorXd w;

  int d() const { return static_cast<int>(theta.rows()); }
};

// scalar link with first two derivatives, for single-index models
struct ScalarLink {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
};

ScalarLink link_square();            // phase retrieval
ScalarLink link_he3_plus_he2();      // x^3 - 3x + x^2
ScalarLink link_poly(const std::vector<double>& coeffs);  // sum c_i x^i

struct Activation {
  std::string name;
  std::function<double(double)> g;
  std::function<double(double)> dg;
};

Activation activation_tanh();
Activation activation_sigmoid();
Activation activation_smoothed_relu();  // x -> (x + sqrt(x^2 + eps^2))/2, eps = 0.1
Activation activation_from_name(const std::string& name);

// One-vs-all cross-entropy over k1 = num_classes hyperplanes.
ProjectiveModel make_logistic(int k1, double lambda);

// Two-layer architecture: num_classes one-vs-all heads, each with k1
// first-layer vectors and k1 second-layer weights.
ProjectiveModel make_two_layer(int k1, int num_classes, const Activation& g, double lambda);

// Single-index regression |g(<X,theta>) - g(<X,theta_*>)|^2 with the ground
// truth held as a frozen column.
ProjectiveModel make_multi_index(const ScalarLink& link);

// psi identically zero; pure-regularizer dynamics, used as an exact oracle
ProjectiveModel make_zero_model(int k1, double lambda);

// Full parameter-space gradient (trained theta columns get
// grad1_a * x + 2*lambda*theta_a, frozen columns stay zero).
struct ParameterGradient {
  Eigen::MatrixXd theta;  // d x (k_trained + k_frozen)
  Eigen::VectorXd w;
};
ParameterGradient full_gradient(const ProjectiveModel& model, const ParameterState& state,
                                const Datum& datum);

// Centered finite-difference verification of grad1/grad2 against psi at
// random probe points with |z|,|w| <= 5. Returns the worst relative error.
double gradient_fd_check(const ProjectiveModel& model, int probes, uint64_t seed);

}  // namespace sgdlim
