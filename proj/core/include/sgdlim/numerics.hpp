#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "sgdlim/rng.hpp"

namespace sgdlim {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Symmetric matrix expected to be positive semidefinite up to roundoff.
// Eigenvalues below -eps_clip (eps_clip = 1e-10 * trace) are treated as
// corruption and rejected; small negative eigenvalues are clipped to zero so
// the ODE trajectory can graze the PSD boundary without killing the drift
// evaluator.
class PsdMatrix {
 public:
  explicit PsdMatrix(Eigen::MatrixXd m);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& entries() const { return m_; }

  // Eigenvalue-clipped PSD version of the input.
  Eigen::MatrixXd clipped() const;

  static double eps_clip(const Eigen::MatrixXd& m);

 private:
  Eigen::MatrixXd m_;
};

// Lower-triangular factor L with L L^T equal to the eigenvalue-clipped
// matrix. Handles exactly singular PSD matrices (zero pivots give zero
// columns). Deterministic.
Eigen::MatrixXd cholesky_psd(const PsdMatrix& m);

// n draws from N(mean, cov), one per column of the result. Reproducible
// given the seed; bit-identical across runs.
Eigen::MatrixXd sample_mvn(const Eigen::VectorXd& mean, const PsdMatrix& cov, int n,
                           uint64_t seed);

struct QuadratureGrid {
  Eigen::MatrixXd nodes;    // dim x n_nodes
  Eigen::VectorXd weights;  // sums to 1

  int dim() const { return static_cast<int>(nodes.rows()); }
  int size() const { return static_cast<int>(nodes.cols()); }
};

// 1D probabilists' Gauss-Hermite rule (weight = standard normal density),
// computed by Golub-Welsch. Integrates polynomials of degree <= 2*order-1
// exactly against N(0,1).
void gauss_hermite_1d(int order, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

// Tensor-product grid for a dim-dimensional standard Gaussian. dim <= 4:
// above that the tensor grid blows up and Monte Carlo is the right tool.
QuadratureGrid gauss_hermite_grid(int dim, int order);

}  // namespace sgdlim
