#include "sgdlim/numerics.hpp"

#include <cmath>

namespace sgdlim {

double PsdMatrix::eps_clip(const Eigen::MatrixXd& m) {
  const double tr = m.trace();
  return 1e-10 * std::max(tr, 1.0e-300);
}

PsdMatrix::PsdMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw NumericalError("PsdMatrix: matrix not square");
  if (!m_.allFinite()) throw NumericalError("PsdMatrix: non-finite entries");
  const double asym = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  if (asym > 1e-9 * scale) throw NumericalError("PsdMatrix: matrix not symmetric");
  m_ = 0.5 * (m_ + m_.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -eps_clip(m_))
    throw NumericalError("PsdMatrix: eigenvalue below -eps_clip, Gram matrix is corrupted");
}

Eigen::MatrixXd PsdMatrix::clipped() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd cholesky_psd(const PsdMatrix& m) {
  const Eigen::MatrixXd a = m.clipped();
  const int n = m.dim();
  const double tol = 1e-12 * std::max(a.diagonal().maxCoeff(), 1e-300);
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= tol) {
      // rank deficiency: zero pivot, column stays zero
      continue;
    }
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

Eigen::MatrixXd sample_mvn(const Eigen::VectorXd& mean, const PsdMatrix& cov, int n,
                           uint64_t seed) {
  if (mean.size() != cov.dim()) throw NumericalError("sample_mvn: dimension mismatch");
  const Eigen::MatrixXd l = cholesky_psd(cov);
  const int r = cov.dim();
  Rng rng(derive_seed(seed, "sample_mvn"));
  Eigen::MatrixXd out(r, n);
  Eigen::VectorXd xi(r);
  for (int s = 0; s < n; ++s) {
    for (int i = 0; i < r; ++i) xi(i) = rng.normal();
    out.col(s) = mean + l * xi;
  }
  return out;
}

void gauss_hermite_1d(int order, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  if (order < 1) throw NumericalError("gauss_hermite_1d: order must be >= 1");
  // Jacobi matrix of the Hermite recurrence with N(0,1) weight: off-diagonal
  // entries sqrt(k).
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double v = std::sqrt(static_cast<double>(k));
    jac(k, k - 1) = v;
    jac(k - 1, k) = v;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  nodes = es.eigenvalues();
  weights.resize(order);
  for (int i = 0; i < order; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    weights(i) = v0 * v0;
  }
  // symmetrize: pair nodes about zero exactly
  for (int i = 0, j = order - 1; i < j; ++i, --j) {
    const double x = 0.5 * (nodes(j) - nodes(i));
    nodes(i) = -x;
    nodes(j) = x;
    const double w = 0.5 * (weights(i) + weights(j));
    weights(i) = w;
    weights(j) = w;
  }
  if (order % 2 == 1) nodes((order - 1) / 2) = 0.0;
  weights /= weights.sum();
}

QuadratureGrid gauss_hermite_grid(int dim, int order) {
  if (dim < 1 || dim > 4)
    throw NumericalError("gauss_hermite_grid: dim must be in [1,4]; use Monte Carlo above 4");
  double total = std::pow(static_cast<double>(order), dim);
  if (total > 1e6) throw NumericalError("gauss_hermite_grid: order^dim exceeds 1e6");

  Eigen::VectorXd n1, w1;
  gauss_hermite_1d(order, n1, w1);

  const int n = static_cast<int>(total);
  QuadratureGrid grid;
  grid.nodes.resize(dim, n);
  grid.weights.resize(n);
  std::vector<int> idx(dim, 0);
  for (int s = 0; s < n; ++s) {
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      grid.nodes(a, s) = n1(idx[a]);
      w *= w1(idx[a]);
    }
    grid.weights(s) = w;
    for (int a = 0; a < dim; ++a) {
      if (++idx[a] < order) break;
      idx[a] = 0;
    }
  }
  grid.weights /= grid.weights.sum();
  return grid;
}

}  // namespace sgdlim
