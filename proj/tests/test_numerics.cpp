#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sgdlim/numerics.hpp"

using namespace sgdlim;

TEST_CASE("cholesky_psd: identity") {
  PsdMatrix m(Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd l = cholesky_psd(m);
  CHECK((l - Eigen::MatrixXd::Identity(2, 2)).norm() == doctest::Approx(0.0));
}

TEST_CASE("cholesky_psd: hand-checkable factor") {
  Eigen::MatrixXd a(2, 2);
  a << 4, 2, 2, 2;
  const Eigen::MatrixXd l = cholesky_psd(PsdMatrix(a));
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(1, 0) == doctest::Approx(1.0));
  CHECK(l(1, 1) == doctest::Approx(1.0));
  CHECK(l(0, 1) == 0.0);
}

TEST_CASE("cholesky_psd: rank-1 matrix reconstructs") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 1, 1, 1;
  const Eigen::MatrixXd l = cholesky_psd(PsdMatrix(a));
  CHECK((l * l.transpose() - a).norm() / a.norm() < 1e-8);
}

TEST_CASE("cholesky_psd: random PSD matrices reconstruct the clipped input") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int r = 2 + static_cast<int>(rng.next_u64() % 7);
    Eigen::MatrixXd b(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) b(i, j) = rng.normal();
    Eigen::MatrixXd a = b * b.transpose();
    if (trial % 3 == 0) {
      // make it rank deficient
      a += -1.0 * (a.col(0) * a.row(0)) / a(0, 0);
      a = 0.5 * (a + a.transpose()).eval();
    }
    PsdMatrix m(a);
    const Eigen::MatrixXd l = cholesky_psd(m);
    const Eigen::MatrixXd rec = l * l.transpose();
    CHECK((rec - m.clipped()).norm() <= 1e-8 * std::max(1.0, m.clipped().norm()));
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j) CHECK(l(i, j) == 0.0);
  }
}

TEST_CASE("cholesky_psd: rejects matrices below -eps_clip") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 0, 0, -1e-3;
  CHECK_THROWS_AS(PsdMatrix{a}, NumericalError);
}

TEST_CASE("sample_mvn: law of large numbers and determinism") {
  const int n = 100000;
  PsdMatrix cov(Eigen::MatrixXd::Identity(2, 2));
  const Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd xs = sample_mvn(mean, cov, n, 42);
  const Eigen::VectorXd mu_hat = xs.rowwise().mean();
  for (int i = 0; i < 2; ++i) CHECK(std::abs(mu_hat(i)) < 4.0 / std::sqrt(double(n)));

  const Eigen::MatrixXd again = sample_mvn(mean, cov, n, 42);
  CHECK((xs - again).cwiseAbs().maxCoeff() == 0.0);  // bit identical
}

TEST_CASE("sample_mvn: zero covariance is degenerate at the mean") {
  PsdMatrix cov(Eigen::MatrixXd::Zero(3, 3));
  Eigen::VectorXd mean(3);
  mean << 1.0, -2.0, 0.5;
  const Eigen::MatrixXd xs = sample_mvn(mean, cov, 1000, 1);
  for (int s = 0; s < xs.cols(); ++s) CHECK((xs.col(s) - mean).norm() == 0.0);
}

TEST_CASE("sample_mvn: empirical covariance converges") {
  Eigen::MatrixXd c(2, 2);
  c << 1.0, 0.5, 0.5, 1.0;
  const int n = 1000000;
  const Eigen::MatrixXd xs = sample_mvn(Eigen::VectorXd::Zero(2), PsdMatrix(c), n, 3);
  const Eigen::MatrixXd cov_hat =
      xs * xs.transpose() / double(n) -
      xs.rowwise().mean() * xs.rowwise().mean().transpose();
  CHECK((cov_hat - c).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("gauss_hermite_grid: exact low moments in 1d") {
  const QuadratureGrid g = gauss_hermite_grid(1, 5);
  CHECK(g.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
  double m2 = 0, m4 = 0;
  for (int s = 0; s < g.size(); ++s) {
    m2 += g.weights(s) * g.nodes(0, s) * g.nodes(0, s);
    m4 += g.weights(s) * std::pow(g.nodes(0, s), 4);
  }
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("gauss_hermite_grid: hermite orthogonality in 2d") {
  const QuadratureGrid g = gauss_hermite_grid(2, 8);
  auto he2 = [](double x) { return x * x - 1.0; };
  auto he3 = [](double x) { return x * x * x - 3.0 * x; };
  double acc = 0.0;
  for (int s = 0; s < g.size(); ++s)
    acc += g.weights(s) * he3(g.nodes(0, s)) * he2(g.nodes(0, s));
  CHECK(std::abs(acc) < 1e-12);
}

TEST_CASE("gauss_hermite_grid: rejects dim > 4 and oversize grids") {
  CHECK_THROWS_AS(gauss_hermite_grid(5, 4), NumericalError);
  CHECK_THROWS_AS(gauss_hermite_grid(4, 100), NumericalError);
}

TEST_CASE("quadrature matches monte carlo on degree <= 6 polynomials") {
  Eigen::MatrixXd c(3, 3);
  c << 2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5;
  const PsdMatrix cov(c);
  Eigen::VectorXd mean(3);
  mean << 0.2, -0.1, 0.4;
  auto f = [](const Eigen::VectorXd& z) {
    return std::pow(z(0), 3) * z(1) + std::pow(z(2), 2) - z(0) * z(1) * z(2) +
           std::pow(z(1), 6) * 0.01;
  };
  const QuadratureGrid g = gauss_hermite_grid(3, 10);
  const Eigen::MatrixXd l = cholesky_psd(cov);
  double q = 0.0;
  for (int s = 0; s < g.size(); ++s) q += g.weights(s) * f(mean + l * g.nodes.col(s));

  const int n = 400000;
  const Eigen::MatrixXd xs = sample_mvn(mean, cov, n, 11);
  double mc = 0, mc2 = 0;
  for (int s = 0; s < n; ++s) {
    const double v = f(xs.col(s));
    mc += v;
    mc2 += v * v;
  }
  mc /= n;
  const double se = std::sqrt((mc2 / n - mc * mc) / n);
  CHECK(std::abs(q - mc) < 4.0 * se);
}

TEST_CASE("inverse normal cdf: accuracy against bisection of erfc") {
  for (double u : {1e-9, 1e-4, 0.02, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-7}) {
    const double x = inverse_normal_cdf(u);
    const double back = 0.5 * std::erfc(-x / std::sqrt(2.0));
    CHECK(std::abs(back - u) < 1e-8 * std::max(u, 1.0 - u) + 1e-12);
  }
}

TEST_CASE("rng: normal moments sane and streams independent of split order") {
  Rng a = make_stream(99, "x", 1, 2);
  Rng b = make_stream(99, "x", 1, 2);
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c = make_stream(99, "x", 2, 1);
  bool differs = false;
  Rng a2 = make_stream(99, "x", 1, 2);
  for (int i = 0; i < 16; ++i) differs = differs || (a2.next_u64() != c.next_u64());
  CHECK(differs);

  Rng g(5);
  const int n = 200000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    m1 += x;
    m2 += x * x;
    m4 += x * x * x * x;
  }
  CHECK(std::abs(m1 / n) < 0.01);
  CHECK(m2 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(m4 / n == doctest::Approx(3.0).epsilon(0.05));
}
