#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sgdlim/models.hpp"
#include "sgdlim/numerics.hpp"

using namespace sgdlim;

namespace {

// test-only linear model psi(z) = z, used as an algebraic oracle
ProjectiveModel make_linear_model() {
  ProjectiveModel m;
  m.name = "linear";
  m.k_trained = 1;
  m.num_classes = 1;
  m.psi = [](std::span<const double> z, std::span<const double>, int) { return z[0]; };
  m.grad1 = [](std::span<const double>, std::span<const double>, int, std::span<double> g) {
    g[0] = 1.0;
  };
  return m;
}

}  // namespace

TEST_CASE("logistic: closed-form values") {
  const ProjectiveModel m = make_logistic(2, 0.0);
  const std::vector<double> w;
  CHECK(m.psi(std::vector<double>{0.0, 0.0}, w, 0) == doctest::Approx(std::log(2.0)));
  const double a = 0.7, b = -1.3;
  CHECK(m.psi(std::vector<double>{a, b}, w, 0) ==
        doctest::Approx(-a + std::log(std::exp(a) + std::exp(b))));
  std::vector<double> g(2);
  m.grad1(std::vector<double>{0.0, 0.0}, w, 0, g);
  CHECK(g[0] == doctest::Approx(-0.5));
  CHECK(g[1] == doctest::Approx(0.5));
}

TEST_CASE("logistic: large inputs stay finite (logsumexp)") {
  const ProjectiveModel m = make_logistic(2, 0.0);
  const std::vector<double> w;
  CHECK(std::isfinite(m.psi(std::vector<double>{800.0, -800.0}, w, 1)));
}

TEST_CASE("logistic: permutation symmetry of softmax") {
  const ProjectiveModel m = make_logistic(3, 0.0);
  const std::vector<double> w;
  const std::vector<double> z = {0.4, -1.2, 2.1};
  const std::vector<double> zp = {2.1, 0.4, -1.2};  // permutation pi: 2,0,1
  CHECK(m.psi(z, w, 1) == doctest::Approx(m.psi(zp, w, 2)));
}

TEST_CASE("two_layer: zero second layer gives log C independent of z") {
  const ProjectiveModel m = make_two_layer(2, 3, activation_tanh(), 0.0);
  const std::vector<double> w(m.k2, 0.0);
  for (double a : {0.0, 1.7, -4.0})
    CHECK(m.psi(std::vector<double>(m.z_dim(), a), w, 1) ==
          doctest::Approx(std::log(3.0)));
}

TEST_CASE("two_layer: tanh activation gives at most linear growth in w") {
  const ProjectiveModel m = make_two_layer(2, 2, activation_tanh(), 0.0);
  std::vector<double> w = {3.0, -2.0, 1.0, 0.5};
  double wl1 = 0.0;
  for (double v : w) wl1 += std::abs(v);
  for (double big : {50.0, 500.0}) {
    const double val = m.psi(std::vector<double>(4, big), w, 0);
    CHECK(std::abs(val) <= 2.0 * wl1 + std::log(2.0) + 1.0);
  }
}

TEST_CASE("multi_index: recovery point has zero loss") {
  const ProjectiveModel m = make_multi_index(link_he3_plus_he2());
  const std::vector<double> w;
  CHECK(m.psi(std::vector<double>{0.83, 0.83}, w, 0) == doctest::Approx(0.0));
}

TEST_CASE("multi_index: phase retrieval value") {
  const ProjectiveModel m = make_multi_index(link_square());
  const std::vector<double> w;
  CHECK(m.psi(std::vector<double>{2.0, 1.0}, w, 0) == doctest::Approx(9.0));
}

TEST_CASE("multi_index: he3+he2 value at (1,0)") {
  const ProjectiveModel m = make_multi_index(link_he3_plus_he2());
  const std::vector<double> w;
  // g(x) = x^3 - 3x + x^2, g(1) = -1, g(0) = 0
  CHECK(m.psi(std::vector<double>{1.0, 0.0}, w, 0) == doctest::Approx(1.0));
}

TEST_CASE("gradients match finite differences at 100 probes for the whole zoo") {
  const std::vector<ProjectiveModel> zoo = {
      make_logistic(2, 0.0),
      make_logistic(4, 0.2),
      make_two_layer(2, 2, activation_tanh(), 0.0),
      make_two_layer(3, 2, activation_sigmoid(), 0.1),
      make_two_layer(2, 3, activation_smoothed_relu(), 0.0),
      make_multi_index(link_square()),
      make_multi_index(link_he3_plus_he2()),
      make_multi_index(link_poly({1.0, -0.5, 0.0, 2.0}))};
  for (const auto& m : zoo) {
    CAPTURE(m.name);
    CHECK(gradient_fd_check(m, 100, 2024) <= 1e-5);
  }
}

TEST_CASE("full_gradient: pure regularizer gives 2 lambda theta") {
  ProjectiveModel m = make_zero_model(2, 1.0);
  ParameterState st;
  st.theta = Eigen::MatrixXd::Random(10, 2);
  st.w = Eigen::VectorXd(0);
  Datum datum;
  datum.x = Eigen::VectorXd::Random(10);
  datum.j = 0;
  datum.one_hot = Eigen::VectorXd::Ones(1);
  const ParameterGradient g = full_gradient(m, st, datum);
  CHECK((g.theta - 2.0 * st.theta).norm() == doctest::Approx(0.0));
}

TEST_CASE("full_gradient: linear loss gives the datum back") {
  const ProjectiveModel m = make_linear_model();
  ParameterState st;
  st.theta = Eigen::MatrixXd::Random(12, 1);
  st.w = Eigen::VectorXd(0);
  Datum datum;
  datum.x = Eigen::VectorXd::Random(12);
  datum.j = 0;
  datum.one_hot = Eigen::VectorXd::Ones(1);
  const ParameterGradient g = full_gradient(m, st, datum);
  CHECK((g.theta.col(0) - datum.x).norm() == doctest::Approx(0.0));
}

TEST_CASE("full_gradient: frozen columns receive zero gradient") {
  const ProjectiveModel m = make_multi_index(link_square());
  ParameterState st;
  st.theta = Eigen::MatrixXd::Random(20, 2);
  st.w = Eigen::VectorXd(0);
  Datum datum;
  datum.x = Eigen::VectorXd::Random(20);
  datum.j = 0;
  datum.one_hot = Eigen::VectorXd::Ones(1);
  const ParameterGradient g = full_gradient(m, st, datum);
  CHECK(g.theta.col(1).norm() == 0.0);
  CHECK(g.theta.col(0).norm() > 0.0);
}

TEST_CASE("full_gradient matches finite differences of the full loss") {
  const ProjectiveModel m = make_two_layer(2, 2, activation_tanh(), 0.3);
  const int d = 15;
  Rng rng(66);
  ParameterState st;
  st.theta = Eigen::MatrixXd(d, m.z_dim());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < m.z_dim(); ++j) st.theta(i, j) = 0.4 * rng.normal();
  st.w = Eigen::VectorXd(m.k2);
  for (int b = 0; b < m.k2; ++b) st.w(b) = 0.4 * rng.normal();
  Datum datum;
  datum.x = Eigen::VectorXd(d);
  for (int i = 0; i < d; ++i) datum.x(i) = rng.normal();
  datum.j = 1;
  datum.one_hot = Eigen::VectorXd::Zero(2);
  datum.one_hot(1) = 1.0;

  auto loss = [&](const ParameterState& s) {
    Eigen::VectorXd z = s.theta.transpose() * datum.x;
    return m.psi(std::span<const double>(z.data(), m.z_dim()),
                 std::span<const double>(s.w.data(), s.w.size()), 1) +
           m.lambda * s.theta.leftCols(m.k_trained).squaredNorm();
  };
  const ParameterGradient g = full_gradient(m, st, datum);
  const double h = 1e-6;
  for (int probe = 0; probe < 20; ++probe) {
    const int i = static_cast<int>(rng.next_u64() % d);
    const int j = static_cast<int>(rng.next_u64() % m.k_trained);
    ParameterState up = st, dn = st;
    up.theta(i, j) += h;
    dn.theta(i, j) -= h;
    const double fd = (loss(up) - loss(dn)) / (2.0 * h);
    CHECK(std::abs(fd - g.theta(i, j)) <=
          1e-5 * std::max(1.0, std::abs(g.theta(i, j))));
  }
  for (int b = 0; b < m.k2; ++b) {
    ParameterState up = st, dn = st;
    up.w(b) += h;
    dn.w(b) -= h;
    const double fd = (loss(up) - loss(dn)) / (2.0 * h);
    CHECK(std::abs(fd - g.w(b)) <= 1e-5 * std::max(1.0, std::abs(g.w(b))));
  }
}

TEST_CASE("full_gradient flags a non-finite derivative as blow-up") {
  ProjectiveModel m = make_linear_model();
  m.grad1 = [](std::span<const double>, std::span<const double>, int, std::span<double> g) {
    g[0] = std::numeric_limits<double>::infinity();
  };
  ParameterState st;
  st.theta = Eigen::MatrixXd::Ones(4, 1);
  st.w = Eigen::VectorXd(0);
  Datum datum;
  datum.x = Eigen::VectorXd::Ones(4);
  datum.j = 0;
  datum.one_hot = Eigen::VectorXd::Ones(1);
  CHECK_THROWS_AS(full_gradient(m, st, datum), NumericalError);
}

TEST_CASE("smoothed relu is the declared smoothing") {
  const Activation g = activation_smoothed_relu();
  CHECK(g.g(0.0) == doctest::Approx(0.05));  // eps/2 with eps = 0.1
  CHECK(g.g(5.0) == doctest::Approx(0.5 * (5.0 + std::sqrt(25.0 + 0.01))));
  CHECK(g.dg(0.0) == doctest::Approx(0.5));
}
