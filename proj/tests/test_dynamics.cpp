#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sgdlim/dynamics.hpp"
#include "sgdlim/experiments.hpp"

using namespace sgdlim;

namespace {

MixtureSpec::Moments single_class() {
  MixtureSpec::Moments mix;
  mix.weights = Eigen::VectorXd::Constant(1, 1.0);
  mix.labels = {0};
  return mix;
}

SummaryState state_for(const ProjectiveModel& model, int k_means, Eigen::MatrixXd gram,
                       Eigen::VectorXd w = Eigen::VectorXd(0)) {
  SummaryState u;
  u.layout = SummaryLayout{model.k_trained, model.k_frozen, k_means, model.k2};
  u.gram = std::move(gram);
  u.w = std::move(w);
  return u;
}

DriftEvaluatorConfig gh(int order = 10) {
  DriftEvaluatorConfig cfg;
  cfg.method = DriftMethod::GaussHermite;
  cfg.order = order;
  return cfg;
}

DriftEvaluatorConfig mc(long n, uint64_t seed = 1) {
  DriftEvaluatorConfig cfg;
  cfg.method = DriftMethod::MonteCarlo;
  cfg.n_samples = n;
  cfg.crn_seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("drift_h: pure regularizer gives -4 lambda G on trained entries") {
  const double lambda = 0.8;
  const ProjectiveModel model = make_zero_model(2, lambda);
  Eigen::MatrixXd g(3, 3);
  g << 1.0, 0.3, 0.2, 0.3, 0.7, 0.1, 0.2, 0.1, 1.0;  // 2 trained + 1 mean
  const SummaryState u = state_for(model, 1, g);
  const DriftResult res = drift_h(u, model, single_class(), 1.0, gh());
  CHECK(res.h(u.layout.gram_coord(0, 0)) == doctest::Approx(-4.0 * lambda * g(0, 0)));
  CHECK(res.h(u.layout.gram_coord(0, 1)) == doctest::Approx(-4.0 * lambda * g(0, 1)));
  CHECK(res.h(u.layout.gram_coord(1, 1)) == doctest::Approx(-4.0 * lambda * g(1, 1)));
  // trained-mean cross entries carry a single Leibniz term: -2 lambda
  CHECK(res.h(u.layout.gram_coord(0, 2)) == doctest::Approx(-2.0 * lambda * g(0, 2)));
}

TEST_CASE("drift_h: linear loss identities") {
  ProjectiveModel model;
  model.name = "linear";
  model.k_trained = 1;
  model.num_classes = 1;
  model.psi = [](std::span<const double> z, std::span<const double>, int) { return z[0]; };
  model.grad1 = [](std::span<const double>, std::span<const double>, int,
                   std::span<double> g) { g[0] = 1.0; };
  Eigen::MatrixXd g(2, 2);
  g << 0.9, 0.0, 0.0, 0.0;  // centered mean
  const SummaryState u = state_for(model, 1, g);
  const double c_lr = 1.7;
  const DriftResult res = drift_h(u, model, single_class(), c_lr, gh());
  // h(G_theta_theta) = -2 E[Z] + c_lr E[1] = c_lr for a centered class
  CHECK(res.h(u.layout.gram_coord(0, 0)) == doctest::Approx(c_lr).epsilon(1e-12));
  CHECK(res.h(u.layout.gram_coord(0, 1)) == doctest::Approx(0.0));
}

TEST_CASE("drift_h: monte carlo and quadrature agree within 4 SE (logistic)") {
  const ProjectiveModel model = make_logistic(2, 0.05);
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    // random PSD gram over 2 trained + 2 means with the +-mu structure
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 3);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) b(i, j) = 0.5 * rng.normal();
    b(2, 2) = 1.0;
    b(3, 2) = -1.0;  // means are +-mu
    Eigen::MatrixXd g = b * b.transpose();
    MixtureSpec::Moments mix;
    mix.weights = Eigen::VectorXd::Constant(2, 0.5);
    mix.labels = {0, 1};
    const SummaryState u = state_for(model, 2, g);
    const DriftResult a = drift_h(u, model, mix, 1.0, gh(10));
    const DriftResult m = drift_h(u, model, mix, 1.0, mc(1000000, 33 + trial));
    for (int i = 0; i < a.h.size(); ++i) {
      CAPTURE(trial);
      CAPTURE(i);
      CHECK(std::abs(a.h(i) - m.h(i)) <= 4.0 * m.se(i) + 1e-9);
    }
  }
}

TEST_CASE("drift_h: relabeling symmetry of the logistic drift") {
  const ProjectiveModel model = make_logistic(2, 0.0);
  Eigen::MatrixXd b(4, 4);
  Rng rng(4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) b(i, j) = 0.4 * rng.normal();
  Eigen::MatrixXd g = b * b.transpose();
  MixtureSpec::Moments mix;
  mix.weights = Eigen::VectorXd(2);
  mix.weights << 0.3, 0.7;
  mix.labels = {0, 1};

  // swap trained columns 0,1 together with means 0,1 and labels
  Eigen::PermutationMatrix<4> perm;
  perm.setIdentity();
  perm.applyTranspositionOnTheRight(0, 1);
  perm.applyTranspositionOnTheRight(2, 3);
  Eigen::MatrixXd gp = perm.transpose() * g * perm;
  // classes reordered and the label targets follow the swapped trained
  // columns, so the label map is the identity again
  MixtureSpec::Moments mixp;
  mixp.weights = Eigen::VectorXd(2);
  mixp.weights << 0.7, 0.3;
  mixp.labels = {0, 1};

  const SummaryState u = state_for(model, 2, g);
  const SummaryState up = state_for(model, 2, gp);
  const DriftResult h = drift_h(u, model, mix, 1.0, gh());
  const DriftResult hp = drift_h(up, model, mixp, 1.0, gh());
  // compare a permuted coordinate pair: drift of G_00 vs drift of G_11
  CHECK(h.h(u.layout.gram_coord(0, 0)) ==
        doctest::Approx(hp.h(up.layout.gram_coord(1, 1))).epsilon(1e-9));
  CHECK(h.h(u.layout.gram_coord(0, 2)) ==
        doctest::Approx(hp.h(up.layout.gram_coord(1, 3))).epsilon(1e-9));
}

TEST_CASE("drift_h with CRN is continuous along a path") {
  const ProjectiveModel model = make_logistic(2, 0.0);
  MixtureSpec::Moments mix;
  mix.weights = Eigen::VectorXd::Constant(2, 0.5);
  mix.labels = {0, 1};
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 3);
  Rng rng(9);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) b(i, j) = 0.5 * rng.normal();
  b(2, 2) = 1.0;
  b(3, 2) = -1.0;
  const Eigen::MatrixXd g = b * b.transpose();
  const SummaryState u = state_for(model, 2, g);
  SummaryState u2 = u;
  u2.gram(0, 0) += 1e-6;
  const DriftEvaluatorConfig cfg = mc(200000, 123);
  const DriftResult a = drift_h(u, model, mix, 1.0, cfg);
  const DriftResult c = drift_h(u2, model, mix, 1.0, cfg);
  CHECK((a.h - c.h).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("drift oracle agreement: logistic at a random delocalized state") {
  const int d = 1000;
  const ProjectiveModel model = make_logistic(2, 0.0);
  MixtureSpec spec;
  spec.d = d;
  spec.means.push_back(make_mean("flat", d, 1.0, 0));
  spec.means.push_back(make_mean("flat", d, -1.0, 0));
  spec.weights = Eigen::VectorXd::Constant(2, 0.5);
  spec.labels = {0, 1};
  spec.noise = NoiseDistribution::standard_gaussian();
  const ParameterState st = gaussian_init(model, d, 555);
  const SummaryState u = compute_summary(st, spec, model);

  SgdConfig sc;
  sc.c_lr = 1.0;
  const DriftEstimate oracle = one_step_drift_oracle(model, spec, st, sc, 100000, 9);
  const DriftResult h = drift_h(u, model, spec.moments(), sc.c_lr, gh(12));
  for (int i = 0; i < h.h.size(); ++i) {
    CAPTURE(u.layout.coord_name(i));
    CHECK(std::abs(h.h(i) - oracle.drift(i)) <= 4.0 * oracle.se(i) + 20.0 / d);
  }
}

TEST_CASE("solve_ode: zero drift keeps the state constant") {
  const ProjectiveModel model = make_zero_model(1, 0.0);
  Eigen::MatrixXd g(2, 2);
  g << 1.0, 0.1, 0.1, 0.5;
  const SummaryState u0 = state_for(model, 1, g);
  OdeConfig ode;
  ode.T = 3.0;
  const OdeSolution sol = solve_ode(u0, model, single_class(), 1.0, ode, gh());
  CHECK_FALSE(sol.blew_up);
  CHECK((sol.states.back().flatten() - u0.flatten()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("solve_ode: pure regularizer decays as exp(-4 lambda t) within 1e-8") {
  const double lambda = 0.5;
  const ProjectiveModel model = make_zero_model(1, lambda);
  Eigen::MatrixXd g(2, 2);
  g << 1.0, 0.2, 0.2, 0.4;
  const SummaryState u0 = state_for(model, 1, g);
  OdeConfig ode;
  ode.T = 5.0;
  ode.rtol = 1e-11;
  ode.atol = 1e-13;
  const OdeSolution sol = solve_ode(u0, model, single_class(), 1.0, ode, gh());
  for (std::size_t i = 0; i < sol.states.size(); ++i) {
    const double t = sol.times[i];
    CHECK(std::abs(sol.states[i].gram(0, 0) - std::exp(-4.0 * lambda * t) * g(0, 0)) <=
          1e-8);
    // the trained-mean cross entry decays at half the rate
    CHECK(std::abs(sol.states[i].gram(0, 1) - std::exp(-2.0 * lambda * t) * g(0, 1)) <=
          1e-8);
  }
}

TEST_CASE("solve_ode: he3+he2 from an informative start climbs toward recovery") {
  const ProjectiveModel model = make_multi_index(link_he3_plus_he2());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
  g(0, 0) = 0.5;
  g(1, 1) = 1.0;   // unit teacher
  g(0, 1) = g(1, 0) = 0.3;  // informative overlap
  const SummaryState u0 = state_for(model, 1, g);
  OdeConfig ode;
  ode.T = 6.0;
  const OdeSolution sol = solve_ode(u0, model, single_class(), 1e-3, ode, gh(12));
  CHECK_FALSE(sol.blew_up);
  const int m_idx = u0.layout.gram_coord(0, 1);
  double min_m = 1e300;
  for (const auto& s : sol.states) min_m = std::min(min_m, s.flatten()(m_idx));
  const double last = sol.states.back().flatten()(m_idx);
  CHECK(last > 0.95);      // m -> 1 on the recovery branch
  CHECK(min_m > 0.25);     // never loses the initial overlap
}

TEST_CASE("solve_ode: the noise pump at super-critical c_lr truncates with a flag") {
  const ProjectiveModel model = make_multi_index(link_he3_plus_he2());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
  g(0, 0) = 0.5;
  g(1, 1) = 1.0;
  g(0, 1) = g(1, 0) = 0.3;
  const SummaryState u0 = state_for(model, 1, g);
  OdeConfig ode;
  ode.T = 4.0;
  const OdeSolution sol = solve_ode(u0, model, single_class(), 0.005, ode, gh(12));
  CHECK(sol.blew_up);
}

TEST_CASE("solve_ode: halving dt changes the rk4 answer by < 1e-6") {
  // grid-convergence certificate on a smooth interior path (logistic)
  const ProjectiveModel model = make_logistic(2, 0.0);
  MixtureSpec::Moments mix;
  mix.weights = Eigen::VectorXd::Constant(2, 0.5);
  mix.labels = {0, 1};
  Eigen::MatrixXd b4 = Eigen::MatrixXd::Zero(4, 3);
  Rng rng(17);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) b4(i, j) = 0.5 * rng.normal();
  b4(2, 2) = 1.0;
  b4(3, 2) = -1.0;
  const SummaryState u0 = state_for(model, 2, b4 * b4.transpose());
  OdeConfig ode;
  ode.T = 2.0;
  ode.solver = OdeSolverKind::Rk4;
  ode.dt = 5e-3;
  const OdeSolution a = solve_ode(u0, model, mix, 1.0, ode, gh(10));
  ode.dt = 2.5e-3;
  const OdeSolution b = solve_ode(u0, model, mix, 1.0, ode, gh(10));
  const CurveDeviation dev =
      compare_trajectories(curve_from_ode(a), curve_from_ode(b), ode.T, 200);
  CHECK(dev.sup < 1e-6);
}

TEST_CASE("compare_trajectories: zero for identical curves, epsilon for offsets") {
  Curve a;
  for (int i = 0; i <= 10; ++i) {
    a.t.push_back(0.1 * i);
    Eigen::VectorXd v(2);
    v << std::sin(0.1 * i), std::cos(0.1 * i);
    a.u.push_back(v);
  }
  CHECK(compare_trajectories(a, a, 1.0).sup == 0.0);
  Curve b = a;
  for (auto& v : b.u) v(1) += 0.25;
  const CurveDeviation dev = compare_trajectories(a, b, 1.0);
  CHECK(dev.sup == doctest::Approx(0.25));
  CHECK(dev.per_coordinate(0) == doctest::Approx(0.0));

  Curve c = a;
  c.u.front() = Eigen::VectorXd::Zero(3);
  CHECK_THROWS(compare_trajectories(a, c, 1.0));
}

TEST_CASE("evaluator config validation") {
  DriftEvaluatorConfig c = mc(10);
  CHECK_THROWS(c.validate());
  c = gh(4);
  CHECK_THROWS(c.validate());
}
