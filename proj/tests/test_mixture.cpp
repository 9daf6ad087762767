#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sgdlim/mixture.hpp"

using namespace sgdlim;

namespace {

MixtureSpec two_class(int d, const NoiseDistribution& noise, double w0 = 0.5) {
  MixtureSpec spec;
  spec.d = d;
  spec.means.push_back(make_mean("flat", d, 1.0, 0));
  spec.means.push_back(make_mean("flat", d, -1.0, 0));
  spec.weights = Eigen::VectorXd(2);
  spec.weights << w0, 1.0 - w0;
  spec.labels = {0, 1};
  spec.noise = noise;
  return spec;
}

}  // namespace

TEST_CASE("sample_datum: single centered class is pure noise") {
  MixtureSpec spec;
  spec.d = 50;
  spec.means.push_back(make_mean("zero", 50, 0.0, 0));
  spec.weights = Eigen::VectorXd::Constant(1, 1.0);
  spec.labels = {0};
  spec.noise = NoiseDistribution::rademacher();
  Rng rng(3);
  const Datum datum = sample_datum(spec, rng);
  CHECK(datum.j == 0);
  for (int i = 0; i < 50; ++i) CHECK(std::abs(datum.x(i)) == 1.0);
  CHECK(datum.one_hot.sum() == 1.0);
}

TEST_CASE("sample_datum: degenerate weights always pick the first class") {
  MixtureSpec spec = two_class(20, NoiseDistribution::standard_gaussian(), 1.0);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) CHECK(sample_datum(spec, rng).j == 0);
}

TEST_CASE("sample_datum: class frequencies match the weights") {
  MixtureSpec spec = two_class(4, NoiseDistribution::standard_gaussian());
  Rng rng(5);
  int count0 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) count0 += sample_datum(spec, rng).j == 0 ? 1 : 0;
  CHECK(std::abs(double(count0) / n - 0.5) < 0.01);
}

TEST_CASE("conditional per-coordinate moments match mean and unit variance") {
  const int d = 32;
  for (const auto& noise :
       {NoiseDistribution::standard_gaussian(), NoiseDistribution::centered_exponential()}) {
    MixtureSpec spec = two_class(d, noise);
    Rng rng(6);
    const int n = 100000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
    int n0 = 0;
    for (int i = 0; i < n; ++i) {
      const Datum datum = sample_datum(spec, rng);
      if (datum.j != 0) continue;
      ++n0;
      sum += datum.x;
      sq += datum.x.cwiseProduct(datum.x);
    }
    const Eigen::VectorXd mean = sum / n0;
    CHECK((mean - spec.means[0]).cwiseAbs().maxCoeff() < 5.0 / std::sqrt(double(n0) / 2));
    const Eigen::VectorXd var = sq / n0 - mean.cwiseProduct(mean);
    CHECK((var - Eigen::VectorXd::Ones(d)).cwiseAbs().maxCoeff() <
          5.0 * std::sqrt(noise.moment(4) / (double(n0) / 2)));
  }
}

TEST_CASE("delocalization_of_means: flat, aligned, random-sign flat") {
  const int d = 100;
  MixtureSpec spec;
  spec.d = d;
  spec.means.push_back(make_mean("flat", d, 1.0, 0));         // perfectly flat
  spec.means.push_back(make_mean("coordinate_e1", d, 1.0, 0));  // aligned
  Eigen::VectorXd pm(d);
  Rng rng(8);
  for (int i = 0; i < d; ++i)
    pm(i) = ((rng.next_u64() & 1) ? 1.0 : -1.0) / std::sqrt(double(d));
  spec.means.push_back(pm);
  spec.weights = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  spec.labels = {0, 1, 2};

  const MeanDelocReport rep = delocalization_of_means(spec, 0.1);
  CHECK(rep.flags[0]);
  CHECK_FALSE(rep.flags[1]);
  CHECK(rep.flags[2]);
  CHECK(rep.linf[1] == 1.0);
  CHECK_FALSE(rep.all());

  CHECK_THROWS(delocalization_of_means(spec, 0.0));
  CHECK_THROWS(delocalization_of_means(spec, 0.5));
}

TEST_CASE("two specs differing only in noise share the first two conditional moments") {
  // the premise of the universality hypothesis: analytic, by construction
  MixtureSpec a = two_class(16, NoiseDistribution::rademacher());
  MixtureSpec b = two_class(16, NoiseDistribution::centered_exponential());
  for (int j = 0; j < 2; ++j) CHECK((a.means[j] - b.means[j]).norm() == 0.0);
  CHECK(a.noise.moment(1) == b.noise.moment(1));
  CHECK(a.noise.moment(2) == b.noise.moment(2));
  CHECK(a.noise.moment(4) != b.noise.moment(4));
}

TEST_CASE("validation names the offending field") {
  MixtureSpec spec = two_class(8, NoiseDistribution::standard_gaussian());
  spec.weights(0) = 0.6;  // sums to 1.1
  try {
    spec.validate();
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("mixture.weights") != std::string::npos);
  }
}

TEST_CASE("mean recipes") {
  const int d = 64;
  const Eigen::VectorXd flat = make_mean("flat", d, 2.0, 0);
  CHECK(flat.norm() == doctest::Approx(2.0));
  CHECK(flat.maxCoeff() == doctest::Approx(flat.minCoeff()));
  const Eigen::VectorXd rho = make_mean("rho_flat", d, 0.3, 0);
  CHECK(rho.norm() == doctest::Approx(0.3));
  const Eigen::VectorXd e1 = make_mean("coordinate_e1", d, 1.5, 0);
  CHECK(e1(0) == 1.5);
  CHECK(e1.tail(d - 1).norm() == 0.0);
  const Eigen::VectorXd ru = make_mean("random_unit", d, 1.0, 5);
  CHECK(ru.norm() == doctest::Approx(1.0));
  CHECK((ru - make_mean("random_unit", d, 1.0, 5)).norm() == 0.0);
  CHECK_THROWS(make_mean("diag", d, 1.0, 0));
}
