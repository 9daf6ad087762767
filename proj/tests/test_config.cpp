#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sgdlim/config.hpp"

using namespace sgdlim;

TEST_CASE("minimal logistic config fills the documented defaults") {
  const RunConfig cfg = parse_config_text(R"({"model": {"type": "logistic", "k1": 2}})");
  CHECK(cfg.sgd.c_lr == 1.0);
  CHECK(cfg.sgd.T == 5.0);
  CHECK(cfg.sgd.replicas == 20);
  CHECK(cfg.sgd.record_stride == 0);  // resolved to d/100 at run time
  CHECK(cfg.master_seed == 1);
  const ProjectiveModel model = build_model(cfg);
  CHECK(model.k_trained == 2);
  const MixtureSpec spec = build_mixture(cfg, model);
  CHECK(spec.num_classes() == 2);  // default +-flat means
  CHECK(spec.means[0].norm() == doctest::Approx(1.0));
  CHECK((spec.means[0] + spec.means[1]).norm() == doctest::Approx(0.0));
}

TEST_CASE("round trip: load -> echo -> load is idempotent") {
  const std::string text = R"({
    "run_id": "abc", "master_seed": 42,
    "model": {"type": "multi_index", "link": "he3_he2", "rho": 0.2},
    "mixture": {"d": 512, "noise": "centered_exponential",
                "means": [{"recipe": "zero"}]},
    "sgd": {"c_lr": 0.05, "T": 2.0, "replicas": 3},
    "evaluator": {"method": "gauss_hermite", "order": 12}
  })";
  const RunConfig a = parse_config_text(text);
  const RunConfig b = parse_config_text(a.effective_json());
  CHECK(a.effective_json() == b.effective_json());
  CHECK(b.model.rho == 0.2);
  CHECK(b.mixture.d == 512);
  CHECK(b.sgd.c_lr == 0.05);
}

TEST_CASE("unknown keys are rejected with the offending path") {
  try {
    parse_config_text(R"({"model": {"type": "logistic", "k_one": 2}})");
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.k_one") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text(R"({"mood": "good"})"), ConfigError);
}

TEST_CASE("bad weights are rejected naming the field") {
  const std::string text = R"({
    "model": {"type": "logistic", "k1": 2},
    "mixture": {"d": 64, "weights": [0.6, 0.6],
                "means": [{"recipe": "flat"}, {"recipe": "flat", "scale": -1.0}]}
  })";
  const RunConfig cfg = parse_config_text(text);
  try {
    build_mixture(cfg, build_model(cfg));
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("mixture.weights") != std::string::npos);
  }
}

TEST_CASE("unknown distribution names are rejected at parse time") {
  CHECK_THROWS_AS(
      parse_config_text(R"({"mixture": {"d": 8, "noise": "levy_flight"}})"),
      ConfigError);
}

TEST_CASE("malformed json is a config error") {
  CHECK_THROWS_AS(parse_config_text("{"), ConfigError);
}

TEST_CASE("evaluator and ode enums validated") {
  CHECK_THROWS_AS(parse_config_text(R"({"evaluator": {"method": "simpson"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"ode": {"solver": "euler"}})"), ConfigError);
}

TEST_CASE("multi_index builders attach the frozen teacher column") {
  const RunConfig cfg = parse_config_text(R"({
    "model": {"type": "multi_index", "link": "square", "rho": 0.3},
    "mixture": {"d": 256, "means": [{"recipe": "zero"}]}
  })");
  const ProjectiveModel model = build_model(cfg);
  const MixtureSpec spec = build_mixture(cfg, model);
  const ParameterState st = build_init(cfg, model, spec, 0);
  CHECK(st.theta.cols() == 2);
  CHECK(st.theta.col(1).norm() == doctest::Approx(0.3));
  // trained column is a gaussian init at scale 1/sqrt(d)
  CHECK(st.theta.col(0).norm() == doctest::Approx(1.0).epsilon(0.2));
}
