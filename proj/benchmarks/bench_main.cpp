#include <benchmark/benchmark.h>

#include "sgdlim/dynamics.hpp"
#include "sgdlim/experiments.hpp"

using namespace sgdlim;

namespace {

MixtureSpec pm_mixture(int d, NoiseDistribution noise) {
  return make_pm_flat_mixture(d, 1.0, noise);
}

void BM_noise_fill(benchmark::State& state, NoiseDistribution dist) {
  Rng rng(1);
  std::vector<double> buf(8192);
  for (auto _ : state) {
    dist.fill_iid(buf, rng);
    benchmark::DoNotOptimize(buf.data());
  }
  state.SetItemsProcessed(state.iterations() * buf.size());
}

void BM_sgd_steps(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const ProjectiveModel model = make_logistic(2, 0.0);
  const MixtureSpec spec = pm_mixture(d, NoiseDistribution::standard_gaussian());
  const ParameterState init = gaussian_init(model, d, 7);
  for (auto _ : state) {
    SgdConfig cfg;
    cfg.c_lr = 1.0;
    cfg.total_time = 0.5;
    cfg.record_stride = 1000000;
    benchmark::DoNotOptimize(run_sgd(model, spec, init, cfg).steps_run);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(0.5 * d));
}

void BM_drift_gh(benchmark::State& state) {
  const ProjectiveModel model = make_logistic(2, 0.0);
  const MixtureSpec spec = pm_mixture(500, NoiseDistribution::standard_gaussian());
  const SummaryState u = compute_summary(gaussian_init(model, 500, 3), spec, model);
  DriftEvaluatorConfig cfg;
  cfg.method = DriftMethod::GaussHermite;
  cfg.order = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(drift_h(u, model, spec.moments(), 1.0, cfg).h.sum());
}

void BM_drift_mc(benchmark::State& state) {
  const ProjectiveModel model = make_logistic(2, 0.0);
  const MixtureSpec spec = pm_mixture(500, NoiseDistribution::standard_gaussian());
  const SummaryState u = compute_summary(gaussian_init(model, 500, 3), spec, model);
  DriftEvaluatorConfig cfg;
  cfg.method = DriftMethod::MonteCarlo;
  cfg.n_samples = state.range(0);
  for (auto _ : state)
    benchmark::DoNotOptimize(drift_h(u, model, spec.moments(), 1.0, cfg).h.sum());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_oracle(benchmark::State& state) {
  const int d = 1000;
  const ProjectiveModel model = make_logistic(2, 0.0);
  const MixtureSpec spec = pm_mixture(d, NoiseDistribution::standard_gaussian());
  const ParameterState st = gaussian_init(model, d, 11);
  SgdConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        one_step_drift_oracle(model, spec, st, cfg, state.range(0), 3).drift.sum());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_noise_fill, gaussian, NoiseDistribution::standard_gaussian());
BENCHMARK_CAPTURE(BM_noise_fill, rademacher, NoiseDistribution::rademacher());
BENCHMARK_CAPTURE(BM_noise_fill, exponential, NoiseDistribution::centered_exponential());
BENCHMARK(BM_sgd_steps)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_drift_gh)->Arg(8)->Arg(12);
BENCHMARK(BM_drift_mc)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_oracle)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
