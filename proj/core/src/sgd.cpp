#include "sgdlim/sgd.hpp"

#include <cmath>

#include "sgdlim/numerics.hpp"
#include "sgdlim/parallel.hpp"

namespace sgdlim {

namespace {

long resolve_stride(const SgdConfig& cfg, int d) {
  if (cfg.record_stride > 0) return cfg.record_stride;
  return std::max<long>(1, d / 100);
}

bool finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

Trajectory run_sgd(const ProjectiveModel& model, const MixtureSpec& spec,
                   const ParameterState& init, const SgdConfig& cfg) {
  spec.validate();
  const int d = spec.d;
  const int kt = model.k_trained;
  const int kz = model.z_dim();
  if (init.theta.rows() != d || init.theta.cols() != kz)
    throw std::invalid_argument("run_sgd: init.theta shape mismatch");
  if (!init.theta.allFinite() || !init.w.allFinite())
    throw std::invalid_argument("run_sgd: init must be finite");
  if (cfg.c_lr <= 0.0) throw std::invalid_argument("run_sgd: c_lr must be positive");

  const double delta = cfg.c_lr / static_cast<double>(d);
  const long steps = static_cast<long>(std::ceil(cfg.total_time / delta));
  const long stride = resolve_stride(cfg, d);

  Rng rng = make_stream(cfg.master_seed, "sgd_data", static_cast<uint64_t>(cfg.replica));

  ParameterState st = init;
  Trajectory traj;
  traj.steps_planned = steps;

  const bool has_means = [&] {
    for (const auto& mu : spec.means)
      if (mu.squaredNorm() > 0.0) return true;
    return false;
  }();

  Eigen::VectorXd x(d);
  Eigen::VectorXd z(kz);
  std::vector<double> g1(kt), g2(model.k2);
  std::span<const double> wspan(st.w.data(), static_cast<std::size_t>(st.w.size()));

  double theta_sq = st.theta.leftCols(kt).squaredNorm() + st.w.squaredNorm() +
                    st.theta.rightCols(model.k_frozen).squaredNorm();

  auto record = [&](long step) {
    TrajectoryRecord rec;
    rec.step = step;
    rec.u = compute_summary(st, spec, model);
    rec.u.t = static_cast<double>(step) * delta;
    rec.deloc = deloc_report(st, kt);
    traj.records.push_back(std::move(rec));
  };

  record(0);
  if (traj.records.back().deloc.zeta_eff > cfg.zeta_exit) traj.exit_step_deloc = 0;

  long step = 0;
  while (step < steps && !traj.exit_step_r && !traj.exit_step_deloc && !traj.blew_up) {
    ++step;
    // fresh datum, never cached: X = mu_J + Y
    const int j = sample_class(spec, rng);
    spec.noise.fill_iid(std::span<double>(x.data(), static_cast<std::size_t>(d)), rng);
    if (has_means) x += spec.means[j];
    const int y = spec.labels[j];

    z.noalias() = st.theta.transpose() * x;
    model.grad1(std::span<const double>(z.data(), kz), wspan, y, g1);
    if (!finite(g1)) {
      traj.blew_up = true;
      break;
    }
    const double xsq = x.squaredNorm();
    const double decay = 1.0 - 2.0 * delta * model.lambda;
    // exact update of the tracked squared norm from the inner products
    double cross = 0.0, gsq = 0.0;
    for (int a = 0; a < kt; ++a) {
      cross += g1[a] * z(a);
      gsq += g1[a] * g1[a];
    }
    const double tr_sq = st.theta.leftCols(kt).squaredNorm();
    theta_sq += (decay * decay - 1.0) * tr_sq - 2.0 * decay * delta * cross +
                delta * delta * gsq * xsq;
    for (int a = 0; a < kt; ++a)
      st.theta.col(a) = decay * st.theta.col(a) - (delta * g1[a]) * x;
    if (model.k2 > 0) {
      model.grad2(std::span<const double>(z.data(), kz), wspan, y, g2);
      if (!finite(g2)) {
        traj.blew_up = true;
        break;
      }
      for (int b = 0; b < model.k2; ++b) {
        theta_sq += -2.0 * delta * g2[b] * st.w(b) + delta * delta * g2[b] * g2[b];
        st.w(b) -= delta * g2[b];
      }
    }

    if (theta_sq >= cfg.r_exit) {
      traj.exit_step_r = step;
      break;
    }
    if (step % stride == 0 || step == steps) {
      record(step);
      if (traj.records.back().deloc.zeta_eff > cfg.zeta_exit) traj.exit_step_deloc = step;
    }
  }
  traj.steps_run = step;
  if (traj.records.back().step != step) record(step);
  if (cfg.keep_final_state) traj.final_state = std::move(st);
  return traj;
}

namespace {

// shared accumulation for the oracle: per-sample canonical drift vector
struct OracleAccumulator {
  Eigen::VectorXd sum;
  Eigen::VectorXd sumsq;
  long n = 0;
  explicit OracleAccumulator(int m)
      : sum(Eigen::VectorXd::Zero(m)), sumsq(Eigen::VectorXd::Zero(m)) {}
  void add(const Eigen::VectorXd& v) {
    sum += v;
    sumsq += v.cwiseProduct(v);
    ++n;
  }
  void merge(const OracleAccumulator& o) {
    sum += o.sum;
    sumsq += o.sumsq;
    n += o.n;
  }
};

}  // namespace

DriftEstimate one_step_drift_oracle(const ProjectiveModel& model, const MixtureSpec& spec,
                                    const ParameterState& state, const SgdConfig& cfg,
                                    long n_samples, uint64_t seed) {
  spec.validate();
  if (n_samples < 1000)
    throw std::invalid_argument("one_step_drift_oracle: n_samples must be >= 1e3");
  const int d = spec.d;
  const int kt = model.k_trained;
  const int kz = model.z_dim();
  const int k = spec.num_classes();
  const double delta = cfg.c_lr / static_cast<double>(d);
  const double lam = model.lambda;

  const SummaryState u0 = compute_summary(state, spec, model);
  const SummaryLayout& lay = u0.layout;
  const auto pairs = lay.gram_pairs();
  const int m = lay.coord_count();
  const int npairs = static_cast<int>(pairs.size());

  const long block_size = 8192;
  const long blocks = (n_samples + block_size - 1) / block_size;
  std::vector<OracleAccumulator> acc(blocks, OracleAccumulator(m));

  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t blk) {
    Rng rng = make_stream(seed, "drift_oracle", blk);
    const long lo = static_cast<long>(blk) * block_size;
    const long hi = std::min<long>(lo + block_size, n_samples);
    Eigen::VectorXd x(d), zfull(lay.gram_dim());
    std::vector<double> g1(kt), g2(model.k2);
    Eigen::VectorXd sample(m);
    std::span<const double> wspan(state.w.data(), static_cast<std::size_t>(state.w.size()));
    for (long s = lo; s < hi; ++s) {
      const int j = sample_class(spec, rng);
      spec.noise.fill_iid(std::span<double>(x.data(), static_cast<std::size_t>(d)), rng);
      x += spec.means[j];
      const int y = spec.labels[j];
      // z over theta columns (trained + frozen) then the mean columns
      zfull.head(kz).noalias() = state.theta.transpose() * x;
      for (int a = 0; a < k; ++a) zfull(kz + a) = spec.means[a].dot(x);
      model.grad1(std::span<const double>(zfull.data(), kz), wspan, y, g1);
      const double xsq = x.squaredNorm();
      for (int pidx = 0; pidx < npairs; ++pidx) {
        const auto [i, jj] = pairs[pidx];
        const double gij = u0.gram(i, jj);
        double dcoord;
        if (lay.trained(jj)) {
          dcoord = -(g1[i] * zfull(jj) + g1[jj] * zfull(i) + 4.0 * lam * gij) +
                   delta * (g1[i] * g1[jj] * xsq +
                            2.0 * lam * (g1[i] * zfull(jj) + g1[jj] * zfull(i)) +
                            4.0 * lam * lam * gij);
        } else {
          dcoord = -(g1[i] * zfull(jj) + 2.0 * lam * gij);
        }
        sample(pidx) = dcoord;
      }
      if (model.k2 > 0) {
        model.grad2(std::span<const double>(zfull.data(), kz), wspan, y, g2);
        for (int b = 0; b < model.k2; ++b) sample(npairs + b) = -g2[b];
      }
      acc[blk].add(sample);
    }
  });

  OracleAccumulator total(m);
  for (const auto& a : acc) total.merge(a);

  DriftEstimate est;
  est.at = u0;
  est.n = total.n;
  est.drift = total.sum / static_cast<double>(total.n);
  est.se.resize(m);
  for (int i = 0; i < m; ++i) {
    const double mean = est.drift(i);
    const double var =
        std::max(0.0, total.sumsq(i) / static_cast<double>(total.n) - mean * mean);
    est.se(i) = std::sqrt(var / static_cast<double>(total.n));
  }
  return est;
}

namespace {

struct ScalarAcc {
  double sum = 0.0, sumsq = 0.0;
  long n = 0;
};

}  // namespace

GradProjectionEstimate grad_projection_oracle(const ProjectiveModel& model,
                                              const MixtureSpec& spec,
                                              const ParameterState& state,
                                              const Eigen::VectorXd& v, long n_samples,
                                              uint64_t seed) {
  spec.validate();
  const int d = spec.d;
  const int kt = model.k_trained;
  const int kz = model.z_dim();
  Eigen::VectorXd mu_v(spec.num_classes());
  for (int a = 0; a < spec.num_classes(); ++a) mu_v(a) = spec.means[a].dot(v);
  Eigen::VectorXd theta_v = state.theta.leftCols(kt).transpose() * v;

  const long block_size = 8192;
  const long blocks = (n_samples + block_size - 1) / block_size;
  std::vector<std::vector<ScalarAcc>> acc(blocks, std::vector<ScalarAcc>(kt));

  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t blk) {
    Rng rng = make_stream(seed, "grad_projection", blk);
    const long lo = static_cast<long>(blk) * block_size;
    const long hi = std::min<long>(lo + block_size, n_samples);
    Eigen::VectorXd x(d), z(kz);
    std::vector<double> g1(kt);
    std::span<const double> wspan(state.w.data(), static_cast<std::size_t>(state.w.size()));
    for (long s = lo; s < hi; ++s) {
      const int j = sample_class(spec, rng);
      spec.noise.fill_iid(std::span<double>(x.data(), static_cast<std::size_t>(d)), rng);
      x += spec.means[j];
      const double xv = x.dot(v);
      z.noalias() = state.theta.transpose() * x;
      model.grad1(std::span<const double>(z.data(), kz), wspan, spec.labels[j], g1);
      for (int a = 0; a < kt; ++a) {
        const double val = g1[a] * xv + 2.0 * model.lambda * theta_v(a);
        acc[blk][a].sum += val;
        acc[blk][a].sumsq += val * val;
        ++acc[blk][a].n;
      }
    }
  });

  GradProjectionEstimate est;
  est.value.resize(kt);
  est.se.resize(kt);
  for (int a = 0; a < kt; ++a) {
    ScalarAcc t;
    for (const auto& b : acc) {
      t.sum += b[a].sum;
      t.sumsq += b[a].sumsq;
      t.n += b[a].n;
    }
    const double mean = t.sum / static_cast<double>(t.n);
    const double var = std::max(0.0, t.sumsq / static_cast<double>(t.n) - mean * mean);
    est.value(a) = mean;
    est.se(a) = std::sqrt(var / static_cast<double>(t.n));
  }
  return est;
}

GradProjectionEstimate crn_grad_projection_gap(const ProjectiveModel& model,
                                               const MixtureSpec& spec_a,
                                               const MixtureSpec& spec_b,
                                               const ParameterState& state,
                                               const Eigen::VectorXd& v, long n_samples,
                                               uint64_t seed) {
  spec_a.validate();
  spec_b.validate();
  const int d = spec_a.d;
  const int kt = model.k_trained;
  const int kz = model.z_dim();

  const long block_size = 4096;
  const long blocks = (n_samples + block_size - 1) / block_size;
  std::vector<std::vector<ScalarAcc>> acc(blocks, std::vector<ScalarAcc>(kt));

  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t blk) {
    Rng rng = make_stream(seed, "crn_gap", blk);
    const long lo = static_cast<long>(blk) * block_size;
    const long hi = std::min<long>(lo + block_size, n_samples);
    Eigen::VectorXd xa(d), xb(d), za(kz), zb(kz);
    std::vector<double> g1a(kt), g1b(kt);
    std::span<const double> wspan(state.w.data(), static_cast<std::size_t>(state.w.size()));
    for (long s = lo; s < hi; ++s) {
      // same class draw and same uniforms feed both noise laws
      const int j = sample_class(spec_a, rng);
      for (int i = 0; i < d; ++i) {
        const double u = rng.uniform_open();
        xa(i) = spec_a.noise.from_uniform(u) + spec_a.means[j](i);
        xb(i) = spec_b.noise.from_uniform(u) + spec_b.means[j](i);
      }
      const double xav = xa.dot(v);
      const double xbv = xb.dot(v);
      za.noalias() = state.theta.transpose() * xa;
      zb.noalias() = state.theta.transpose() * xb;
      model.grad1(std::span<const double>(za.data(), kz), wspan, spec_a.labels[j], g1a);
      model.grad1(std::span<const double>(zb.data(), kz), wspan, spec_b.labels[j], g1b);
      for (int a = 0; a < kt; ++a) {
        const double val = (g1a[a] * xav - g1b[a] * xbv);
        acc[blk][a].sum += val;
        acc[blk][a].sumsq += val * val;
        ++acc[blk][a].n;
      }
    }
  });

  GradProjectionEstimate est;
  est.value.resize(kt);
  est.se.resize(kt);
  for (int a = 0; a < kt; ++a) {
    ScalarAcc t;
    for (const auto& b : acc) {
      t.sum += b[a].sum;
      t.sumsq += b[a].sumsq;
      t.n += b[a].n;
    }
    const double mean = t.sum / static_cast<double>(t.n);
    const double var = std::max(0.0, t.sumsq / static_cast<double>(t.n) - mean * mean);
    est.value(a) = mean;  // the 2*lambda*<theta_a, v> terms cancel in the difference
    est.se(a) = std::sqrt(var / static_cast<double>(t.n));
  }
  return est;
}

}  // namespace sgdlim
