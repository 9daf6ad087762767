#include "sgdlim/dynamics.hpp"

#include <cmath>

#include "sgdlim/parallel.hpp"

namespace sgdlim {

void DriftEvaluatorConfig::validate() const {
  if (method == DriftMethod::MonteCarlo && n_samples < 1000)
    throw std::invalid_argument("drift evaluator: n_samples must be >= 1e3");
  if (method == DriftMethod::GaussHermite && order < 6)
    throw std::invalid_argument("drift evaluator: order must be >= 6");
}

namespace {

// Rank-revealing factor of the clipped Gram matrix: G ~= F F^T with F of
// shape r x q, q = numerical rank.
Eigen::MatrixXd rank_factor(const Eigen::MatrixXd& gram, double* max_clip = nullptr) {
  PsdMatrix psd(gram);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (gram + gram.transpose()));
  const Eigen::VectorXd& ev = es.eigenvalues();
  if (max_clip) *max_clip = std::max(*max_clip, std::max(0.0, -ev.minCoeff()));
  const double tol = std::max(ev.maxCoeff(), 0.0) * 1e-12;
  int q = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > tol) ++q;
  Eigen::MatrixXd f(gram.rows(), std::max(q, 1));
  f.setZero();
  int col = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > tol) f.col(col++) = es.eigenvectors().col(i) * std::sqrt(ev(i));
  return f;
}

struct EvalWorkspace {
  Eigen::VectorXd z;
  std::vector<double> g1, g2;
};

// Accumulates the expectation terms for one standardized point xi shared
// across classes (deterministic class sum = lower variance + CRN).
void accumulate_point(const SummaryState& u, const ProjectiveModel& model,
                      const MixtureSpec::Moments& mix, double c_lr,
                      const Eigen::MatrixXd& factor, const Eigen::VectorXd& xi,
                      const std::vector<std::pair<int, int>>& pairs, EvalWorkspace& ws,
                      Eigen::VectorXd& out) {
  const SummaryLayout& lay = u.layout;
  const int kz = lay.k_trained + lay.k_frozen;
  const int kt = lay.k_trained;
  const int npairs = static_cast<int>(pairs.size());
  const Eigen::VectorXd base = factor * xi;
  out.setZero();
  for (int a = 0; a < mix.weights.size(); ++a) {
    const double pa = mix.weights(a);
    if (pa == 0.0) continue;
    ws.z = base + u.gram.col(kz + a);
    model.grad1(std::span<const double>(ws.z.data(), kz),
                std::span<const double>(u.w.data(), static_cast<std::size_t>(u.w.size())),
                mix.labels[a], ws.g1);
    for (int p = 0; p < npairs; ++p) {
      const auto [i, j] = pairs[p];
      double v = -ws.g1[i] * ws.z(j);
      if (lay.trained(j)) v += -ws.g1[j] * ws.z(i) + c_lr * ws.g1[i] * ws.g1[j];
      out(p) += pa * v;
    }
    if (model.k2 > 0) {
      model.grad2(std::span<const double>(ws.z.data(), kz),
                  std::span<const double>(u.w.data(), static_cast<std::size_t>(u.w.size())),
                  mix.labels[a], ws.g2);
      for (int b = 0; b < model.k2; ++b) out(npairs + b) += -pa * ws.g2[b];
    }
  }
  (void)kt;
}

void add_regularizer(const SummaryState& u, double lambda,
                     const std::vector<std::pair<int, int>>& pairs, Eigen::VectorXd& h) {
  if (lambda == 0.0) return;
  for (int p = 0; p < static_cast<int>(pairs.size()); ++p) {
    const auto [i, j] = pairs[p];
    const double mult = u.layout.trained(j) ? 4.0 : 2.0;
    h(p) -= mult * lambda * u.gram(i, j);
  }
}

}  // namespace

DriftResult drift_h(const SummaryState& u, const ProjectiveModel& model,
                    const MixtureSpec::Moments& mix, double c_lr,
                    const DriftEvaluatorConfig& cfg) {
  cfg.validate();
  if (mix.weights.size() != static_cast<long>(mix.labels.size()))
    throw std::invalid_argument("drift_h: mixture weights/labels mismatch");
  if (u.layout.k_means != mix.weights.size())
    throw std::invalid_argument("drift_h: layout does not match mixture");

  const auto pairs = u.layout.gram_pairs();
  const int m = u.layout.coord_count();

  DriftResult res;
  res.h = Eigen::VectorXd::Zero(m);
  res.se = Eigen::VectorXd::Zero(m);

  if (cfg.method == DriftMethod::GaussHermite) {
    // rank-reduced factor keeps the tensor grid at the numerical rank
    const Eigen::MatrixXd factor = rank_factor(u.gram);
    const int q = static_cast<int>(factor.cols());
    if (q > 4)
      throw NumericalError(
          "drift_h: Gram rank exceeds 4; tensor quadrature infeasible, use Monte Carlo");
    const QuadratureGrid grid = gauss_hermite_grid(q, cfg.order);
    EvalWorkspace ws;
    ws.g1.resize(model.k_trained);
    ws.g2.resize(model.k2);
    Eigen::VectorXd point(m);
    for (int s = 0; s < grid.size(); ++s) {
      accumulate_point(u, model, mix, c_lr, factor, grid.nodes.col(s), pairs, ws, point);
      res.h += grid.weights(s) * point;
    }
  } else {
    // the Cholesky factor of the clipped Gram matrix is continuous in u, so
    // with a fixed CRN seed the Monte Carlo estimate is a continuous
    // function along an ODE path (an eigenvector factor is not: degenerate
    // spectra rotate the basis and re-mix the common normals)
    const Eigen::MatrixXd factor = cholesky_psd(PsdMatrix(u.gram));
    const int q = static_cast<int>(factor.cols());
    const long n = cfg.n_samples;
    const long block_size = 16384;
    const long blocks = (n + block_size - 1) / block_size;
    std::vector<Eigen::VectorXd> bsum(blocks), bsq(blocks);
    parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t blk) {
      Rng rng = make_stream(cfg.crn_seed, "drift_h_mc", blk);
      const long lo = static_cast<long>(blk) * block_size;
      const long hi = std::min<long>(lo + block_size, n);
      EvalWorkspace ws;
      ws.g1.resize(model.k_trained);
      ws.g2.resize(model.k2);
      Eigen::VectorXd xi(q), point(m);
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(m), sq = Eigen::VectorXd::Zero(m);
      for (long s = lo; s < hi; ++s) {
        for (int i = 0; i < q; ++i) xi(i) = rng.normal();
        accumulate_point(u, model, mix, c_lr, factor, xi, pairs, ws, point);
        sum += point;
        sq += point.cwiseProduct(point);
      }
      bsum[blk] = sum;
      bsq[blk] = sq;
    });
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(m), sq = Eigen::VectorXd::Zero(m);
    for (long b = 0; b < blocks; ++b) {
      sum += bsum[b];
      sq += bsq[b];
    }
    res.h = sum / static_cast<double>(n);
    for (int i = 0; i < m; ++i) {
      const double var =
          std::max(0.0, sq(i) / static_cast<double>(n) - res.h(i) * res.h(i));
      res.se(i) = std::sqrt(var / static_cast<double>(n));
    }
  }

  add_regularizer(u, model.lambda, pairs, res.h);
  return res;
}

namespace {

// PSD-project the Gram block of a state and restore the entries that are
// constants of the motion (anything not involving a trained column).
SummaryState project_state(const SummaryState& s, const SummaryState& reference,
                           double* max_clip) {
  if (!s.gram.allFinite() || !s.w.allFinite())
    throw NumericalError("solve_ode: state left the finite range (blow-up)");
  SummaryState out = s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s.gram + s.gram.transpose()));
  const double lo = es.eigenvalues().minCoeff();
  if (lo < 0.0) {
    if (max_clip) *max_clip = std::max(*max_clip, -lo);
    out.gram = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
               es.eigenvectors().transpose();
  }
  const int kt = s.layout.k_trained;
  const int r = s.layout.gram_dim();
  for (int i = kt; i < r; ++i)
    for (int j = kt; j < r; ++j) out.gram(i, j) = reference.gram(i, j);
  out.gram = 0.5 * (out.gram + out.gram.transpose()).eval();
  return out;
}

}  // namespace

OdeSolution solve_ode(const SummaryState& u0, const ProjectiveModel& model,
                      const MixtureSpec::Moments& mix, double c_lr, const OdeConfig& ode,
                      const DriftEvaluatorConfig& drift_cfg) {
  OdeSolution sol;
  SummaryState state = project_state(u0, u0, &sol.max_psd_clip);
  state.t = 0.0;

  auto rhs = [&](const SummaryState& s) -> Eigen::VectorXd {
    return drift_h(s, model, mix, c_lr, drift_cfg).h;
  };
  auto step_state = [&](const SummaryState& s, const Eigen::VectorXd& du) -> SummaryState {
    SummaryState n = s.with_coords(s.flatten() + du);
    return project_state(n, u0, &sol.max_psd_clip);
  };

  sol.times.push_back(0.0);
  sol.states.push_back(state);

  const double T = ode.T;
  double t = 0.0;
  double dt = std::min(ode.dt, T);

  if (ode.solver == OdeSolverKind::Rk4) {
    while (t < T && !sol.blew_up) {
      const double h = std::min(dt, T - t);
      try {
        const Eigen::VectorXd k1 = rhs(state);
        const Eigen::VectorXd k2 = rhs(step_state(state, 0.5 * h * k1));
        const Eigen::VectorXd k3 = rhs(step_state(state, 0.5 * h * k2));
        const Eigen::VectorXd k4 = rhs(step_state(state, h * k3));
        state = step_state(state, (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
      } catch (const NumericalError&) {
        sol.blew_up = true;
        break;
      }
      t += h;
      state.t = t;
      ++sol.steps;
      sol.times.push_back(t);
      sol.states.push_back(state);
      if (state.flatten().cwiseAbs().maxCoeff() > ode.blowup_norm) sol.blew_up = true;
    }
    return sol;
  }

  // Dormand-Prince 5(4)
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                      e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                      e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
  (void)c2;
  (void)c3;
  (void)c4;
  (void)c5;

  Eigen::VectorXd k1 = rhs(state);
  while (t < T && !sol.blew_up) {
    const double h = std::min(dt, T - t);
    double err = 0.0;
    SummaryState next = state;
    Eigen::VectorXd k7;
    bool stage_failed = false;
    try {
      const Eigen::VectorXd k2 = rhs(step_state(state, h * a21 * k1));
      const Eigen::VectorXd k3 = rhs(step_state(state, h * (a31 * k1 + a32 * k2)));
      const Eigen::VectorXd k4 =
          rhs(step_state(state, h * (a41 * k1 + a42 * k2 + a43 * k3)));
      const Eigen::VectorXd k5 =
          rhs(step_state(state, h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
      const Eigen::VectorXd k6 = rhs(
          step_state(state, h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
      const Eigen::VectorXd du5 = h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      next = step_state(state, du5);
      k7 = rhs(next);
      const Eigen::VectorXd err_vec =
          h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const Eigen::VectorXd cur = state.flatten();
      for (int i = 0; i < cur.size(); ++i) {
        const double scale = ode.atol + ode.rtol * std::max(std::abs(cur(i)),
                                                            std::abs(cur(i) + du5(i)));
        err = std::max(err, std::abs(err_vec(i)) / scale);
      }
      if (!std::isfinite(err)) stage_failed = true;
    } catch (const NumericalError&) {
      stage_failed = true;
    }
    if (stage_failed) {
      // treat as a rejected step with a large error and retry smaller
      ++sol.rejected_steps;
      dt = 0.25 * h;
      if (dt < 1e-14 * std::max(1.0, T)) {
        sol.blew_up = true;
        break;
      }
      continue;
    }
    if (err <= 1.0) {
      state = next;
      t += h;
      state.t = t;
      k1 = k7;  // FSAL
      ++sol.steps;
      sol.times.push_back(t);
      sol.states.push_back(state);
      if (state.flatten().cwiseAbs().maxCoeff() > ode.blowup_norm) sol.blew_up = true;
    } else {
      ++sol.rejected_steps;
    }
    const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-12), -0.2), 0.2, 5.0);
    dt = std::min(h * fac, T);
    if (dt < 1e-14 * std::max(1.0, T)) {
      sol.blew_up = true;  // step size underflow
      break;
    }
    if (sol.steps + sol.rejected_steps > 2000000)
      throw NumericalError("solve_ode: step budget exhausted");
  }
  return sol;
}

Eigen::VectorXd Curve::at(double time) const {
  if (t.empty()) throw std::invalid_argument("Curve::at: empty curve");
  if (time <= t.front()) return u.front();
  if (time >= t.back()) return u.back();
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t hi = static_cast<std::size_t>(it - t.begin());
  const std::size_t lo = hi - 1;
  const double span = t[hi] - t[lo];
  const double w = span > 0.0 ? (time - t[lo]) / span : 0.0;
  return (1.0 - w) * u[lo] + w * u[hi];
}

Curve curve_from_trajectory(const Trajectory& traj, double delta) {
  Curve c;
  for (const auto& rec : traj.records) {
    c.t.push_back(static_cast<double>(rec.step) * delta);
    c.u.push_back(rec.u.flatten());
  }
  return c;
}

Curve curve_from_ode(const OdeSolution& sol) {
  Curve c;
  for (std::size_t i = 0; i < sol.states.size(); ++i) {
    c.t.push_back(sol.times[i]);
    c.u.push_back(sol.states[i].flatten());
  }
  return c;
}

Curve mean_curve(const std::vector<Curve>& curves, double T, int grid_points) {
  if (curves.empty()) throw std::invalid_argument("mean_curve: no curves");
  Curve out;
  for (int g = 0; g < grid_points; ++g) {
    const double time = T * static_cast<double>(g) / (grid_points - 1);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(curves.front().coords());
    for (const auto& c : curves) acc += c.at(time);
    out.t.push_back(time);
    out.u.push_back(acc / static_cast<double>(curves.size()));
  }
  return out;
}

CurveDeviation compare_trajectories(const Curve& a, const Curve& b, double T,
                                    int grid_points) {
  if (a.coords() != b.coords())
    throw std::invalid_argument("compare_trajectories: coordinate layouts do not match");
  CurveDeviation dev;
  dev.per_coordinate = Eigen::VectorXd::Zero(a.coords());
  for (int g = 0; g < grid_points; ++g) {
    const double time = T * static_cast<double>(g) / (grid_points - 1);
    const Eigen::VectorXd diff = (a.at(time) - b.at(time)).cwiseAbs();
    dev.per_coordinate = dev.per_coordinate.cwiseMax(diff);
  }
  dev.sup = dev.per_coordinate.size() ? dev.per_coordinate.maxCoeff() : 0.0;
  return dev;
}

}  // namespace sgdlim
