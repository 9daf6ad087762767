#include "sgdlim/fluctuations.hpp"

#include <cmath>
#include <sstream>

#include "sgdlim/parallel.hpp"

namespace sgdlim {

namespace {

std::vector<int> resolve_slice(const ProjectiveModel& model, const FixedPointConfig& cfg,
                               int gram_dim) {
  if (!cfg.slice.empty()) return cfg.slice;
  if (cfg.use_model_slice && model.uninformative_slice)
    return model.uninformative_slice(gram_dim);
  return {};
}

std::vector<int> free_coords(int m, const std::vector<int>& pinned) {
  std::vector<bool> is_pinned(m, false);
  for (int c : pinned) is_pinned[c] = true;
  std::vector<int> free;
  for (int i = 0; i < m; ++i)
    if (!is_pinned[i]) free.push_back(i);
  return free;
}

// clip the Gram block back onto the PSD cone, keeping constants
SummaryState psd_fix(const SummaryState& s, const SummaryState& reference) {
  SummaryState out = s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s.gram + s.gram.transpose()));
  if (es.eigenvalues().minCoeff() < 0.0)
    out.gram = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
               es.eigenvectors().transpose();
  const int kt = s.layout.k_trained;
  const int r = s.layout.gram_dim();
  for (int i = kt; i < r; ++i)
    for (int j = kt; j < r; ++j) out.gram(i, j) = reference.gram(i, j);
  out.gram = 0.5 * (out.gram + out.gram.transpose()).eval();
  return out;
}

double residual_norm(const Eigen::VectorXd& h, const std::vector<int>& coords) {
  double r = 0.0;
  for (int c : coords) r = std::max(r, std::abs(h(c)));
  return r;
}

}  // namespace

Eigen::MatrixXd jacobian_h(const SummaryState& u_star, const ProjectiveModel& model,
                           const MixtureSpec::Moments& mix, double c_lr,
                           const DriftEvaluatorConfig& drift_cfg, double fd_step_rel,
                           double fd_step_floor) {
  const int m = u_star.layout.coord_count();
  const Eigen::VectorXd base = u_star.flatten();
  Eigen::MatrixXd jac(m, m);
  std::vector<Eigen::VectorXd> cols(m);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t c) {
    const double step = std::max(fd_step_rel * std::abs(base(c)), fd_step_floor);
    Eigen::VectorXd up = base, dn = base;
    up(c) += step;
    dn(c) -= step;
    const SummaryState su = psd_fix(u_star.with_coords(up), u_star);
    const SummaryState sd = psd_fix(u_star.with_coords(dn), u_star);
    const double realized = su.flatten()(c) - sd.flatten()(c);
    if (std::abs(realized) < 1e-300) {
      // degenerate direction: one-sided from the base point
      const Eigen::VectorXd h0 = drift_h(u_star, model, mix, c_lr, drift_cfg).h;
      const Eigen::VectorXd h1 = drift_h(su, model, mix, c_lr, drift_cfg).h;
      const double d1 = su.flatten()(c) - base(c);
      cols[c] = d1 != 0.0 ? ((h1 - h0) / d1).eval() : Eigen::VectorXd::Zero(m).eval();
      return;
    }
    const Eigen::VectorXd hu = drift_h(su, model, mix, c_lr, drift_cfg).h;
    const Eigen::VectorXd hd = drift_h(sd, model, mix, c_lr, drift_cfg).h;
    cols[c] = (hu - hd) / realized;
  });
  for (int c = 0; c < m; ++c) jac.col(c) = cols[c];
  return jac;
}

FixedPoint fixed_point_by_newton(const SummaryState& u_guess, const ProjectiveModel& model,
                                 const MixtureSpec::Moments& mix, double c_lr,
                                 const DriftEvaluatorConfig& drift_cfg,
                                 const FixedPointConfig& cfg) {
  const int m = u_guess.layout.coord_count();
  const auto pinned = resolve_slice(model, cfg, u_guess.layout.gram_dim());
  const auto free = free_coords(m, pinned);
  const int nf = static_cast<int>(free.size());

  SummaryState u = psd_fix(u_guess, u_guess);
  FixedPoint fp;
  fp.u_star = u;
  fp.residual = residual_norm(drift_h(u, model, mix, c_lr, drift_cfg).h, free);

  for (int it = 0; it < cfg.max_iterations; ++it) {
    const Eigen::VectorXd h = drift_h(u, model, mix, c_lr, drift_cfg).h;
    const double res = residual_norm(h, free);
    if (res < fp.residual) {
      fp.residual = res;
      fp.u_star = u;
    }
    fp.iterations = it;
    if (res < cfg.tol) {
      fp.converged = true;
      break;
    }
    const Eigen::MatrixXd jac = jacobian_h(u, model, mix, c_lr, drift_cfg);
    Eigen::MatrixXd jf(nf, nf);
    Eigen::VectorXd hf(nf);
    for (int a = 0; a < nf; ++a) {
      hf(a) = h(free[a]);
      for (int b = 0; b < nf; ++b) jf(a, b) = jac(free[a], free[b]);
    }
    Eigen::VectorXd delta = jf.fullPivLu().solve(-hf);
    if (!delta.allFinite()) break;
    // backtracking line search on the residual
    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      Eigen::VectorXd coords = u.flatten();
      for (int a = 0; a < nf; ++a) coords(free[a]) += alpha * delta(a);
      SummaryState trial = psd_fix(u.with_coords(coords), u_guess);
      const double rtrial =
          residual_norm(drift_h(trial, model, mix, c_lr, drift_cfg).h, free);
      if (rtrial < res) {
        u = trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // stalled
  }
  if (!fp.converged) {
    const double res = residual_norm(drift_h(fp.u_star, model, mix, c_lr, drift_cfg).h, free);
    fp.residual = res;
    fp.converged = res < cfg.tol;
  }
  if (fp.converged) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(
        jacobian_h(fp.u_star, model, mix, c_lr, drift_cfg));
    fp.stability = es.eigenvalues();
  }
  return fp;
}

FixedPoint fixed_point_by_integration(const SummaryState& u_guess,
                                      const ProjectiveModel& model,
                                      const MixtureSpec::Moments& mix, double c_lr,
                                      const DriftEvaluatorConfig& drift_cfg,
                                      const FixedPointConfig& cfg) {
  const int m = u_guess.layout.coord_count();
  const auto pinned = resolve_slice(model, cfg, u_guess.layout.gram_dim());
  const auto free = free_coords(m, pinned);

  SummaryState u = psd_fix(u_guess, u_guess);
  FixedPoint fp;
  fp.u_star = u;
  fp.residual = std::numeric_limits<double>::infinity();

  // slice-restricted heun steps with a crude adaptive step size
  double t = 0.0;
  double dt = 1e-3;
  int iters = 0;
  while (t < cfg.integrate_t_max) {
    Eigen::VectorXd h = drift_h(u, model, mix, c_lr, drift_cfg).h;
    for (int c : pinned) h(c) = 0.0;
    const double res = residual_norm(h, free);
    if (res < fp.residual) {
      fp.residual = res;
      fp.u_star = u;
    }
    if (res < cfg.tol) {
      fp.converged = true;
      break;
    }
    SummaryState pred = psd_fix(u.with_coords(u.flatten() + dt * h), u_guess);
    Eigen::VectorXd h2 = drift_h(pred, model, mix, c_lr, drift_cfg).h;
    for (int c : pinned) h2(c) = 0.0;
    SummaryState corr =
        psd_fix(u.with_coords(u.flatten() + 0.5 * dt * (h + h2)), u_guess);
    const double change = (corr.flatten() - u.flatten()).cwiseAbs().maxCoeff();
    u = corr;
    t += dt;
    ++iters;
    if (u.flatten().cwiseAbs().maxCoeff() > 1e6) break;  // divergence: no fixed point here
    // grow the step while the dynamics contracts smoothly
    dt = std::clamp(change < 1e-4 ? dt * 1.3 : dt * 0.8, 1e-4, 0.25);
    if (iters > 2000000) break;
  }
  fp.iterations = iters;
  if (fp.converged) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(
        jacobian_h(fp.u_star, model, mix, c_lr, drift_cfg));
    fp.stability = es.eigenvalues();
  }
  return fp;
}

FixedPoint find_fixed_point(const SummaryState& u_guess, const ProjectiveModel& model,
                            const MixtureSpec::Moments& mix, double c_lr,
                            const DriftEvaluatorConfig& drift_cfg,
                            const FixedPointConfig& cfg) {
  FixedPoint fp = fixed_point_by_newton(u_guess, model, mix, c_lr, drift_cfg, cfg);
  if (fp.converged) return fp;
  FixedPoint fi = fixed_point_by_integration(u_guess, model, mix, c_lr, drift_cfg, cfg);
  if (fi.converged) {
    // polish the integration answer
    FixedPoint polished = fixed_point_by_newton(fi.u_star, model, mix, c_lr, drift_cfg, cfg);
    return polished.converged && polished.residual <= fi.residual ? polished : fi;
  }
  return fp.residual <= fi.residual ? fp : fi;
}

VolatilityResult volatility_sigma(const SummaryState& u_star, const ProjectiveModel& model,
                                  const MixtureSpec::Moments& mix, double c_lr,
                                  long n_samples, uint64_t seed) {
  const SummaryLayout& lay = u_star.layout;
  const auto pairs = lay.gram_pairs();
  const int npairs = static_cast<int>(pairs.size());
  const int m = lay.coord_count();
  const int kz = lay.k_trained + lay.k_frozen;

  PsdMatrix psd(u_star.gram);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(psd.clipped());
  const double tol = std::max(0.0, es.eigenvalues().maxCoeff()) * 1e-12;
  int q = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > tol) ++q;
  Eigen::MatrixXd factor(lay.gram_dim(), std::max(q, 1));
  factor.setZero();
  int col = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > tol)
      factor.col(col++) = es.eigenvectors().col(i) * std::sqrt(es.eigenvalues()(i));

  const long block_size = 16384;
  const long blocks = (n_samples + block_size - 1) / block_size;
  struct Acc {
    Eigen::VectorXd sum;
    Eigen::MatrixXd outer;
    Eigen::VectorXd sq;
    long n = 0;
  };
  std::vector<Acc> acc(blocks);

  // class sampling needs cumulative weights
  Eigen::VectorXd cum(mix.weights.size());
  double run = 0.0;
  for (int a = 0; a < mix.weights.size(); ++a) {
    run += mix.weights(a);
    cum(a) = run;
  }

  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t blk) {
    Rng rng = make_stream(seed, "volatility", blk);
    Acc& A = acc[blk];
    A.sum = Eigen::VectorXd::Zero(m);
    A.sq = Eigen::VectorXd::Zero(m);
    A.outer = Eigen::MatrixXd::Zero(m, m);
    const long lo = static_cast<long>(blk) * block_size;
    const long hi = std::min<long>(lo + block_size, n_samples);
    Eigen::VectorXd xi(factor.cols()), z(lay.gram_dim()), s(m);
    std::vector<double> g1(model.k_trained), g2(model.k2);
    for (long it = lo; it < hi; ++it) {
      const double u = rng.uniform();
      int a = 0;
      while (a + 1 < cum.size() && u >= cum(a)) ++a;
      for (int i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
      z = factor * xi + u_star.gram.col(kz + a);
      model.grad1(std::span<const double>(z.data(), kz),
                  std::span<const double>(u_star.w.data(),
                                          static_cast<std::size_t>(u_star.w.size())),
                  mix.labels[a], g1);
      for (int p = 0; p < npairs; ++p) {
        const auto [i, j] = pairs[p];
        double v = g1[i] * z(j);
        if (lay.trained(j)) v += g1[j] * z(i);
        s(p) = v;
      }
      if (model.k2 > 0) {
        model.grad2(std::span<const double>(z.data(), kz),
                    std::span<const double>(u_star.w.data(),
                                            static_cast<std::size_t>(u_star.w.size())),
                    mix.labels[a], g2);
        for (int b = 0; b < model.k2; ++b) s(npairs + b) = g2[b];
      }
      A.sum += s;
      A.sq += s.cwiseProduct(s).cwiseProduct(s).cwiseProduct(s);  // for diag SE
      A.outer.selfadjointView<Eigen::Lower>().rankUpdate(s);
      ++A.n;
    }
  });

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sq4 = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(m, m);
  long n = 0;
  for (const auto& A : acc) {
    if (A.n == 0) continue;
    sum += A.sum;
    sq4 += A.sq;
    outer += A.outer;
    n += A.n;
  }
  outer = outer.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd mean = sum / static_cast<double>(n);
  Eigen::MatrixXd cov =
      outer / static_cast<double>(n) - mean * mean.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();

  VolatilityResult res;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ces(cov);
  Eigen::VectorXd ev = ces.eigenvalues();
  res.clipped_mass = c_lr * std::abs(ev.cwiseMin(0.0).sum());
  ev = ev.cwiseMax(0.0);
  res.sigma = c_lr * ces.eigenvectors() * ev.asDiagonal() * ces.eigenvectors().transpose();
  res.sigma_sqrt = std::sqrt(c_lr) * ces.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
                   ces.eigenvectors().transpose();
  res.se_diag.resize(m);
  for (int i = 0; i < m; ++i) {
    const double second = outer(i, i) / static_cast<double>(n);
    const double fourth = sq4(i) / static_cast<double>(n);
    const double var_of_var = std::max(0.0, fourth - second * second);
    res.se_diag(i) = c_lr * std::sqrt(var_of_var / static_cast<double>(n));
  }
  return res;
}

std::string SdeSpec::serialize() const {
  std::ostringstream os;
  os.precision(17);
  const int m = u_star.layout.coord_count();
  os << "sde_spec\n";
  os << "coords";
  for (int i = 0; i < m; ++i) os << ' ' << u_star.layout.coord_name(i);
  os << "\nu_star";
  const Eigen::VectorXd base = u_star.flatten();
  for (int i = 0; i < m; ++i) os << ' ' << base(i);
  os << "\n";
  auto dump = [&os, m](const char* name, const Eigen::MatrixXd& mat) {
    os << name << "\n";
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) os << (j ? " " : "") << mat(i, j);
      os << "\n";
    }
  };
  dump("jacobian", jacobian);
  dump("sigma", sigma);
  dump("sigma_sqrt", sigma_sqrt);
  return os.str();
}

Eigen::VectorXd SdeEnsemble::variance_at(std::size_t t_index) const {
  const int m = static_cast<int>(paths.front().front().size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m), sq = Eigen::VectorXd::Zero(m);
  for (const auto& p : paths) {
    mean += p[t_index];
    sq += p[t_index].cwiseProduct(p[t_index]);
  }
  const double n = static_cast<double>(paths.size());
  mean /= n;
  return (sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0);
}

SdeEnsemble simulate_sde(const std::function<Eigen::VectorXd(int)>& init, const SdeSpec& spec,
                         double T, double dt, int n_paths, int record_every, uint64_t seed) {
  if (!(dt <= 1e-3 * T))
    throw std::invalid_argument("simulate_sde: dt must be <= 1e-3 * T");
  const int m = static_cast<int>(spec.jacobian.rows());
  const long steps = static_cast<long>(std::ceil(T / dt));
  SdeEnsemble ens;
  std::vector<long> record_steps;
  for (long s = 0; s <= steps; ++s) {
    if (s % record_every == 0 || s == steps) {
      record_steps.push_back(s);
      ens.times.push_back(static_cast<double>(s) * dt);
    }
  }
  ens.paths.resize(n_paths);

  const double sdt = std::sqrt(dt);
  parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
    Rng rng = make_stream(seed, "sde_path", p);
    Eigen::VectorXd u = init(static_cast<int>(p));
    Eigen::VectorXd xi(m);
    auto& out = ens.paths[p];
    out.reserve(record_steps.size());
    std::size_t next = 0;
    if (record_steps[next] == 0) {
      out.push_back(u);
      ++next;
    }
    for (long s = 1; s <= steps; ++s) {
      for (int i = 0; i < m; ++i) xi(i) = rng.normal();
      u += dt * (spec.jacobian * u) + sdt * (spec.sigma_sqrt * xi);
      if (next < record_steps.size() && record_steps[next] == s) {
        out.push_back(u);
        ++next;
      }
    }
  });
  return ens;
}

std::vector<RescaledState> empirical_rescaled(const Trajectory& traj,
                                              const SummaryState& u_star, int d) {
  std::vector<RescaledState> out;
  out.reserve(traj.records.size());
  for (const auto& rec : traj.records) out.push_back(rescale(rec.u, u_star, d));
  return out;
}

}  // namespace sgdlim
