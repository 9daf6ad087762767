#include "sgdlim/models.hpp"

#include "sgdlim/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace sgdlim {

namespace {

// log sum exp with the max subtracted
double lse(std::span<const double> a) {
  double m = a[0];
  for (double v : a) m = std::max(m, v);
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

void softmax(std::span<const double> a, std::span<double> out) {
  double m = a[0];
  for (double v : a) m = std::max(m, v);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = std::exp(a[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
}

}  // namespace

ScalarLink link_square() {
  return {"square", [](double x) { return x * x; }, [](double x) { return 2.0 * x; }};
}

ScalarLink link_he3_plus_he2() {
  return {"he3_he2", [](double x) { return x * x * x - 3.0 * x + x * x; },
          [](double x) { return 3.0 * x * x - 3.0 + 2.0 * x; }};
}

ScalarLink link_poly(const std::vector<double>& coeffs) {
  if (coeffs.empty()) throw std::invalid_argument("link_poly: empty coefficient list");
  auto horner = [coeffs](double x) {
    double v = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * x + *it;
    return v;
  };
  auto horner_d = [coeffs](double x) {
    double v = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 1;) v = v * x + coeffs[i] * static_cast<double>(i);
    return v;
  };
  return {"poly", horner, horner_d};
}

Activation activation_tanh() {
  return {"tanh", [](double x) { return std::tanh(x); },
          [](double x) {
            const double t = std::tanh(x);
            return 1.0 - t * t;
          }};
}

Activation activation_sigmoid() {
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return {"sigmoid", sig, [sig](double x) {
            const double s = sig(x);
            return s * (1.0 - s);
          }};
}

Activation activation_smoothed_relu() {
  // raw ReLU is not C^3; this smoothing keeps the derivatives polynomial-growth
  constexpr double eps = 0.1;
  return {"smoothed_relu",
          [](double x) { return 0.5 * (x + std::sqrt(x * x + eps * eps)); },
          [](double x) { return 0.5 * (1.0 + x / std::sqrt(x * x + eps * eps)); }};
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return activation_tanh();
  if (name == "sigmoid") return activation_sigmoid();
  if (name == "smoothed_relu") return activation_smoothed_relu();
  throw std::invalid_argument("unknown activation: " + name);
}

ProjectiveModel make_logistic(int k1, double lambda) {
  if (k1 < 2) throw std::invalid_argument("make_logistic: k1 must be >= 2");
  ProjectiveModel m;
  m.name = "logistic";
  m.k_trained = k1;
  m.k_frozen = 0;
  m.k2 = 0;
  m.num_classes = k1;
  m.lambda = lambda;
  m.growth_order = 1.0;
  m.psi = [k1](std::span<const double> z, std::span<const double>, int y) {
    return -z[y] + lse(z.first(k1));
  };
  m.grad1 = [k1](std::span<const double> z, std::span<const double>, int y,
                 std::span<double> g1) {
    softmax(z.first(k1), g1);
    g1[y] -= 1.0;
  };
  m.grad2 = {};
  return m;
}

ProjectiveModel make_two_layer(int k1, int num_classes, const Activation& act, double lambda) {
  if (k1 < 1 || num_classes < 2)
    throw std::invalid_argument("make_two_layer: need k1 >= 1 and num_classes >= 2");
  ProjectiveModel m;
  m.name = "two_layer_" + act.name;
  m.k_trained = k1 * num_classes;
  m.k_frozen = 0;
  m.k2 = k1 * num_classes;
  m.num_classes = num_classes;
  m.lambda = lambda;
  m.growth_order = 2.0;
  auto g = act.g;
  auto dg = act.dg;
  const int C = num_classes;
  // head activations a_c = sum_i w[c*k1+i] g(z[c*k1+i])
  auto heads = [g, k1, C](std::span<const double> z, std::span<const double> w,
                          std::span<double> a) {
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int i = 0; i < k1; ++i) s += w[c * k1 + i] * g(z[c * k1 + i]);
      a[c] = s;
    }
  };
  m.psi = [heads, C](std::span<const double> z, std::span<const double> w, int y) {
    std::vector<double> a(C);
    heads(z, w, a);
    return -a[y] + lse(a);
  };
  m.grad1 = [heads, g, dg, k1, C](std::span<const double> z, std::span<const double> w, int y,
                                  std::span<double> g1) {
    std::vector<double> a(C), p(C);
    heads(z, w, a);
    softmax(a, p);
    p[y] -= 1.0;
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < k1; ++i) g1[c * k1 + i] = p[c] * w[c * k1 + i] * dg(z[c * k1 + i]);
  };
  m.grad2 = [heads, g, k1, C](std::span<const double> z, std::span<const double> w, int y,
                              std::span<double> g2) {
    std::vector<double> a(C), p(C);
    heads(z, w, a);
    softmax(a, p);
    p[y] -= 1.0;
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < k1; ++i) g2[c * k1 + i] = p[c] * g(z[c * k1 + i]);
  };
  return m;
}

ProjectiveModel make_multi_index(const ScalarLink& link) {
  ProjectiveModel m;
  m.name = "multi_index_" + link.name;
  m.k_trained = 1;
  m.k_frozen = 1;
  m.k2 = 0;
  m.num_classes = 1;
  m.lambda = 0.0;
  m.growth_order = 3.0;
  auto f = link.f;
  auto df = link.df;
  m.psi = [f](std::span<const double> z, std::span<const double>, int) {
    const double r = f(z[0]) - f(z[1]);
    return r * r;
  };
  m.grad1 = [f, df](std::span<const double> z, std::span<const double>, int,
                    std::span<double> g1) {
    g1[0] = 2.0 * (f(z[0]) - f(z[1])) * df(z[0]);
  };
  m.grad2 = {};
  // uninformative slice: pin the <theta, theta_*> coordinate at its guess
  // value; the canonical layout places G_{0,1} right after G_{0,0}
  m.uninformative_slice = [](int) { return std::vector<int>{1}; };
  return m;
}

ProjectiveModel make_zero_model(int k1, double lambda) {
  ProjectiveModel m;
  m.name = "zero";
  m.k_trained = k1;
  m.k_frozen = 0;
  m.k2 = 0;
  m.num_classes = 1;
  m.lambda = lambda;
  m.growth_order = 0.0;
  m.psi = [](std::span<const double>, std::span<const double>, int) { return 0.0; };
  m.grad1 = [](std::span<const double>, std::span<const double>, int, std::span<double> g1) {
    for (double& v : g1) v = 0.0;
  };
  m.grad2 = {};
  return m;
}

ParameterGradient full_gradient(const ProjectiveModel& model, const ParameterState& state,
                                const Datum& datum) {
  if (!state.theta.allFinite() || !state.w.allFinite())
    throw std::invalid_argument("full_gradient: non-finite parameter state");
  const int kt = model.k_trained;
  const int kz = model.z_dim();
  Eigen::VectorXd z = state.theta.transpose() * datum.x;
  std::vector<double> g1(kt);
  const int y = datum.one_hot.size() ? static_cast<int>(std::distance(
                                           datum.one_hot.data(),
                                           std::max_element(datum.one_hot.data(),
                                                            datum.one_hot.data() +
                                                                datum.one_hot.size())))
                                     : 0;
  model.grad1(std::span<const double>(z.data(), kz),
              std::span<const double>(state.w.data(), state.w.size()), y, g1);
  for (double v : g1)
    if (!std::isfinite(v))
      throw NumericalError("full_gradient: non-finite psi derivative (parameter blow-up)");
  ParameterGradient grad;
  grad.theta = Eigen::MatrixXd::Zero(state.theta.rows(), state.theta.cols());
  for (int a = 0; a < kt; ++a)
    grad.theta.col(a) = g1[a] * datum.x + 2.0 * model.lambda * state.theta.col(a);
  grad.w = Eigen::VectorXd::Zero(state.w.size());
  if (model.k2 > 0) {
    std::vector<double> g2(model.k2);
    model.grad2(std::span<const double>(z.data(), kz),
                std::span<const double>(state.w.data(), state.w.size()), y, g2);
    for (int b = 0; b < model.k2; ++b) {
      if (!std::isfinite(g2[b]))
        throw NumericalError("full_gradient: non-finite psi derivative (parameter blow-up)");
      grad.w(b) = g2[b];
    }
  }
  return grad;
}

double gradient_fd_check(const ProjectiveModel& model, int probes, uint64_t seed) {
  Rng rng(derive_seed(seed, "fd_check"));
  const int kz = model.z_dim();
  const int kt = model.k_trained;
  const double h = 1e-6;
  double worst = 0.0;
  std::vector<double> z(kz), w(model.k2), g1(kt), g2(model.k2);
  for (int p = 0; p < probes; ++p) {
    for (auto& v : z) v = 5.0 * (2.0 * rng.uniform() - 1.0);
    for (auto& v : w) v = 5.0 * (2.0 * rng.uniform() - 1.0);
    const int y = static_cast<int>(rng.next_u64() % model.num_classes);
    model.grad1(z, w, y, g1);
    double scale = 1.0;
    for (double v : g1) scale = std::max(scale, std::abs(v));
    for (int a = 0; a < kt; ++a) {
      const double keep = z[a];
      z[a] = keep + h;
      const double up = model.psi(z, w, y);
      z[a] = keep - h;
      const double dn = model.psi(z, w, y);
      z[a] = keep;
      worst = std::max(worst, std::abs((up - dn) / (2.0 * h) - g1[a]) / scale);
    }
    if (model.k2 > 0) {
      model.grad2(z, w, y, g2);
      for (double v : g2) scale = std::max(scale, std::abs(v));
      for (int b = 0; b < model.k2; ++b) {
        const double keep = w[b];
        w[b] = keep + h;
        const double up = model.psi(z, w, y);
        w[b] = keep - h;
        const double dn = model.psi(z, w, y);
        w[b] = keep;
        worst = std::max(worst, std::abs((up - dn) / (2.0 * h) - g2[b]) / scale);
      }
    }
  }
  return worst;
}

}  // namespace sgdlim
