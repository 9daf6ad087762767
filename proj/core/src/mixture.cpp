#include "sgdlim/mixture.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sgdlim {

int MixtureSpec::num_labels() const {
  int m = 0;
  for (int l : labels) m = std::max(m, l + 1);
  return m;
}

void MixtureSpec::validate() const {
  if (d <= 0) throw std::invalid_argument("mixture.d: must be positive");
  if (means.empty()) throw std::invalid_argument("mixture.means: at least one mean required");
  if (static_cast<int>(means.size()) != weights.size())
    throw std::invalid_argument("mixture.weights: must match number of means");
  if (labels.size() != means.size())
    throw std::invalid_argument("mixture.labels: must match number of means");
  for (const auto& mu : means) {
    if (mu.size() != d) throw std::invalid_argument("mixture.means: dimension mismatch with d");
    if (!mu.allFinite()) throw std::invalid_argument("mixture.means: non-finite entries");
  }
  double sum = 0.0;
  for (int a = 0; a < weights.size(); ++a) {
    if (weights(a) < 0.0) throw std::invalid_argument("mixture.weights: negative weight");
    sum += weights(a);
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("mixture.weights: must sum to 1 within 1e-12");
  for (int l : labels)
    if (l < 0) throw std::invalid_argument("mixture.labels: labels must be >= 0");
}

int sample_class(const MixtureSpec& spec, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  const int k = spec.num_classes();
  for (int a = 0; a < k; ++a) {
    acc += spec.weights(a);
    if (u < acc) return a;
  }
  return k - 1;
}

Datum sample_datum(const MixtureSpec& spec, Rng& rng) {
  Datum datum;
  datum.j = sample_class(spec, rng);
  datum.x = spec.means[datum.j];
  for (int i = 0; i < spec.d; ++i) datum.x(i) += spec.noise.sample(rng);
  datum.one_hot = Eigen::VectorXd::Zero(spec.num_labels());
  datum.one_hot(spec.labels[datum.j]) = 1.0;
  return datum;
}

bool MeanDelocReport::all() const {
  for (bool f : flags)
    if (!f) return false;
  return true;
}

MeanDelocReport delocalization_of_means(const MixtureSpec& spec, double zeta) {
  if (!(zeta > 0.0 && zeta < 0.5))
    throw std::invalid_argument("delocalization_of_means: zeta must be in (0, 1/2)");
  const double bound = std::pow(static_cast<double>(spec.d), -0.5 + zeta);
  MeanDelocReport rep;
  for (const auto& mu : spec.means) {
    const double linf = mu.size() ? mu.cwiseAbs().maxCoeff() : 0.0;
    rep.linf.push_back(linf);
    rep.flags.push_back(linf <= bound);
  }
  return rep;
}

Eigen::VectorXd make_mean(const std::string& recipe, int d, double scale, uint64_t seed) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  if (recipe == "zero") return v;
  if (recipe == "flat" || recipe == "rho_flat") {
    v.setConstant(scale / std::sqrt(static_cast<double>(d)));
    return v;
  }
  if (recipe == "coordinate_e1") {
    v(0) = scale;
    return v;
  }
  if (recipe == "random_unit") {
    Rng rng(derive_seed(seed, "mean_random_unit"));
    for (int i = 0; i < d; ++i) v(i) = rng.normal();
    v *= scale / v.norm();
    return v;
  }
  throw std::invalid_argument("unknown mean recipe: " + recipe);
}

std::vector<Eigen::VectorXd> load_means_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open means file: " + path);
  std::vector<Eigen::VectorXd> out;
  std::string line;
  while (std::getline(in, line)) {
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (vals.empty()) continue;
    out.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size()));
  }
  if (out.empty()) throw std::invalid_argument("means file is empty: " + path);
  return out;
}

std::vector<Eigen::VectorXd> load_means_f64(const std::string& path, int d) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open means file: " + path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % (sizeof(double) * d) != 0)
    throw std::invalid_argument("means file size is not a multiple of 8*d: " + path);
  const std::size_t n = bytes / (sizeof(double) * d);
  std::vector<Eigen::VectorXd> out(n, Eigen::VectorXd(d));
  for (auto& v : out) in.read(reinterpret_cast<char*>(v.data()), sizeof(double) * d);
  return out;
}

}  // namespace sgdlim
