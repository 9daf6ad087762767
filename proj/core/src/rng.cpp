#include "sgdlim/rng.hpp"

#include <cmath>

namespace sgdlim {

uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a, uint64_t b) {
  // FNV-1a over the tag, then a splitmix64 chain over the numeric parts.
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  uint64_t x = master;
  uint64_t out = Rng::splitmix64(x);
  x ^= h;
  out ^= Rng::splitmix64(x);
  x ^= a * 0x9e3779b97f4a7c15ull + 0x3c6ef372fe94f82bull;
  out ^= Rng::splitmix64(x);
  x ^= b * 0xd1b54a32d192ed03ull + 0x78dde6e5fd29f05bull;
  out ^= Rng::splitmix64(x);
  return out;
}

namespace {

// Marsaglia-Tsang ziggurat for the standard normal, 256 layers.
struct ZigguratTables {
  double x[257];
  double y[256];
  uint64_t k[256];

  ZigguratTables() {
    const double r = 3.6541528853610088;
    const double v = 0.00492867323399;  // area of each layer
    x[256] = v / std::exp(-0.5 * r * r);
    x[255] = r;
    y[255] = std::exp(-0.5 * r * r);
    for (int i = 254; i >= 1; --i) {
      x[i] = std::sqrt(-2.0 * std::log(v / x[i + 1] + std::exp(-0.5 * x[i + 1] * x[i + 1])));
      y[i] = std::exp(-0.5 * x[i] * x[i]);
    }
    x[0] = 0.0;
    y[0] = 1.0;
    for (int i = 0; i < 255; ++i)
      k[i] = static_cast<uint64_t>((x[i] / x[i + 1]) * 9007199254740992.0);  // 2^53
    k[255] = static_cast<uint64_t>((x[255] / x[256]) * 9007199254740992.0);
  }
};

const ZigguratTables zt;

}  // namespace

double Rng::normal() {
  for (;;) {
    const uint64_t bits = next_u64();
    const int idx = static_cast<int>(bits & 0xff);
    const int64_t sign = (bits & 0x100) ? 1 : -1;
    const uint64_t u = bits >> 11;  // 53 random bits
    if (u < zt.k[idx]) {
      const double hi = (idx == 255) ? zt.x[256] : zt.x[idx + 1];
      return sign * static_cast<double>(u) * 0x1.0p-53 * hi;
    }
    if (idx == 255) {
      // tail beyond r
      const double r = zt.x[255];
      for (;;) {
        const double e1 = -std::log(uniform_open()) / r;
        const double e2 = -std::log(uniform_open());
        if (2.0 * e2 > e1 * e1) return sign * (r + e1);
      }
    }
    const double hi = zt.x[idx + 1];
    const double xx = static_cast<double>(u) * 0x1.0p-53 * hi;
    const double yy = zt.y[idx + 1] + uniform_open() * (zt.y[idx] - zt.y[idx + 1]);
    if (yy < std::exp(-0.5 * xx * xx)) return sign * xx;
  }
}

double inverse_normal_cdf(double u) {
  // Peter Acklam's algorithm.
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;

  if (u < plow) {
    const double q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (u > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - u));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = u - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace sgdlim
