#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace sgdlim {

// xoshiro256++ by Blackman & Vigna. All toolkit randomness flows through
// this generator so that runs are bit-identical across platforms; the
// standard-library distributions are implementation-defined and are not used.
class Rng {
 public:
  Rng() : Rng(0x9e3779b97f4a7c15ull) {}
  explicit Rng(uint64_t seed) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on the open interval (0,1); safe as input to inverse CDFs
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // uniform on [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double normal();  // ziggurat, see rng.cpp

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
  uint64_t s_[4];
};

// Deterministic stream splitting: every consumer of randomness derives its
// generator from (master_seed, purpose tag, index, subindex). Identical
// master seeds reproduce every stream regardless of thread layout.
uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a = 0, uint64_t b = 0);

inline Rng make_stream(uint64_t master, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
  return Rng(derive_seed(master, tag, a, b));
}

// Inverse standard-normal CDF (Acklam's rational approximation, ~1.2e-9
// relative error). Used for common-random-number coupling where two noise
// laws must consume the same uniform stream.
double inverse_normal_cdf(double u);

}  // namespace sgdlim
