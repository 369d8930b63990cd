#pragma once

#include <cmath>
#include <cstdint>

namespace marl {

// xoshiro256++ with splitmix64 seeding. All sampling below is written out by
// hand because the standard-library distributions are implementation-defined;
// trajectories must be bit-identical across platforms and the full generator
// state (four u64 words, nothing cached) goes into checkpoints.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Stable derivation of independent streams from one master seed.
  static uint64_t mix(uint64_t seed, uint64_t tag) {
    uint64_t x = seed ^ (0x9e3779b97f4a7c15ull * (tag + 1));
    uint64_t a = splitmix64(x);
    uint64_t b = splitmix64(x);
    return a ^ (b << 1);
  }

  uint64_t next_u64() {
    uint64_t const result = rotl(s_[0] + s_[3], 23) + s_[0];
    uint64_t const t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0,1) with 53 bits of mantissa.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // [0,n) without modulo bias (Lemire multiply-shift).
  uint64_t uniform_int(uint64_t n) {
    uint64_t x = next_u64();
    __uint128_t m = (__uint128_t)x * (__uint128_t)n;
    uint64_t l = (uint64_t)m;
    if (l < n) {
      uint64_t t = (0 - n) % n;
      while (l < t) {
        x = next_u64();
        m = (__uint128_t)x * (__uint128_t)n;
        l = (uint64_t)m;
      }
    }
    return (uint64_t)(m >> 64);
  }

  // Marsaglia polar method, one draw per call. The spare is discarded on
  // purpose: caching it would add hidden state to serialize.
  double normal() {
    for (;;) {
      double u = 2.0 * uniform01() - 1.0;
      double v = 2.0 * uniform01() - 1.0;
      double s = u * u + v * v;
      if (s >= 1.0 || s == 0.0) continue;
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  const uint64_t* state() const { return s_; }
  void set_state(const uint64_t st[4]) {
    for (int i = 0; i < 4; ++i) s_[i] = st[i];
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
};

}  // namespace marl
