#pragma once

#include <cstdint>

namespace r2f {

/// SplitMix64 step. Used both as a seed expander and as a key mixer.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ with SplitMix64 state initialization. All randomness in the
/// framework flows through this generator with hand-rolled conversions; the
/// standard <random> distributions are implementation-defined and would break
/// cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
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

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  /// Unbiased integer in [0, bound) by rejection (Lemire-style threshold).
  uint64_t next_below(uint64_t bound) {
    if (bound == 0) return 0;
    uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

/// Collapses a stream-identity tuple into one 64-bit seed. Chained SplitMix64
/// absorption: each field perturbs the state, the final output is the seed.
/// Distinct tuples give statistically independent streams.
inline uint64_t mix_key(uint64_t seed, uint64_t a, uint64_t b = 0,
                        uint64_t c = 0, uint64_t d = 0) {
  uint64_t st = seed;
  (void)splitmix64(st);
  st ^= a;
  (void)splitmix64(st);
  st ^= b;
  (void)splitmix64(st);
  st ^= c;
  (void)splitmix64(st);
  st ^= d;
  return splitmix64(st);
}

}  // namespace r2f
