#pragma once

#include <cstdint>

namespace cohsim {

// SplitMix64 generator. All randomness in the simulator flows through this
// instead of <random> distributions, whose output is not bit-stable across
// standard library versions; run-to-run reproducibility of emitted files
// depends on it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). Multiply-shift; bias is negligible for the ranges
  // used here (n << 2^64).
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

// Derives an independent seed for a nested stream (per phase, thread,
// invocation, ...) from a base seed and a salt.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  Rng r(base ^ (salt * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
  return r.next_u64();
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t s1, std::uint64_t s2) {
  return derive_seed(derive_seed(base, s1), s2);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t s1, std::uint64_t s2,
                                 std::uint64_t s3) {
  return derive_seed(derive_seed(base, s1, s2), s3);
}

}  // namespace cohsim
