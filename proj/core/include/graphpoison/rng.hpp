// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness. All stochastic choices in the library flow from a single
// base seed through derive_seed(), so any run is reproducible from its config.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace graphpoison {

// splitmix64 finalizer; decorrelates nearby seed/tag values.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable derivation of a child seed, e.g. derive_seed(base, step_index).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return mix64(base ^ mix64(tag));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag1,
                                    std::uint64_t tag2) {
  return derive_seed(derive_seed(base, tag1), tag2);
}

// mt19937_64 with hand-rolled samplers. The engine is fully specified by the
// standard; std::uniform_*_distribution is not, so we avoid it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double real01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling, unbiased.
  std::uint64_t uniform(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform in [lo, hi).
  double uniform_real(double lo, double hi) { return lo + (hi - lo) * real01(); }

  bool bernoulli(double p) { return real01() < p; }

  // Fisher-Yates partial shuffle of the first k slots; deterministic per state.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace graphpoison
