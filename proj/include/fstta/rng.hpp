#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace fstta {

// Small deterministic PRNG (splitmix64). Used everywhere instead of the
// standard <random> distributions so that streams are reproducible across
// standard-library implementations and never depend on hidden cached state.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    return lo + next_u64() % (hi - lo + 1);
  }

  // Standard normal via Box-Muller. No cached second value: one draw per
  // call keeps replay order-independent.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(0, i - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and an index.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  Rng r(base ^ (0xd1b54a32d192ed03ULL * (index + 1)));
  return r.next_u64();
}

}  // namespace fstta
