#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace phasect {

/// splitmix64 step; advances `state` and returns the next output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Order-sensitive 64-bit hash of a list of words (splitmix64 finalizer
/// chained over the inputs). Used to derive per-task seeds.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words);

/// xoshiro256** seeded through splitmix64. Satisfies
/// UniformRandomBitGenerator so it plugs into <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, bound), bound > 0. Unbiased (rejection).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t s_[4];
};

}  // namespace phasect
