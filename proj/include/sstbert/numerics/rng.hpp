#pragma once

#include <cstdint>

namespace sstbert::numerics {

/// Counter-based generator: the n-th draw is a pure function of (seed, n),
/// so a run is bitwise reproducible from its seed alone. Streams for
/// independent consumers are derived with fork().
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (no cached second variate).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent generator keyed by this seed and `stream`; does not
  /// advance this generator.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace sstbert::numerics
