#pragma once

#include <cstdint>
#include <random>

namespace cost {

/// Seeded generator with platform-stable distributions (the std:: distribution
/// objects are implementation-defined, so sampling is done by hand on top of
/// the mt19937_64 bit stream).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p) { return uniform() < p; }
  /// Independent child stream derived from this one.
  Rng split();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cost
