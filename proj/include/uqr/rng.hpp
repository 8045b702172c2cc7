#pragma once

#include <cstdint>
#include <limits>

namespace uqr {

/// Counter-based, splittable random stream.
///
/// Each draw is a pure function of (key, counter), so a stream can be split
/// into independent child streams by index without any shared state. This is
/// what makes parallel sampling reproducible at any worker count: task `i`
/// always draws from `root.split(i)`.
class SeedStream {
 public:
  using result_type = std::uint64_t;

  explicit SeedStream(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal variate.
  double normal();

  /// Child stream; independent of the parent's counter position.
  SeedStream split(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  SeedStream(std::uint64_t key, std::uint64_t counter, int) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace uqr
