// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace salatt {

/// Counter-based SplitMix64 generator.
///
/// The n-th draw is a pure function of (key, n), so a seed reproduces the
/// same bit sequence on every run and platform. `split` derives independent
/// child streams without advancing the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Unbiased integer on [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller.
  double normal();

  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace salatt
