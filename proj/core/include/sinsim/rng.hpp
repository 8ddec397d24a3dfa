#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>

namespace sinsim {

/// Deterministic pseudo-random generator, bit-identical on every platform.
///
/// Algorithm (fixed, part of the reproducibility contract):
///   * state: xoshiro256** (Blackman & Vigna), four 64-bit words;
///   * seeding: the four words are consecutive outputs of SplitMix64 started
///     at `seed`;
///   * next_u64(): one xoshiro256** step;
///   * uniform(): (next_u64() >> 11) * 2^-53, a double in [0, 1);
///   * below(n): Lemire's multiply-shift with rejection, unbiased in [0, n);
///   * normal(): Marsaglia polar method on 2*uniform()-1 pairs; the spare
///     variate is cached and returned by the following call.
///
/// The integer stream is exact everywhere. normal() additionally calls
/// std::log and std::sqrt; sqrt is correctly rounded under IEEE-754 and log
/// agrees across mainstream libms for these arguments.
///
/// An Rng is single-owner. To hand randomness to independent consumers derive
/// a fresh seed with derive_seed() instead of sharing a generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n) noexcept;
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

 private:
  std::array<std::uint64_t, 4> s_{};
  std::optional<double> spare_normal_;
};

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for an independent stream identified by `tags` under `base`.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept;

}  // namespace sinsim
