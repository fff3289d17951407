#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace fsdc {

// splitmix64 step; used for seeding and for deriving independent streams.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// Deterministically folds a list of words into one 64-bit seed.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) noexcept;

/// xoshiro256** 1.0 (Blackman & Vigna), state seeded through splitmix64.
///
/// Every random draw in the library goes through this generator so that a
/// seed reproduces the same stream on any platform. Normal variates use the
/// inverse normal CDF (Wichura AS241, PPND16) applied to a 53-bit uniform,
/// which is likewise platform independent.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return next(); }
  std::uint64_t next() noexcept;

  // Uniform in the open interval (0, 1).
  double uniform_open() noexcept;
  // Uniform integer in [0, bound), bound > 0. Unbiased (rejection).
  std::uint64_t below(std::uint64_t bound) noexcept;
  double normal() noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
};

// Inverse of the standard normal CDF for p in (0, 1).
double normal_quantile(double p) noexcept;

}  // namespace fsdc
