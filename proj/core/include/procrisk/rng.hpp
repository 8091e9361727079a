#pragma once

#include <cstdint>
#include <random>

#include "procrisk/special.hpp"

namespace procrisk {

/// Deterministic random source. Raw mt19937_64 output with explicit
/// transforms; std::*_distribution results are implementation-defined and
/// would break byte-identical reruns across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  /// uniform on (0,1), never exactly 0 or 1
  double uniform() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() { return special::inv_norm_cdf(uniform()); }

  /// uniform integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 eng_;
};

/// splitmix64: stateless 64-bit mix, used to derive substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace procrisk
