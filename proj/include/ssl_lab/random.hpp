#pragma once

#include <cstdint>
#include <random>

#include "ssl_lab/error.hpp"

namespace ssl_lab {

using Rng = std::mt19937_64;

// Independent named streams derived from one run seed. Keeping the labeled
// path on its own stream is what lets a method whose unlabeled terms vanish
// replay the supervised trajectory exactly.
enum class Stream : std::uint64_t {
  Init = 0,
  Labeled = 1,
  Unlabeled = 2,
  Auxiliary = 3,
  Augment = 4,
  Generator = 5,
};

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(salt),
                    static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double sample_beta(double a, double b, Rng& rng) {
  require(a > 0.0 && b > 0.0, ErrorKind::InvalidArgument, "beta shape parameters must be positive");
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  if (x + y <= 0.0) return 0.5;
  return x / (x + y);
}

}  // namespace ssl_lab
