#include "qv/common/rng.hpp"

#include <cmath>

namespace qv {

double SplitMix64::normal() noexcept {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  SplitMix64 g(seed ^ (tag * 0xD1B54A32D192ED03ULL));
  g.next();
  return g.next();
}

}  // namespace qv
