#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>

namespace qv {

// SplitMix64 (Steele, Lea & Flood). Every stream in the project is derived
// from this generator so results do not depend on the standard library's
// distribution implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Independent child stream; advances this generator by one step.
  SplitMix64 split() noexcept { return SplitMix64(next() ^ 0x6A09E667F3BCC909ULL); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Uses rejection to stay unbiased.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (one value per call, the pair's twin is
  /// discarded so the stream position is easy to reason about).
  double normal() noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

/// Stable mixing of a seed with a tag, used to derive per-purpose seeds
/// (init, shuffle, dropout) from a single configured seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

}  // namespace qv
