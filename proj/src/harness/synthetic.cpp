#include "qv/harness/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "qv/common/error.hpp"
#include "qv/common/rng.hpp"

namespace qv::harness {

namespace {

struct Point {
  double x, y;
};

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

void paint_background(imaging::Image& img, const SyntheticCrackSpec& spec, SplitMix64& rng) {
  const double base = rng.uniform(0.5, 0.7);
  const int n = spec.image_size;
  struct Wave {
    double fx, fy, phase, amp;
  };
  Wave waves[3];
  for (auto& w : waves) {
    const double freq = rng.uniform(0.5, 3.0) * 2 * std::numbers::pi / n;
    const double dir = rng.uniform(0, 2 * std::numbers::pi);
    w = {freq * std::cos(dir), freq * std::sin(dir), rng.uniform(0, 2 * std::numbers::pi),
         rng.uniform(0.01, 0.05)};
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double v = base;
      for (const auto& w : waves) v += w.amp * std::cos(w.fx * c + w.fy * r + w.phase);
      v += spec.background_noise_level * rng.normal();
      img.at(r, c) = v;
    }
  }
}

// Random walk entering from a random border point and heading inwards.
std::vector<Point> crack_path(const SyntheticCrackSpec& spec, SplitMix64& rng) {
  const double n = spec.image_size;
  const double along = rng.uniform(0.1, 0.9) * n;
  Point p{};
  double heading = 0;
  switch (rng.below(4)) {
    case 0: p = {along, 0}; heading = std::numbers::pi / 2; break;
    case 1: p = {along, n - 1}; heading = -std::numbers::pi / 2; break;
    case 2: p = {0, along}; heading = 0; break;
    default: p = {n - 1, along}; heading = std::numbers::pi; break;
  }
  heading += rng.uniform(-0.6, 0.6);
  const double length = n * rng.uniform(0.6, 1.3);
  const double step = std::max(1.0, n / 12.0);
  std::vector<Point> path{p};
  for (double walked = 0; walked < length; walked += step) {
    heading += spec.crack_waviness * rng.normal();
    p = {p.x + step * std::cos(heading), p.y + step * std::sin(heading)};
    path.push_back(p);
    if (p.x < -1 || p.y < -1 || p.x > n || p.y > n) break;
  }
  return path;
}

void paint_crack(imaging::Image& img, imaging::Image& mask, const std::vector<Point>& path,
                 const SyntheticCrackSpec& spec, SplitMix64& rng) {
  const double depth = rng.uniform(0.3, 0.45);
  const double half = spec.crack_width_px / 2;
  const int n = spec.image_size;
  imaging::Image cover(n, n, 0.0);
  for (std::size_t s = 0; s + 1 < path.size(); ++s) {
    const Point a = path[s], b = path[s + 1];
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half - 1)));
    const int r1 = std::min(n - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + half + 1)));
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half - 1)));
    const int c1 = std::min(n - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + half + 1)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double d = segment_distance({static_cast<double>(c), static_cast<double>(r)}, a, b);
        cover.at(r, c) = std::max(cover.at(r, c), std::clamp(half + 0.5 - d, 0.0, 1.0));
        if (d <= half) mask.at(r, c) = 1.0;
      }
    }
  }
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] -= depth * cover.pixels[i];
}

}  // namespace

void SyntheticCrackSpec::validate() const {
  if (image_size < 4) throw ConfigError("synthetic image_size must be at least 4");
  if (!(crack_probability >= 0.0 && crack_probability <= 1.0)) {
    throw ConfigError("crack_probability must lie in [0, 1]");
  }
  if (!(crack_width_px > 0.0)) throw ConfigError("crack_width_px must be positive");
  if (!(crack_waviness >= 0.0)) throw ConfigError("crack_waviness must be non-negative");
  if (!(background_noise_level >= 0.0)) throw ConfigError("background_noise_level must be non-negative");
}

std::vector<LabeledImage> generate_synthetic(const SyntheticCrackSpec& spec, int count) {
  spec.validate();
  if (count <= 0) throw ConfigError("synthetic corpus size must be positive");
  std::vector<LabeledImage> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    SplitMix64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
    LabeledImage item;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%05d", i);
    item.id = id;
    item.image = imaging::Image(spec.image_size, spec.image_size);
    item.mask = imaging::Image(spec.image_size, spec.image_size, 0.0);
    // Draw the label first so it does not depend on the painting details.
    item.label = rng.uniform() < spec.crack_probability ? 1 : 0;
    paint_background(item.image, spec, rng);
    if (item.label == 1) paint_crack(item.image, item.mask, crack_path(spec, rng), spec, rng);
    for (auto& v : item.image.pixels) v = std::clamp(v, 0.0, 1.0);
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace qv::harness
