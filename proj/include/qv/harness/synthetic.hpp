#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qv/imaging/image.hpp"

namespace qv::harness {

/// Generator settings for crack-like images: dark wavy polylines over a
/// smooth textured background.
struct SyntheticCrackSpec {
  int image_size = 32;
  double crack_probability = 0.5;
  double crack_width_px = 1.5;
  double crack_waviness = 0.3;      // std-dev of the per-step heading change, radians
  double background_noise_level = 0.04;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SyntheticCrackSpec&) const = default;
};

struct LabeledImage {
  std::string id;
  imaging::Image image;
  imaging::Image mask;  // 1 on crack pixels; empty when the corpus has no masks
  int label = 0;
};

/// Image i depends only on (spec, i), so corpora of different sizes share
/// their common prefix.
std::vector<LabeledImage> generate_synthetic(const SyntheticCrackSpec& spec, int count);

}  // namespace qv::harness
