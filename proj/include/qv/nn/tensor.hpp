#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace qv::nn {

/// Per-example shape (height, width, channels). Dense activations use 1x1xC.
struct Shape3 {
  int height = 1;
  int width = 1;
  int channels = 1;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * width * channels;
  }
  std::string str() const;
  bool operator==(const Shape3&) const = default;
};

/// Dense NHWC batch of 64-bit values.
struct Tensor4 {
  int batch = 0;
  Shape3 shape;
  std::vector<double> values;

  Tensor4() = default;
  Tensor4(int n, Shape3 s, double fill = 0.0)
      : batch(n), shape(s), values(static_cast<std::size_t>(n) * s.size(), fill) {}

  std::size_t example_size() const noexcept { return shape.size(); }
  double* example(int i) { return values.data() + static_cast<std::size_t>(i) * shape.size(); }
  const double* example(int i) const {
    return values.data() + static_cast<std::size_t>(i) * shape.size();
  }
  double& at(int n, int h, int w, int c) {
    return values[((static_cast<std::size_t>(n) * shape.height + h) * shape.width + w) *
                      shape.channels + c];
  }
  double at(int n, int h, int w, int c) const {
    return values[((static_cast<std::size_t>(n) * shape.height + h) * shape.width + w) *
                      shape.channels + c];
  }
};

}  // namespace qv::nn
