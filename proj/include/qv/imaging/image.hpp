#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace qv::imaging {

/// Single-channel image, row-major, 64-bit samples.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }

  bool empty() const noexcept { return pixels.empty(); }
  bool operator==(const Image&) const = default;
};

/// Interleaved 8-bit RGB, used for annotated outputs and plots.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::uint8_t* px(int r, int c) { return &data[(static_cast<std::size_t>(r) * width + c) * 3]; }
  const std::uint8_t* px(int r, int c) const {
    return &data[(static_cast<std::size_t>(r) * width + c) * 3];
  }
  void set(int r, int c, std::uint8_t red, std::uint8_t green, std::uint8_t blue) {
    auto* p = px(r, c);
    p[0] = red;
    p[1] = green;
    p[2] = blue;
  }
};

/// Luminance 0.299 R + 0.587 G + 0.114 B.
double luminance(double r, double g, double b) noexcept;

/// Maps the image's [min, max] onto [0, 1]; a constant image becomes all 0.
Image min_max_normalize(const Image& image);

/// Bilinear resampling with pixel centres aligned (half-pixel convention).
Image resize_bilinear(const Image& image, int height, int width);

Image crop(const Image& image, int top, int left, int height, int width);

/// Quantizes [0, 1] samples to 8 bits for display.
std::uint8_t to_byte(double v) noexcept;
RgbImage to_rgb(const Image& gray);

// Netpbm I/O. Readers accept P2/P3/P5/P6 (8 or 16 bit) and return samples
// scaled to [0, 1]; colour inputs are converted with luminance().
Image read_netpbm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

bool is_netpbm_path(const std::filesystem::path& path);

}  // namespace qv::imaging
