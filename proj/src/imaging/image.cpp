#include "qv/imaging/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qv/common/binary_io.hpp"
#include "qv/common/error.hpp"

namespace qv::imaging {

double luminance(double r, double g, double b) noexcept {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

Image min_max_normalize(const Image& image) {
  Image out(image.height, image.width, 0.0);
  if (image.pixels.empty()) return out;
  const auto [lo, hi] = std::minmax_element(image.pixels.begin(), image.pixels.end());
  const double range = *hi - *lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    out.pixels[i] = std::clamp((image.pixels[i] - *lo) / range, 0.0, 1.0);
  }
  return out;
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (height <= 0 || width <= 0 || image.empty()) {
    throw InputError("cannot resize an empty image or to an empty shape");
  }
  if (height == image.height && width == image.width) return image;
  Image out(height, width);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int r = 0; r < height; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = y - y0;
    for (int c = 0; c < width; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(x);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = x - x0;
      const double top = image.at(y0, x0) * (1 - fx) + image.at(y0, x1) * fx;
      const double bottom = image.at(y1, x0) * (1 - fx) + image.at(y1, x1) * fx;
      out.at(r, c) = top * (1 - fy) + bottom * fy;
    }
  }
  return out;
}

Image crop(const Image& image, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || height < 0 || width < 0 || top + height > image.height ||
      left + width > image.width) {
    throw StructuralError("crop window outside image");
  }
  Image out(height, width);
  for (int r = 0; r < height; ++r) {
    std::copy_n(&image.pixels[static_cast<std::size_t>(top + r) * image.width + left], width,
                &out.pixels[static_cast<std::size_t>(r) * width]);
  }
  return out;
}

std::uint8_t to_byte(double v) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

RgbImage to_rgb(const Image& gray) {
  RgbImage out(gray.height, gray.width);
  for (int r = 0; r < gray.height; ++r) {
    for (int c = 0; c < gray.width; ++c) {
      const auto b = to_byte(gray.at(r, c));
      out.set(r, c, b, b, b);
    }
  }
  return out;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    tok.push_back(static_cast<char>(bytes[pos++]));
  }
  return tok;
}

int parse_positive(const std::string& tok, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("bad netpbm header field '" + tok + "' in " + path.string());
}

}  // namespace

Image read_netpbm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6") {
    throw FormatError("not a PGM/PPM file: " + path.string());
  }
  const bool color = magic == "P3" || magic == "P6";
  const bool binary = magic == "P5" || magic == "P6";
  const int width = parse_positive(next_token(bytes, pos), path);
  const int height = parse_positive(next_token(bytes, pos), path);
  const int maxval = parse_positive(next_token(bytes, pos), path);
  if (maxval > 65535) throw FormatError("maxval too large in " + path.string());
  const int channels = color ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;

  std::vector<double> samples(count);
  if (binary) {
    ++pos;  // single whitespace byte after maxval
    const std::size_t bps = maxval < 256 ? 1 : 2;
    if (bytes.size() < pos + count * bps) throw FormatError("truncated raster in " + path.string());
    for (std::size_t i = 0; i < count; ++i) {
      unsigned v = bytes[pos + i * bps];
      if (bps == 2) v = (v << 8) | bytes[pos + i * bps + 1];
      samples[i] = static_cast<double>(v) / maxval;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string tok = next_token(bytes, pos);
      if (tok.empty()) throw FormatError("truncated raster in " + path.string());
      samples[i] = static_cast<double>(std::stoi(tok)) / maxval;
    }
  }

  Image out(height, width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = color ? luminance(samples[3 * i], samples[3 * i + 1], samples[3 * i + 2])
                          : samples[i];
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::ostringstream header;
  header << "P5\n" << image.width << " " << image.height << "\n255\n";
  std::vector<std::uint8_t> bytes;
  const std::string h = header.str();
  bytes.insert(bytes.end(), h.begin(), h.end());
  for (double v : image.pixels) bytes.push_back(to_byte(v));
  write_file_atomic(path, bytes);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ostringstream header;
  header << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<std::uint8_t> bytes;
  const std::string h = header.str();
  bytes.insert(bytes.end(), h.begin(), h.end());
  bytes.insert(bytes.end(), image.data.begin(), image.data.end());
  write_file_atomic(path, bytes);
}

bool is_netpbm_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

}  // namespace qv::imaging
