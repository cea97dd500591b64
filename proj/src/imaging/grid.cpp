#include "qv/imaging/grid.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qv/common/binary_io.hpp"
#include "qv/common/error.hpp"

namespace qv::imaging {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  return out;
}

int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ConfigError("cannot parse " + what + " '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("cannot parse " + what + " '" + s + "'");
}

int round_up_to_grid(int n) { return (n + kGridSize - 1) / kGridSize * kGridSize; }

struct Geometry {
  int scaled_height;
  int scaled_width;
  int target_height;
  int target_width;
  Padding pad;
};

Geometry geometry_for(int h, int w, int th, int tw) {
  Geometry g{h, w, th, tw, {}};
  if (h > th || w > tw) {
    const double scale = std::min(static_cast<double>(th) / h, static_cast<double>(tw) / w);
    g.scaled_height = std::clamp(static_cast<int>(std::lround(h * scale)), 1, th);
    g.scaled_width = std::clamp(static_cast<int>(std::lround(w * scale)), 1, tw);
  }
  g.pad.top = (th - g.scaled_height) / 2;
  g.pad.bottom = th - g.scaled_height - g.pad.top;
  g.pad.left = (tw - g.scaled_width) / 2;
  g.pad.right = tw - g.scaled_width - g.pad.left;
  return g;
}

Image pad_replicate(const Image& img, const Padding& pad) {
  Image out(img.height + pad.top + pad.bottom, img.width + pad.left + pad.right);
  for (int r = 0; r < out.height; ++r) {
    const int sr = std::clamp(r - pad.top, 0, img.height - 1);
    for (int c = 0; c < out.width; ++c) {
      out.at(r, c) = img.at(sr, std::clamp(c - pad.left, 0, img.width - 1));
    }
  }
  return out;
}

Image pad_zero(const Image& img, const Padding& pad) {
  Image out(img.height + pad.top + pad.bottom, img.width + pad.left + pad.right, 0.0);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) out.at(r + pad.top, c + pad.left) = img.at(r, c);
  return out;
}

}  // namespace

std::string ResolutionCategory::name() const {
  return std::to_string(height) + "x" + std::to_string(width);
}

CategoryTable::CategoryTable(std::vector<ResolutionCategory> rows, bool allow_fallback)
    : rows_(std::move(rows)), allow_fallback_(allow_fallback) {
  for (const auto& r : rows_) {
    if (r.height <= 0 || r.width <= 0) throw ConfigError("category resolution must be positive");
    if (r.target_height <= 0 || r.target_width <= 0 || r.target_height % kGridSize != 0 ||
        r.target_width % kGridSize != 0) {
      throw ConfigError("category " + r.name() + ": target must be a positive multiple of 9");
    }
    if (!(r.weight > 0.0) || !std::isfinite(r.weight)) {
      throw ConfigError("category " + r.name() + ": weight must be positive");
    }
  }
}

CategoryTable CategoryTable::parse(const std::string& text, bool allow_fallback) {
  std::vector<ResolutionCategory> rows;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line.rfind("height", 0) == 0) continue;
    const auto f = split_fields(line, ',');
    if (f.size() != 4) throw ConfigError("category row needs 4 fields: '" + line + "'");
    ResolutionCategory r;
    r.height = parse_int(f[0], "height");
    r.width = parse_int(f[1], "width");
    const auto x = f[2].find('x');
    if (x == std::string::npos) {
      r.target_height = r.target_width = parse_int(f[2], "target");
    } else {
      r.target_height = parse_int(trim(f[2].substr(0, x)), "target height");
      r.target_width = parse_int(trim(f[2].substr(x + 1)), "target width");
    }
    r.weight = parse_double(f[3], "weight");
    rows.push_back(r);
  }
  return CategoryTable(std::move(rows), allow_fallback);
}

CategoryTable CategoryTable::load(const std::filesystem::path& path, bool allow_fallback) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open category table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), allow_fallback);
}

std::string CategoryTable::to_text() const {
  std::ostringstream out;
  out << "height,width,target,weight\n";
  out.precision(17);
  for (const auto& r : rows_) {
    out << r.height << "," << r.width << ",";
    if (r.target_height == r.target_width) {
      out << r.target_height;
    } else {
      out << r.target_height << "x" << r.target_width;
    }
    out << "," << r.weight << "\n";
  }
  return out.str();
}

const ResolutionCategory* CategoryTable::find(int height, int width) const {
  for (const auto& r : rows_) {
    if (r.height == height && r.width == width) return &r;
  }
  return nullptr;
}

RegionGrid split_image(const Image& image, const CategoryTable& categories, std::string source_id) {
  if (image.empty()) throw InputError("cannot split an empty image");
  RegionGrid grid;
  grid.source_id = std::move(source_id);
  grid.source_height = image.height;
  grid.source_width = image.width;

  int th = 0;
  int tw = 0;
  if (const auto* cat = categories.find(image.height, image.width)) {
    th = cat->target_height;
    tw = cat->target_width;
    grid.weight = cat->weight;
    grid.category = cat->name();
  } else if (categories.allow_fallback()) {
    th = round_up_to_grid(image.height);
    tw = round_up_to_grid(image.width);
    grid.weight = 1.0;
    grid.category = "fallback";
    grid.fallback = true;
    spdlog::warn("no resolution category for {}x{} ({}); padding to {}x{} with weight 1",
                 image.height, image.width, grid.source_id, th, tw);
  } else {
    throw InputError("no resolution category for " + std::to_string(image.height) + "x" +
                     std::to_string(image.width) + " and fallback is disabled");
  }

  const Geometry g = geometry_for(image.height, image.width, th, tw);
  grid.scaled_height = g.scaled_height;
  grid.scaled_width = g.scaled_width;
  grid.pad = g.pad;
  grid.region_height = th / kGridSize;
  grid.region_width = tw / kGridSize;

  const Image scaled = (g.scaled_height == image.height && g.scaled_width == image.width)
                           ? image
                           : resize_bilinear(image, g.scaled_height, g.scaled_width);
  const Image padded = pad_replicate(scaled, g.pad);
  grid.regions.reserve(kRegionCount);
  for (int row = 0; row < kGridSize; ++row) {
    for (int col = 0; col < kGridSize; ++col) {
      Region region;
      region.row = row;
      region.col = col;
      region.weight = grid.weight;
      region.pixels = crop(padded, row * grid.region_height, col * grid.region_width,
                           grid.region_height, grid.region_width);
      grid.regions.push_back(std::move(region));
    }
  }
  return grid;
}

RegionGrid label_regions(RegionGrid grid, const MaskLabeling& labeling) {
  if (!(labeling.positive_threshold > 0.0 && labeling.positive_threshold <= 1.0)) {
    throw ConfigError("positive_threshold must lie in (0, 1]");
  }
  if (labeling.mask.height != grid.source_height || labeling.mask.width != grid.source_width) {
    throw InputError("mask is " + std::to_string(labeling.mask.height) + "x" +
                     std::to_string(labeling.mask.width) + " but image is " +
                     std::to_string(grid.source_height) + "x" + std::to_string(grid.source_width));
  }
  Image mask = labeling.mask;
  if (grid.scaled_height != mask.height || grid.scaled_width != mask.width) {
    mask = resize_bilinear(mask, grid.scaled_height, grid.scaled_width);
    for (auto& v : mask.pixels) v = v >= 0.5 ? 1.0 : 0.0;
  }
  const Image padded = pad_zero(mask, grid.pad);
  const double area = static_cast<double>(grid.region_height) * grid.region_width;
  for (auto& region : grid.regions) {
    int defects = 0;
    for (int r = 0; r < grid.region_height; ++r) {
      for (int c = 0; c < grid.region_width; ++c) {
        if (padded.at(region.row * grid.region_height + r, region.col * grid.region_width + c) > 0.0) {
          ++defects;
        }
      }
    }
    region.defect_fraction = defects / area;
    region.label = region.defect_fraction >= labeling.positive_threshold;
  }
  return grid;
}

Image reassemble_padded(const RegionGrid& grid) {
  if (grid.regions.size() != static_cast<std::size_t>(kRegionCount)) {
    throw StructuralError("grid must hold 81 regions");
  }
  Image out(grid.padded_height(), grid.padded_width());
  for (const auto& region : grid.regions) {
    for (int r = 0; r < grid.region_height; ++r) {
      std::copy_n(&region.pixels.pixels[static_cast<std::size_t>(r) * grid.region_width],
                  grid.region_width,
                  &out.at(region.row * grid.region_height + r, region.col * grid.region_width));
    }
  }
  return out;
}

Image reassemble(const RegionGrid& grid) {
  return crop(reassemble_padded(grid), grid.pad.top, grid.pad.left, grid.scaled_height,
              grid.scaled_width);
}

StitchResult stitch_predictions(const RegionGrid& grid, const std::vector<int>& predictions,
                                const std::vector<double>& confidences) {
  if (predictions.size() != static_cast<std::size_t>(kRegionCount) ||
      confidences.size() != static_cast<std::size_t>(kRegionCount)) {
    throw StructuralError("stitching needs 81 predictions and 81 confidences, got " +
                          std::to_string(predictions.size()) + " and " +
                          std::to_string(confidences.size()));
  }
  RgbImage canvas = to_rgb(reassemble_padded(grid));
  StitchResult result;
  result.records.reserve(kRegionCount);
  for (int i = 0; i < kRegionCount; ++i) {
    const auto& region = grid.regions[i];
    result.records.push_back({region.row, region.col, predictions[i], confidences[i]});
    if (predictions[i] == 0) continue;
    const double conf = std::clamp(confidences[i], 0.0, 1.0);
    const auto red = static_cast<std::uint8_t>(std::lround(64.0 + 191.0 * conf));
    const int r0 = region.row * grid.region_height;
    const int c0 = region.col * grid.region_width;
    const int r1 = r0 + grid.region_height - 1;
    const int c1 = c0 + grid.region_width - 1;
    for (int c = c0; c <= c1; ++c) {
      canvas.set(r0, c, red, 0, 0);
      canvas.set(r1, c, red, 0, 0);
    }
    for (int r = r0; r <= r1; ++r) {
      canvas.set(r, c0, red, 0, 0);
      canvas.set(r, c1, red, 0, 0);
    }
  }
  RgbImage& out = result.annotated;
  out = RgbImage(grid.scaled_height, grid.scaled_width);
  for (int r = 0; r < out.height; ++r) {
    std::copy_n(canvas.px(r + grid.pad.top, grid.pad.left), 3 * out.width, out.px(r, 0));
  }
  return result;
}

std::string format_sidecar(const std::vector<RegionRecord>& records) {
  std::string out;
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g\n", r.row, r.col, r.label, r.confidence);
    out += buf;
  }
  return out;
}

std::vector<RegionRecord> parse_sidecar(const std::string& text) {
  std::vector<RegionRecord> records;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split_fields(line, ',');
    if (f.size() != 4) {
      throw FormatError("sidecar line " + std::to_string(line_no) + ": expected 4 fields");
    }
    try {
      records.push_back({parse_int(f[0], "row"), parse_int(f[1], "col"), parse_int(f[2], "label"),
                         parse_double(f[3], "confidence")});
    } catch (const ConfigError& e) {
      throw FormatError("sidecar line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void write_sidecar(const std::filesystem::path& path, const std::vector<RegionRecord>& records) {
  write_text_atomic(path, format_sidecar(records));
}

std::vector<RegionRecord> read_sidecar(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_sidecar(std::string(bytes.begin(), bytes.end()));
}

std::vector<double> class_weights(const std::vector<int>& labels, int n_classes) {
  if (n_classes < 1) throw ConfigError("class count must be positive");
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= n_classes) throw InputError("label " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  std::vector<double> weights(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw ConfigError("class " + std::to_string(c) +
                        " has no examples; adjust the train/test split or corpus so every "
                        "class is represented");
    }
    weights[c] = static_cast<double>(labels.size()) /
                 (static_cast<double>(n_classes) * static_cast<double>(counts[c]));
  }
  return weights;
}

}  // namespace qv::imaging
