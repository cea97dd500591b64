#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qv/imaging/image.hpp"

namespace qv::imaging {

inline constexpr int kGridSize = 9;
inline constexpr int kRegionCount = kGridSize * kGridSize;

/// One row of the category table: images of exactly height x width are
/// brought to target_height x target_width (both multiples of 9), by
/// downscaling when larger and edge-replicated padding when smaller.
struct ResolutionCategory {
  int height = 0;
  int width = 0;
  int target_height = 0;
  int target_width = 0;
  double weight = 1.0;

  std::string name() const;
};

/// Resolution -> geometry lookup. Text form, one row per line:
///   height,width,target,weight            (square target)
///   height,width,target_h x target_w,weight
/// Blank lines, '#' comments and a "height,..." header line are ignored.
class CategoryTable {
 public:
  CategoryTable() = default;
  explicit CategoryTable(std::vector<ResolutionCategory> rows, bool allow_fallback = true);

  static CategoryTable parse(const std::string& text, bool allow_fallback = true);
  static CategoryTable load(const std::filesystem::path& path, bool allow_fallback = true);
  std::string to_text() const;

  const std::vector<ResolutionCategory>& rows() const noexcept { return rows_; }
  bool allow_fallback() const noexcept { return allow_fallback_; }
  void set_allow_fallback(bool allow) noexcept { allow_fallback_ = allow; }

  const ResolutionCategory* find(int height, int width) const;

 private:
  std::vector<ResolutionCategory> rows_;
  bool allow_fallback_ = true;
};

struct Padding {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;
  bool operator==(const Padding&) const = default;
};

struct Region {
  int row = 0;
  int col = 0;
  Image pixels;
  bool label = false;
  double defect_fraction = 0.0;
  double weight = 1.0;
};

struct RegionGrid {
  std::string source_id;
  int source_height = 0;
  int source_width = 0;
  int scaled_height = 0;  // after optional downscale, before padding
  int scaled_width = 0;
  std::string category;   // ResolutionCategory::name() or "fallback"
  bool fallback = false;
  Padding pad;
  int region_height = 0;
  int region_width = 0;
  double weight = 1.0;
  std::vector<Region> regions;  // row-major, 81 entries

  int padded_height() const noexcept { return region_height * kGridSize; }
  int padded_width() const noexcept { return region_width * kGridSize; }
  const Region& at(int row, int col) const { return regions[row * kGridSize + col]; }
  Region& at(int row, int col) { return regions[row * kGridSize + col]; }
};

struct MaskLabeling {
  Image mask;  // nonzero = defect, source resolution
  double positive_threshold = 0.01;
};

RegionGrid split_image(const Image& image, const CategoryTable& categories,
                       std::string source_id = {});

/// Applies the grid's scale and padding to the mask (padding counts as
/// defect-free) and labels each region positive iff its defect fraction is
/// at least the threshold.
RegionGrid label_regions(RegionGrid grid, const MaskLabeling& labeling);

/// Padded canvas rebuilt from the regions.
Image reassemble_padded(const RegionGrid& grid);
/// reassemble_padded() cropped back to the scaled (unpadded) window.
Image reassemble(const RegionGrid& grid);

struct RegionRecord {
  int row = 0;
  int col = 0;
  int label = 0;
  double confidence = 0.0;
  bool operator==(const RegionRecord&) const = default;
};

struct StitchResult {
  RgbImage annotated;  // cropped to the unpadded window
  std::vector<RegionRecord> records;
};

/// Rebuilds the image and outlines every positive region; outline
/// brightness encodes confidence. Negative regions are left untouched.
StitchResult stitch_predictions(const RegionGrid& grid, const std::vector<int>& predictions,
                                const std::vector<double>& confidences);

// Sidecar: one "row,col,label,confidence" line per region.
std::string format_sidecar(const std::vector<RegionRecord>& records);
std::vector<RegionRecord> parse_sidecar(const std::string& text);
void write_sidecar(const std::filesystem::path& path, const std::vector<RegionRecord>& records);
std::vector<RegionRecord> read_sidecar(const std::filesystem::path& path);

/// Inverse-frequency weights N / (C * N_c). Throws ConfigError if any class
/// in [0, n_classes) is absent.
std::vector<double> class_weights(const std::vector<int>& labels, int n_classes = 2);

}  // namespace qv::imaging
