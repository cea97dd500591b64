#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qv/harness/synthetic.hpp"
#include "qv/imaging/grid.hpp"
#include "qv/nn/model_spec.hpp"
#include "qv/nn/train.hpp"
#include "qv/quanv/quanv.hpp"

namespace qv::harness {

enum class Stage { kOne = 1, kTwo = 2 };

/// Either a directory corpus or a synthetic generator; exactly one is set.
struct DatasetSource {
  std::filesystem::path path;
  std::optional<SyntheticCrackSpec> synthetic;
  int synthetic_count = 0;
};

struct ExperimentConfig {
  Stage stage = Stage::kOne;
  DatasetSource dataset;
  std::filesystem::path output_dir = "results";
  std::filesystem::path cache_dir;  // empty: <output_dir>/cache

  // Stage 1: nested train subsets drawn from one shuffled pool, evaluated on
  // a disjoint test set shared by every run.
  std::vector<int> train_counts{100, 50};
  int test_count = 2000;  // 0: every image outside the largest train subset
  int image_size = 32;    // stage-1 images are resized to this square

  // Stage 2: fraction of images used for training in each comparison.
  std::vector<double> splits{0.5, 0.4};
  int region_size = 16;   // regions are resampled to this square if needed
  double positive_threshold = 0.01;
  std::filesystem::path categories;  // empty: built-in table
  double reference_accuracy = 0.978;
  bool class_weighting = false;
  // Min-max stretch each whole image before use. Off for stage 2, where it
  // would make a region's pixels depend on defects elsewhere in the image.
  bool normalize_per_image = true;

  std::uint64_t data_seed = 0;
  std::vector<std::uint64_t> seeds{0};

  quanv::QuanvConfig quanv;
  int dense_units = 32;
  double dropout = 0.0;
  nn::TrainConfig train;  // seed and class_weights are filled per run

  /// Stage defaults: patch 2 / dropout 0 / unweighted / per-image min-max for
  /// stage 1, patch 4 / dropout 0.7 / class-weighted / fixed scaling for stage 2.
  static ExperimentConfig defaults(Stage stage);

  /// Throws ConfigError on any inconsistency.
  void validate() const;

  std::filesystem::path effective_cache_dir() const;
  imaging::CategoryTable category_table() const;

  /// Classifier pair sharing the head; the CNN input is the classical image
  /// or region, the QNN input is its quanvolved tensor.
  nn::ModelSpec cnn_spec() const;
  nn::ModelSpec qnn_spec() const;
};

/// YAML form. Unknown keys are rejected so typos do not silently fall back
/// to defaults. Relative paths are resolved against `base_dir`.
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_yaml(const ExperimentConfig& config);

/// Generator defaults: image_size squares for stage 1, 144x144 images with
/// 3 px cracks for stage 2.
SyntheticCrackSpec default_synthetic(Stage stage, int image_size = 32);

/// Built-in stage-2 category table: 144x144 synthetic images map to
/// themselves, everything else falls back.
imaging::CategoryTable default_categories();

}  // namespace qv::harness
