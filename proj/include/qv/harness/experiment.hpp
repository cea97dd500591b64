#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qv/harness/config.hpp"
#include "qv/harness/synthetic.hpp"
#include "qv/imaging/grid.hpp"
#include "qv/nn/train.hpp"
#include "qv/quanv/quanv.hpp"

namespace qv::harness {

/// Train/test data for one comparison (one train count in stage 1, one
/// split ratio in stage 2). Both models see the same examples in the same
/// order; only the representation differs.
struct GroupData {
  std::string name;  // "n100", "split40", ...
  nn::Dataset cnn_train, cnn_test;
  nn::Dataset qnn_train, qnn_test;
  std::vector<std::string> test_ids;
  std::vector<double> class_weights;  // empty when weighting is off
  std::string test_set_hash;          // hex SHA-256 of ids, labels and pixels
  std::vector<imaging::RegionGrid> test_grids;  // stage 2: one per test image, 81 regions each
};

/// Loads the corpus and quanvolves every example needed by any group
/// (through the on-disk cache). Group data is assembled on demand.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const noexcept { return config_; }
  std::size_t group_count() const;
  GroupData group(std::size_t index) const;
  const quanv::BatchStats& quanv_stats() const noexcept { return stats_; }
  std::size_t corpus_size() const noexcept { return items_.size(); }

 private:
  struct Example {
    std::string id;
    imaging::Image classical;
    std::size_t item = 0;  // index of the source image
    int label = 0;
    double weight = 1.0;
  };

  void prepare_stage1();
  void prepare_stage2();

  ExperimentConfig config_;
  std::vector<LabeledImage> items_;
  std::vector<std::size_t> order_;           // shuffled item indices
  std::vector<imaging::RegionGrid> grids_;   // stage 2, per item
  std::vector<std::vector<std::size_t>> item_examples_;  // item -> example indices
  std::vector<Example> examples_;
  std::vector<quanv::QuantumTensor> quantum_;  // per example, empty if unused
  quanv::BatchStats stats_;
};

struct RunRecord {
  std::string model;  // "qnn" or "cnn"
  std::string group;
  std::uint64_t seed = 0;
  int train_count = 0;
  int test_count = 0;
  std::size_t parameters = 0;
  std::string test_set_hash;
  std::vector<nn::EpochMetrics> history;
  double train_seconds = 0.0;
};

struct Curve {
  std::string model;
  std::string group;
  std::vector<nn::EpochMetrics> mean;  // per epoch, averaged over seeds
  double final_test_accuracy = 0.0;
  double final_test_loss = 0.0;
  /// Variance of the epoch-to-epoch change in test loss, averaged over seeds.
  double test_loss_step_variance = 0.0;
};

struct Localization {
  std::string group;
  std::string model;
  std::string image_id;
  imaging::StitchResult stitched;
};

struct ComparisonReport {
  Stage stage = Stage::kOne;
  int epochs = 0;
  std::vector<std::string> groups;
  std::vector<RunRecord> runs;
  std::vector<Curve> curves;
  std::vector<Localization> localization;
  std::size_t qnn_parameters = 0;
  std::size_t cnn_parameters = 0;
  std::size_t qnn_flatten_width = 0;
  std::size_t cnn_flatten_width = 0;
  std::optional<double> validation_accuracy;  // stage 2: QNN, last split
  std::string validation_group;
  double reference_accuracy = 0.0;
  quanv::BatchStats quanv_stats;
  double total_seconds = 0.0;

  const Curve* find(const std::string& model, const std::string& group) const;
};

/// Trains one model of the pair on a group with the given seed.
nn::TrainResult train_model(const ExperimentConfig& config, const GroupData& data,
                            const std::string& model, std::uint64_t seed);

Curve summarize_runs(const std::vector<const RunRecord*>& runs);

/// Variance of successive differences of the test loss.
double test_loss_step_variance(const std::vector<nn::EpochMetrics>& history);

ComparisonReport run_stage1(const ExperimentConfig& config);
ComparisonReport run_stage2(const ExperimentConfig& config);
ComparisonReport run_experiment(const ExperimentConfig& config);

}  // namespace qv::harness
