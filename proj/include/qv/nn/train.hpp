#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "qv/nn/adam.hpp"
#include "qv/nn/model.hpp"

namespace qv::nn {

/// Labelled examples of a single shape, stored contiguously.
struct Dataset {
  Shape3 shape;
  std::vector<double> values;
  std::vector<int> labels;
  std::vector<double> sample_weights;  // empty means all ones

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }

  /// Appends one example; its length must equal shape.size().
  void add(std::span<const double> example, int label, double sample_weight = 1.0);

  Tensor4 gather(std::span<const std::size_t> indices) const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  AdamConfig adam;
  std::vector<double> class_weights;  // empty means unweighted
  std::uint64_t seed = 0;
  int eval_batch_size = 50;  // evaluation only; does not affect results

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // weighted objective, inference mode
  double train_accuracy = 0.0;
  double test_loss = 0.0;  // unweighted
  double test_accuracy = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
  std::vector<double> confidences;  // probability of the predicted class
};

/// Inference-mode evaluation; argmax prediction, ties go to class 0.
Evaluation evaluate(const TrainedModel& model, const Dataset& data,
                    std::span<const double> class_weights = {}, bool use_sample_weights = false,
                    int batch_size = 50);

struct TrainResult {
  TrainedModel model;
  std::vector<EpochMetrics> history;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Mini-batch Adam. Initialization, shuffling and dropout masks are all
/// derived from config.seed (mixed with spec.rng_seed for initialization),
/// so equal inputs give bit-identical models and histories. An empty test
/// set yields NaN test metrics.
TrainResult train(const ModelSpec& spec, const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Metrics text: one "epoch,train_loss,train_acc,test_loss,test_acc" line per
// epoch, values printed with 17 significant digits.
std::string format_metrics(const std::vector<EpochMetrics>& history);
std::vector<EpochMetrics> parse_metrics(const std::string& text);
void write_metrics(const std::filesystem::path& path, const std::vector<EpochMetrics>& history);
std::vector<EpochMetrics> read_metrics(const std::filesystem::path& path);

}  // namespace qv::nn
