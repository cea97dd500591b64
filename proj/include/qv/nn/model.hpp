#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qv/nn/model_spec.hpp"
#include "qv/nn/tensor.hpp"

namespace qv::nn {

inline constexpr double kProbabilityFloor = 1e-12;

/// Weights of one layer; empty for parameter-free layers.
/// Conv2D weights are laid out [ky][kx][in_channel][filter], Dense weights
/// [input][unit].
struct LayerParams {
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t size() const noexcept { return weights.size() + bias.size(); }
  bool operator==(const LayerParams&) const = default;
};

using Gradients = std::vector<LayerParams>;

struct AdamState {
  std::vector<LayerParams> first_moment;
  std::vector<LayerParams> second_moment;
  std::uint64_t step = 0;
  bool operator==(const AdamState&) const = default;
};

struct TrainedModel {
  ModelSpec spec;
  std::vector<LayerParams> params;  // one entry per layer
  AdamState adam;

  /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases, zero moments.
  static TrainedModel initialize(const ModelSpec& spec, std::uint64_t seed);

  std::size_t parameter_count() const noexcept;
  bool operator==(const TrainedModel&) const = default;
};

/// Class probabilities, shape (batch, 1, 1, n_classes). Dropout is only
/// active when `training` is set, with masks drawn from `dropout_seed`.
/// Throws StructuralError on a shape mismatch and NumericError, naming the
/// layer, on a non-finite activation.
Tensor4 forward(const TrainedModel& model, const Tensor4& batch, bool training = false,
                std::uint64_t dropout_seed = 0);

/// Mean over the batch of -w_y * s_i * log(max(p_y, 1e-12)). Empty
/// `class_weights` / `sample_weights` mean all ones.
double loss(const Tensor4& probs, std::span<const int> labels,
            std::span<const double> class_weights = {},
            std::span<const double> sample_weights = {});

struct BackwardResult {
  Gradients gradients;
  double loss = 0.0;
  Tensor4 probabilities;
};

/// Exact gradient of loss() with respect to every parameter, for one
/// training-mode pass with dropout masks drawn from `dropout_seed`.
BackwardResult backward(const TrainedModel& model, const Tensor4& batch,
                        std::span<const int> labels, std::span<const double> class_weights = {},
                        std::uint64_t dropout_seed = 0,
                        std::span<const double> sample_weights = {});

}  // namespace qv::nn
