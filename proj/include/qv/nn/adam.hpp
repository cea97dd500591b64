#pragma once

#include "qv/nn/model.hpp"

namespace qv::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam (Kingma & Ba):
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,  t <- t + 1
///   w <- w - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Throws StructuralError if the gradient layout does not match the model.
void adam_step(TrainedModel& model, const Gradients& gradients, const AdamConfig& config);

}  // namespace qv::nn
