#include "qv/nn/adam.hpp"

#include <cmath>

#include "qv/common/error.hpp"

namespace qv::nn {

namespace {

void update(std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
            std::vector<double>& v, const AdamConfig& c, double correction1, double correction2) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    w[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace

void adam_step(TrainedModel& model, const Gradients& gradients, const AdamConfig& config) {
  auto& adam = model.adam;
  if (gradients.size() != model.params.size() || adam.first_moment.size() != model.params.size() ||
      adam.second_moment.size() != model.params.size()) {
    throw StructuralError("gradient layer count does not match the model");
  }
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& p = model.params[i];
    const auto& g = gradients[i];
    if (g.weights.size() != p.weights.size() || g.bias.size() != p.bias.size()) {
      throw StructuralError("gradient shape mismatch at layer " + std::to_string(i));
    }
  }
  ++adam.step;
  const double t = static_cast<double>(adam.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    auto& p = model.params[i];
    update(p.weights, gradients[i].weights, adam.first_moment[i].weights,
           adam.second_moment[i].weights, config, correction1, correction2);
    update(p.bias, gradients[i].bias, adam.first_moment[i].bias, adam.second_moment[i].bias,
           config, correction1, correction2);
  }
}

}  // namespace qv::nn
