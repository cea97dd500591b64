#include "qv/nn/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "qv/common/binary_io.hpp"
#include "qv/common/error.hpp"
#include "qv/common/rng.hpp"

namespace qv::nn {

namespace {

constexpr std::uint64_t kInitTag = 1;
constexpr std::uint64_t kShuffleTag = 2;
constexpr std::uint64_t kDropoutTag = 3;

int argmax_row(const double* row, int classes) {
  int best = 0;
  for (int c = 1; c < classes; ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

}  // namespace

void Dataset::add(std::span<const double> example, int label, double sample_weight) {
  if (example.size() != shape.size()) {
    throw StructuralError("example has " + std::to_string(example.size()) +
                          " values, dataset shape " + shape.str() + " needs " +
                          std::to_string(shape.size()));
  }
  values.insert(values.end(), example.begin(), example.end());
  labels.push_back(label);
  if (!sample_weights.empty() || sample_weight != 1.0) {
    sample_weights.resize(labels.size() - 1, 1.0);
    sample_weights.push_back(sample_weight);
  }
}

Tensor4 Dataset::gather(std::span<const std::size_t> indices) const {
  Tensor4 out(static_cast<int>(indices.size()), shape);
  const std::size_t n = shape.size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(values.data() + indices[i] * n, n, out.values.data() + i * n);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.shape = shape;
  const std::size_t n = shape.size();
  out.values.reserve(indices.size() * n);
  for (std::size_t idx : indices) {
    out.values.insert(out.values.end(), values.begin() + idx * n, values.begin() + (idx + 1) * n);
    out.labels.push_back(labels[idx]);
    if (!sample_weights.empty()) out.sample_weights.push_back(sample_weights[idx]);
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (eval_batch_size <= 0) throw ConfigError("eval_batch_size must be positive");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0) || !(adam.beta2 > 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in (0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  for (double w : class_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("class weights must be positive");
  }
}

Evaluation evaluate(const TrainedModel& model, const Dataset& data,
                    std::span<const double> class_weights, bool use_sample_weights,
                    int batch_size) {
  Evaluation ev;
  if (data.empty()) {
    ev.loss = ev.accuracy = std::numeric_limits<double>::quiet_NaN();
    return ev;
  }
  const int classes = model.spec.n_classes;
  std::vector<std::size_t> idx;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor4 probs = forward(model, data.gather(idx), false);
    const std::span<const int> labels(data.labels.data() + start, end - start);
    std::span<const double> weights;
    if (use_sample_weights && !data.sample_weights.empty()) {
      weights = std::span<const double>(data.sample_weights.data() + start, end - start);
    }
    loss_sum += loss(probs, labels, class_weights, weights) * static_cast<double>(end - start);
    for (int n = 0; n < probs.batch; ++n) {
      const int pred = argmax_row(probs.example(n), classes);
      ev.predictions.push_back(pred);
      ev.confidences.push_back(probs.example(n)[pred]);
      if (pred == labels[n]) ++correct;
    }
  }
  ev.loss = loss_sum / static_cast<double>(data.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return ev;
}

TrainResult train(const ModelSpec& spec, const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  spec.validate();
  if (train_set.empty()) throw InputError("training set is empty");
  if (train_set.shape != spec.input_shape) {
    throw StructuralError("training data shape " + train_set.shape.str() +
                          " does not match model input " + spec.input_shape.str());
  }
  if (!test_set.empty() && test_set.shape != spec.input_shape) {
    throw StructuralError("test data shape " + test_set.shape.str() +
                          " does not match model input " + spec.input_shape.str());
  }
  if (!config.class_weights.empty()) {
    if (config.class_weights.size() != static_cast<std::size_t>(spec.n_classes)) {
      throw ConfigError("expected " + std::to_string(spec.n_classes) + " class weights");
    }
    for (int c = 0; c < spec.n_classes; ++c) {
      if (std::find(train_set.labels.begin(), train_set.labels.end(), c) == train_set.labels.end()) {
        throw InputError("class " + std::to_string(c) +
                         " is missing from the training set but class weighting is enabled");
      }
    }
  }

  TrainResult result;
  result.model = TrainedModel::initialize(spec, derive_seed(config.seed ^ spec.rng_seed, kInitTag));
  SplitMix64 shuffler(derive_seed(config.seed, kShuffleTag));
  const std::uint64_t dropout_root = derive_seed(config.seed, kDropoutTag);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> labels;
  std::vector<double> weights;
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffler.shuffle(std::span<std::size_t>(order));
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> idx(order.data() + b, e - b);
      labels.clear();
      weights.clear();
      for (std::size_t i : idx) {
        labels.push_back(train_set.labels[i]);
        if (!train_set.sample_weights.empty()) weights.push_back(train_set.sample_weights[i]);
      }
      const auto grads = backward(result.model, train_set.gather(idx), labels, config.class_weights,
                                  derive_seed(dropout_root, step++), weights);
      adam_step(result.model, grads.gradients, config.adam);
    }
    EpochMetrics m;
    m.epoch = epoch;
    const auto tr = evaluate(result.model, train_set, config.class_weights, true, config.eval_batch_size);
    const auto te = evaluate(result.model, test_set, {}, false, config.eval_batch_size);
    m.train_loss = tr.loss;
    m.train_accuracy = tr.accuracy;
    m.test_loss = te.loss;
    m.test_accuracy = te.accuracy;
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string format_metrics(const std::vector<EpochMetrics>& history) {
  std::string out;
  char buf[256];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", m.epoch, m.train_loss,
                  m.train_accuracy, m.test_loss, m.test_accuracy);
    out += buf;
  }
  return out;
}

std::vector<EpochMetrics> parse_metrics(const std::string& text) {
  std::vector<EpochMetrics> out;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochMetrics m;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf%c", &m.epoch, &m.train_loss,
                    &m.train_accuracy, &m.test_loss, &m.test_accuracy, &tail) != 5) {
      throw FormatError("bad metrics line: '" + line + "'");
    }
    out.push_back(m);
  }
  return out;
}

void write_metrics(const std::filesystem::path& path, const std::vector<EpochMetrics>& history) {
  write_text_atomic(path, format_metrics(history));
}

std::vector<EpochMetrics> read_metrics(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_metrics(std::string(bytes.begin(), bytes.end()));
}

}  // namespace qv::nn
