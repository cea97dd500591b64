#include "qv/harness/experiment.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <variant>

#include "qv/common/binary_io.hpp"
#include "qv/common/error.hpp"
#include "qv/common/rng.hpp"
#include "qv/harness/dataset.hpp"

namespace qv::harness {

namespace {

constexpr std::uint64_t kOrderTag = 0x0D0E;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string split_name(double ratio) {
  return "split" + std::to_string(static_cast<int>(std::lround(ratio * 100)));
}

nn::Dataset make_dataset(nn::Shape3 shape) {
  nn::Dataset d;
  d.shape = shape;
  return d;
}

}  // namespace

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto start = Clock::now();
  items_ = load_corpus(config_);
  spdlog::info("loaded {} images", items_.size());
  order_.resize(items_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  SplitMix64 rng(derive_seed(config_.data_seed, kOrderTag));
  rng.shuffle(std::span<std::size_t>(order_));

  if (config_.stage == Stage::kOne) {
    prepare_stage1();
  } else {
    prepare_stage2();
  }

  std::vector<imaging::Image> images;
  std::vector<std::string> ids;
  std::vector<std::size_t> which;
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    if (examples_[i].classical.empty()) continue;
    images.push_back(examples_[i].classical);
    ids.push_back(examples_[i].id);
    which.push_back(i);
  }
  auto batch = quanv::quanvolve_batch(images, ids, config_.quanv, config_.effective_cache_dir());
  stats_ = batch.stats;
  quantum_.resize(examples_.size());
  for (std::size_t k = 0; k < which.size(); ++k) quantum_[which[k]] = std::move(batch.tensors[k]);
  spdlog::info("quanvolved {} examples ({} cached, {} computed) in {:.1f}s", which.size(),
               stats_.cache_hits, stats_.computed, seconds_since(start));
}

void Experiment::prepare_stage1() {
  const int max_train = *std::max_element(config_.train_counts.begin(), config_.train_counts.end());
  const std::size_t n = items_.size();
  const std::size_t need = static_cast<std::size_t>(max_train) + std::max(config_.test_count, 1);
  if (n < need) {
    throw InputError("corpus has " + std::to_string(n) + " images but the protocol needs " +
                     std::to_string(need));
  }
  const std::size_t used = config_.test_count == 0 ? n : need;
  examples_.resize(n);
  item_examples_.assign(n, {});
  for (std::size_t k = 0; k < used; ++k) {
    const std::size_t i = order_[k];
    auto& item = items_[i];
    Example& ex = examples_[i];
    ex.id = item.id;
    ex.item = i;
    ex.label = item.label;
    ex.classical = item.image.height == config_.image_size && item.image.width == config_.image_size
                       ? item.image
                       : imaging::resize_bilinear(item.image, config_.image_size, config_.image_size);
    // Both models see the same pixels.
    if (config_.normalize_per_image) ex.classical = imaging::min_max_normalize(ex.classical);
    item_examples_[i] = {i};
  }
}

void Experiment::prepare_stage2() {
  const auto categories = config_.category_table();
  const int rs = config_.region_size;
  item_examples_.resize(items_.size());
  grids_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& item = items_[i];
    if (item.mask.empty()) throw InputError("stage 2 needs a mask for " + item.id);
    const auto image = config_.normalize_per_image ? imaging::min_max_normalize(item.image) : item.image;
    auto grid = imaging::label_regions(imaging::split_image(image, categories, item.id),
                                       {item.mask, config_.positive_threshold});
    for (const auto& region : grid.regions) {
      Example ex;
      ex.id = item.id + "#r" + std::to_string(region.row) + "c" + std::to_string(region.col);
      ex.item = i;
      ex.label = region.label ? 1 : 0;
      ex.weight = region.weight;
      ex.classical = region.pixels.height == rs && region.pixels.width == rs
                         ? region.pixels
                         : imaging::resize_bilinear(region.pixels, rs, rs);
      item_examples_[i].push_back(examples_.size());
      examples_.push_back(std::move(ex));
    }
    grids_.push_back(std::move(grid));
  }
  if (items_.size() < 2) throw InputError("stage 2 needs at least two images");
}

std::size_t Experiment::group_count() const {
  return config_.stage == Stage::kOne ? config_.train_counts.size() : config_.splits.size();
}

GroupData Experiment::group(std::size_t index) const {
  if (index >= group_count()) throw ConfigError("group index out of range");
  GroupData g;
  std::vector<std::size_t> train_items, test_items;
  const std::size_t n = items_.size();
  if (config_.stage == Stage::kOne) {
    const int count = config_.train_counts[index];
    const std::size_t max_train = static_cast<std::size_t>(
        *std::max_element(config_.train_counts.begin(), config_.train_counts.end()));
    g.name = "n" + std::to_string(count);
    train_items.assign(order_.begin(), order_.begin() + count);
    const std::size_t test_end =
        config_.test_count == 0 ? n : max_train + static_cast<std::size_t>(config_.test_count);
    test_items.assign(order_.begin() + static_cast<std::ptrdiff_t>(max_train),
                      order_.begin() + static_cast<std::ptrdiff_t>(test_end));
  } else {
    const double ratio = config_.splits[index];
    g.name = split_name(ratio);
    const auto n_train = static_cast<std::size_t>(
        std::clamp<long>(std::lround(ratio * static_cast<double>(n)), 1, static_cast<long>(n) - 1));
    train_items.assign(order_.begin(), order_.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_items.assign(order_.begin() + static_cast<std::ptrdiff_t>(n_train), order_.end());
    for (std::size_t i : test_items) g.test_grids.push_back(grids_[i]);
  }

  const nn::Shape3 cnn_shape = config_.cnn_spec().input_shape;
  const nn::Shape3 qnn_shape = config_.qnn_spec().input_shape;
  g.cnn_train = g.cnn_test = make_dataset(cnn_shape);
  g.qnn_train = g.qnn_test = make_dataset(qnn_shape);
  ByteWriter hash_input;
  auto append = [&](const std::vector<std::size_t>& items, nn::Dataset& cnn, nn::Dataset& qnn, bool test) {
    for (std::size_t item : items) {
      for (std::size_t e : item_examples_[item]) {
        const Example& ex = examples_[e];
        cnn.add(ex.classical.pixels, ex.label, ex.weight);
        qnn.add(quantum_[e].values, ex.label, ex.weight);
        if (test) {
          g.test_ids.push_back(ex.id);
          hash_input.str(ex.id);
          hash_input.put(static_cast<std::int32_t>(ex.label));
          for (double v : ex.classical.pixels) hash_input.f64(v);
        }
      }
    }
  };
  append(train_items, g.cnn_train, g.qnn_train, false);
  append(test_items, g.cnn_test, g.qnn_test, true);
  const auto digest = sha256(hash_input.data());
  g.test_set_hash = to_hex(digest.data(), digest.size());

  if (config_.class_weighting) {
    try {
      g.class_weights = imaging::class_weights(g.cnn_train.labels);
    } catch (const ConfigError& e) {
      throw InputError("group " + g.name + ": " + e.what());
    }
  }
  return g;
}

const Curve* ComparisonReport::find(const std::string& model, const std::string& group) const {
  for (const auto& c : curves) {
    if (c.model == model && c.group == group) return &c;
  }
  return nullptr;
}

nn::TrainResult train_model(const ExperimentConfig& config, const GroupData& data,
                            const std::string& model, std::uint64_t seed) {
  const bool quantum = model == "qnn";
  if (!quantum && model != "cnn") throw ConfigError("model must be 'qnn' or 'cnn', got '" + model + "'");
  nn::ModelSpec spec = quantum ? config.qnn_spec() : config.cnn_spec();
  spec.rng_seed = seed;
  nn::TrainConfig tc = config.train;
  tc.seed = seed;
  tc.class_weights = data.class_weights;
  const auto& train_set = quantum ? data.qnn_train : data.cnn_train;
  const auto& test_set = quantum ? data.qnn_test : data.cnn_test;
  return nn::train(spec, train_set, test_set, tc, [&](const nn::EpochMetrics& m) {
    spdlog::debug("{} {} seed {} epoch {}: loss {:.4f} acc {:.4f} test loss {:.4f} acc {:.4f}", model,
                  data.name, seed, m.epoch, m.train_loss, m.train_accuracy, m.test_loss, m.test_accuracy);
  });
}

double test_loss_step_variance(const std::vector<nn::EpochMetrics>& history) {
  if (history.size() < 3) return 0.0;
  std::vector<double> steps;
  for (std::size_t i = 1; i < history.size(); ++i) {
    steps.push_back(history[i].test_loss - history[i - 1].test_loss);
  }
  const double mean = std::accumulate(steps.begin(), steps.end(), 0.0) / static_cast<double>(steps.size());
  double var = 0.0;
  for (double s : steps) var += (s - mean) * (s - mean);
  return var / static_cast<double>(steps.size());
}

Curve summarize_runs(const std::vector<const RunRecord*>& runs) {
  Curve c;
  if (runs.empty()) return c;
  c.model = runs.front()->model;
  c.group = runs.front()->group;
  const std::size_t epochs = runs.front()->history.size();
  c.mean.resize(epochs);
  const double k = static_cast<double>(runs.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    auto& m = c.mean[e];
    m.epoch = static_cast<int>(e + 1);
    for (const auto* r : runs) {
      const auto& h = r->history.at(e);
      m.train_loss += h.train_loss / k;
      m.train_accuracy += h.train_accuracy / k;
      m.test_loss += h.test_loss / k;
      m.test_accuracy += h.test_accuracy / k;
    }
  }
  for (const auto* r : runs) c.test_loss_step_variance += test_loss_step_variance(r->history) / k;
  if (!c.mean.empty()) {
    c.final_test_accuracy = c.mean.back().test_accuracy;
    c.final_test_loss = c.mean.back().test_loss;
  }
  return c;
}

namespace {

ComparisonReport run_protocol(const ExperimentConfig& config) {
  const auto start = Clock::now();
  Experiment exp(config);
  ComparisonReport report;
  report.stage = config.stage;
  report.epochs = config.train.epochs;
  report.reference_accuracy = config.reference_accuracy;
  report.quanv_stats = exp.quanv_stats();
  const auto qnn_count = nn::count_parameters(config.qnn_spec());
  const auto cnn_count = nn::count_parameters(config.cnn_spec());
  report.qnn_parameters = qnn_count.total;
  report.cnn_parameters = cnn_count.total;
  report.qnn_flatten_width = qnn_count.flatten_width;
  report.cnn_flatten_width = cnn_count.flatten_width;
  spdlog::info("qnn: input {}, flatten {}, {} parameters", config.qnn_spec().input_shape.str(),
               qnn_count.flatten_width, qnn_count.total);
  spdlog::info("cnn: input {}, flatten {}, {} parameters", config.cnn_spec().input_shape.str(),
               cnn_count.flatten_width, cnn_count.total);
  if (config.stage == Stage::kOne) {
    // Same QNN with 14 first-layer filters, the count one would get by
    // matching the filter count to the convolution output extent.
    auto narrow = config.qnn_spec();
    std::get<nn::Conv2D>(narrow.layers.front()).filters = 14;
    const auto alt = nn::count_parameters(narrow);
    spdlog::info("qnn with 14 filters would have flatten {}, {} parameters", alt.flatten_width, alt.total);
  }

  for (std::size_t gi = 0; gi < exp.group_count(); ++gi) {
    const GroupData data = exp.group(gi);
    report.groups.push_back(data.name);
    spdlog::info("group {}: {} train / {} test examples", data.name, data.cnn_train.size(),
                 data.cnn_test.size());
    for (std::size_t si = 0; si < config.seeds.size(); ++si) {
      const std::uint64_t seed = config.seeds[si];
      for (const std::string model : {"qnn", "cnn"}) {
        auto result = train_model(config, data, model, seed);
        RunRecord run;
        run.model = model;
        run.group = data.name;
        run.seed = seed;
        run.train_count = static_cast<int>(data.cnn_train.size());
        run.test_count = static_cast<int>(data.cnn_test.size());
        run.parameters = result.model.parameter_count();
        run.test_set_hash = data.test_set_hash;
        run.history = result.history;
        run.train_seconds = result.seconds;
        spdlog::info("{} {} seed {}: final test accuracy {:.4f} ({:.1f}s)", model, data.name, seed,
                     run.history.back().test_accuracy, run.train_seconds);
        report.runs.push_back(std::move(run));

        if (config.stage == Stage::kTwo && si == 0) {
          const auto& test_set = model == "qnn" ? data.qnn_test : data.cnn_test;
          const auto ev = nn::evaluate(result.model, test_set, {}, false, config.train.eval_batch_size);
          std::size_t offset = 0;
          for (const auto& grid : data.test_grids) {
            const std::size_t count = grid.regions.size();
            const std::vector<int> preds(ev.predictions.begin() + offset, ev.predictions.begin() + offset + count);
            const std::vector<double> conf(ev.confidences.begin() + offset,
                                           ev.confidences.begin() + offset + count);
            offset += count;
            report.localization.push_back(
                {data.name, model, grid.source_id, imaging::stitch_predictions(grid, preds, conf)});
          }
        }
      }
    }
    for (const std::string model : {"qnn", "cnn"}) {
      std::vector<const RunRecord*> runs;
      for (const auto& r : report.runs) {
        if (r.model == model && r.group == data.name) runs.push_back(&r);
      }
      report.curves.push_back(summarize_runs(runs));
    }
  }
  if (config.stage == Stage::kTwo) {
    report.validation_group = report.groups.back();
    report.validation_accuracy = report.find("qnn", report.validation_group)->final_test_accuracy;
    spdlog::info("QNN validation accuracy ({}): {:.4f} (reference {:.3f})", report.validation_group,
                 *report.validation_accuracy, report.reference_accuracy);
  }
  report.total_seconds = seconds_since(start);
  return report;
}

}  // namespace

ComparisonReport run_stage1(const ExperimentConfig& config) {
  if (config.stage != Stage::kOne) throw ConfigError("run_stage1 needs a stage 1 config");
  return run_protocol(config);
}

ComparisonReport run_stage2(const ExperimentConfig& config) {
  if (config.stage != Stage::kTwo) throw ConfigError("run_stage2 needs a stage 2 config");
  return run_protocol(config);
}

ComparisonReport run_experiment(const ExperimentConfig& config) { return run_protocol(config); }

}  // namespace qv::harness
