#include "qv/harness/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qv/common/error.hpp"

namespace qv::harness {

namespace {

void check_keys(const YAML::Node& node, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  const auto v = node[key];
  if (!v) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void read_path(const YAML::Node& node, const char* key, std::filesystem::path& out,
               const std::filesystem::path& base, const std::string& where) {
  std::string s;
  read(node, key, s, where);
  if (node[key]) out = resolve(base, s);
}

SyntheticCrackSpec parse_synthetic(const YAML::Node& node, SyntheticCrackSpec spec, int& count) {
  check_keys(node, "dataset.synthetic",
             {"count", "image_size", "crack_probability", "crack_width_px", "crack_waviness",
              "background_noise_level", "seed"});
  const std::string w = "dataset.synthetic";
  read(node, "count", count, w);
  read(node, "image_size", spec.image_size, w);
  read(node, "crack_probability", spec.crack_probability, w);
  read(node, "crack_width_px", spec.crack_width_px, w);
  read(node, "crack_waviness", spec.crack_waviness, w);
  read(node, "background_noise_level", spec.background_noise_level, w);
  read(node, "seed", spec.seed, w);
  return spec;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(Stage stage) {
  ExperimentConfig c;
  c.stage = stage;
  if (stage == Stage::kTwo) {
    c.quanv.patch_size = 4;
    c.quanv.stride = 4;
    c.dropout = 0.7;
    c.class_weighting = true;
    c.normalize_per_image = false;
    c.test_count = 0;
  }
  return c;
}

void ExperimentConfig::validate() const {
  quanv.validate();
  train.validate();
  const bool has_path = !dataset.path.empty();
  if (has_path == dataset.synthetic.has_value()) {
    throw ConfigError("dataset needs exactly one of 'path' or 'synthetic'");
  }
  if (dataset.synthetic) {
    dataset.synthetic->validate();
    if (dataset.synthetic_count <= 0) throw ConfigError("dataset.synthetic.count must be positive");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (dense_units <= 0) throw ConfigError("dense_units must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (stage == Stage::kOne) {
    if (quanv.patch_size != 2 || quanv.stride != 2) {
      throw ConfigError("stage 1 uses 2x2 patches (4 qubits) with stride 2");
    }
    if (train_counts.empty()) throw ConfigError("train_counts must not be empty");
    for (int n : train_counts) {
      if (n <= 0) throw ConfigError("train_counts must be positive");
    }
    if (test_count < 0) throw ConfigError("test_count must be non-negative");
    if (image_size < 8) throw ConfigError("image_size must be at least 8");
    if (dataset.synthetic && dataset.synthetic->image_size != image_size) {
      throw ConfigError("synthetic image_size must equal image_size");
    }
  } else {
    if (quanv.patch_size != 4 || quanv.stride != 4) {
      throw ConfigError("stage 2 uses 4x4 patches (16 qubits) with stride 4");
    }
    if (splits.empty()) throw ConfigError("splits must not be empty");
    for (double s : splits) {
      if (!(s > 0.0 && s < 1.0)) throw ConfigError("splits must lie in (0, 1)");
    }
    if (region_size < quanv.patch_size) throw ConfigError("region_size must be at least the patch size");
    if (!(positive_threshold > 0.0 && positive_threshold <= 1.0)) {
      throw ConfigError("positive_threshold must lie in (0, 1]");
    }
  }
}

std::filesystem::path ExperimentConfig::effective_cache_dir() const {
  return cache_dir.empty() ? output_dir / "cache" : cache_dir;
}

imaging::CategoryTable ExperimentConfig::category_table() const {
  return categories.empty() ? default_categories() : imaging::CategoryTable::load(categories);
}

nn::ModelSpec ExperimentConfig::cnn_spec() const {
  return stage == Stage::kOne ? nn::stage1_cnn(image_size, dense_units, dropout)
                              : nn::stage2_cnn(region_size, dense_units, dropout);
}

nn::ModelSpec ExperimentConfig::qnn_spec() const {
  const int extent = stage == Stage::kOne ? image_size : region_size;
  const int q = quanv::output_extent(extent, quanv.patch_size, quanv.stride);
  const nn::Shape3 shape{q, q, quanv.n_qubits()};
  return stage == Stage::kOne ? nn::stage1_qnn(shape, dense_units, dropout)
                              : nn::stage2_qnn(shape, dense_units, dropout);
}

SyntheticCrackSpec default_synthetic(Stage stage, int image_size) {
  SyntheticCrackSpec s;
  if (stage == Stage::kOne) {
    s.image_size = image_size;
  } else {
    s.image_size = 144;
    s.crack_width_px = 3.0;
    s.crack_probability = 0.7;
  }
  return s;
}

imaging::CategoryTable default_categories() {
  return imaging::CategoryTable({{144, 144, 144, 144, 1.0}}, true);
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!root || root.IsNull()) throw ConfigError("config is empty");
  check_keys(root, "config",
             {"stage", "output_dir", "cache_dir", "dataset", "protocol", "quanv", "model", "train",
              "seeds"});
  int stage = 0;
  read(root, "stage", stage, "config");
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  ExperimentConfig c = ExperimentConfig::defaults(static_cast<Stage>(stage));

  read_path(root, "output_dir", c.output_dir, base_dir, "config");
  read_path(root, "cache_dir", c.cache_dir, base_dir, "config");
  read(root, "seeds", c.seeds, "config");

  if (const auto p = root["protocol"]) {
    const std::string w = "protocol";
    check_keys(p, w,
               {"train_counts", "test_count", "image_size", "splits", "region_size",
                "positive_threshold", "categories", "reference_accuracy", "class_weighting",
                "normalize_per_image", "data_seed"});
    read(p, "train_counts", c.train_counts, w);
    read(p, "test_count", c.test_count, w);
    read(p, "image_size", c.image_size, w);
    read(p, "splits", c.splits, w);
    read(p, "region_size", c.region_size, w);
    read(p, "positive_threshold", c.positive_threshold, w);
    read_path(p, "categories", c.categories, base_dir, w);
    read(p, "reference_accuracy", c.reference_accuracy, w);
    read(p, "class_weighting", c.class_weighting, w);
    read(p, "normalize_per_image", c.normalize_per_image, w);
    read(p, "data_seed", c.data_seed, w);
  }
  if (const auto d = root["dataset"]) {
    check_keys(d, "dataset", {"path", "synthetic"});
    read_path(d, "path", c.dataset.path, base_dir, "dataset");
    if (d["synthetic"]) {
      c.dataset.synthetic = parse_synthetic(d["synthetic"], default_synthetic(c.stage, c.image_size),
                                            c.dataset.synthetic_count);
    }
  }
  if (const auto q = root["quanv"]) {
    check_keys(q, "quanv", {"patch_size", "stride", "random_layers", "seed"});
    read(q, "patch_size", c.quanv.patch_size, "quanv");
    read(q, "stride", c.quanv.stride, "quanv");
    read(q, "random_layers", c.quanv.n_random_layers, "quanv");
    read(q, "seed", c.quanv.seed, "quanv");
  }
  if (const auto m = root["model"]) {
    check_keys(m, "model", {"dense_units", "dropout"});
    read(m, "dense_units", c.dense_units, "model");
    read(m, "dropout", c.dropout, "model");
  }
  if (const auto t = root["train"]) {
    const std::string w = "train";
    check_keys(t, w, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon",
                      "eval_batch_size"});
    read(t, "epochs", c.train.epochs, w);
    read(t, "batch_size", c.train.batch_size, w);
    read(t, "learning_rate", c.train.adam.learning_rate, w);
    read(t, "beta1", c.train.adam.beta1, w);
    read(t, "beta2", c.train.adam.beta2, w);
    read(t, "epsilon", c.train.adam.epsilon, w);
    read(t, "eval_batch_size", c.train.eval_batch_size, w);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string to_yaml(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "stage" << YAML::Value << static_cast<int>(c.stage);
  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir.string();
  if (!c.cache_dir.empty()) out << YAML::Key << "cache_dir" << YAML::Value << c.cache_dir.string();
  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  if (c.dataset.synthetic) {
    const auto& s = *c.dataset.synthetic;
    out << YAML::Key << "synthetic" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "count" << YAML::Value << c.dataset.synthetic_count;
    out << YAML::Key << "image_size" << YAML::Value << s.image_size;
    out << YAML::Key << "crack_probability" << YAML::Value << s.crack_probability;
    out << YAML::Key << "crack_width_px" << YAML::Value << s.crack_width_px;
    out << YAML::Key << "crack_waviness" << YAML::Value << s.crack_waviness;
    out << YAML::Key << "background_noise_level" << YAML::Value << s.background_noise_level;
    out << YAML::Key << "seed" << YAML::Value << s.seed;
    out << YAML::EndMap;
  } else {
    out << YAML::Key << "path" << YAML::Value << c.dataset.path.string();
  }
  out << YAML::EndMap;
  out << YAML::Key << "protocol" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "train_counts" << YAML::Value << YAML::Flow << c.train_counts;
  out << YAML::Key << "test_count" << YAML::Value << c.test_count;
  out << YAML::Key << "image_size" << YAML::Value << c.image_size;
  out << YAML::Key << "splits" << YAML::Value << YAML::Flow << c.splits;
  out << YAML::Key << "region_size" << YAML::Value << c.region_size;
  out << YAML::Key << "positive_threshold" << YAML::Value << c.positive_threshold;
  if (!c.categories.empty()) out << YAML::Key << "categories" << YAML::Value << c.categories.string();
  out << YAML::Key << "reference_accuracy" << YAML::Value << c.reference_accuracy;
  out << YAML::Key << "class_weighting" << YAML::Value << c.class_weighting;
  out << YAML::Key << "normalize_per_image" << YAML::Value << c.normalize_per_image;
  out << YAML::Key << "data_seed" << YAML::Value << c.data_seed;
  out << YAML::EndMap;
  out << YAML::Key << "quanv" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "patch_size" << YAML::Value << c.quanv.patch_size;
  out << YAML::Key << "stride" << YAML::Value << c.quanv.stride;
  out << YAML::Key << "random_layers" << YAML::Value << c.quanv.n_random_layers;
  out << YAML::Key << "seed" << YAML::Value << c.quanv.seed;
  out << YAML::EndMap;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dense_units" << YAML::Value << c.dense_units;
  out << YAML::Key << "dropout" << YAML::Value << c.dropout;
  out << YAML::EndMap;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "epochs" << YAML::Value << c.train.epochs;
  out << YAML::Key << "batch_size" << YAML::Value << c.train.batch_size;
  out << YAML::Key << "learning_rate" << YAML::Value << c.train.adam.learning_rate;
  out << YAML::Key << "beta1" << YAML::Value << c.train.adam.beta1;
  out << YAML::Key << "beta2" << YAML::Value << c.train.adam.beta2;
  out << YAML::Key << "epsilon" << YAML::Value << c.train.adam.epsilon;
  out << YAML::Key << "eval_batch_size" << YAML::Value << c.train.eval_batch_size;
  out << YAML::EndMap;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << c.seeds;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace qv::harness
