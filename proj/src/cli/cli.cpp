#include "qv/cli/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qv/common/binary_io.hpp"
#include "qv/common/error.hpp"
#include "qv/common/log.hpp"
#include "qv/harness/config.hpp"
#include "qv/harness/dataset.hpp"
#include "qv/harness/experiment.hpp"
#include "qv/harness/report.hpp"
#include "qv/imaging/grid.hpp"
#include "qv/nn/checkpoint.hpp"

namespace qv::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  int verbosity = 0;
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 0;
  std::string cache_dir;
  std::string output_dir;
  int train_count = 0;
  double split = 0.0;

  std::string model = "qnn";
  std::string checkpoint;
  int stage = 1;
  int count = 0;
  int image_size = 0;
  int patch_size = 2;
  int layers = 4;
  std::vector<std::string> inputs;
  std::string image;
  std::string mask;
  double threshold = 0.01;
  std::string categories;
  std::string predictions;
  std::string output;
};

// Flags shared by every experiment subcommand; each maps onto one config field.
void add_experiment_flags(CLI::App* sub, Options& o, bool with_train_count, bool with_split) {
  sub->add_option("-c,--config", o.config, "Experiment config file (YAML)")->required()->check(CLI::ExistingFile);
  auto* seed = sub->add_option("--seed", o.seed, "Run a single training seed");
  auto* seeds = sub->add_option("--seeds", o.seeds, "Training seeds, comma separated")->delimiter(',');
  seed->excludes(seeds);
  seeds->excludes(seed);
  sub->add_option("--cache-dir", o.cache_dir, "Quanvolution cache directory (overrides QV_CACHE_DIR)");
  sub->add_option("-o,--output-dir", o.output_dir, "Directory for results");
  if (with_train_count) {
    sub->add_option("--train-count", o.train_count, "Stage 1: single training-set size")->check(CLI::PositiveNumber);
  }
  if (with_split) {
    sub->add_option("--split", o.split, "Stage 2: single train fraction in (0, 1)")->check(CLI::Range(0.0, 1.0));
  }
}

harness::ExperimentConfig resolve_config(const Options& o, CLI::App* sub) {
  auto cfg = harness::load_config(o.config);
  if (const char* env = std::getenv("QV_CACHE_DIR"); env && *env) cfg.cache_dir = env;
  if (sub->count("--cache-dir")) cfg.cache_dir = o.cache_dir;
  if (sub->count("--output-dir")) cfg.output_dir = o.output_dir;
  if (sub->count("--seed")) cfg.seeds = {o.seed};
  if (sub->count("--seeds")) cfg.seeds = o.seeds;
  if (sub->get_option_no_throw("--train-count") && sub->count("--train-count")) {
    if (cfg.stage != harness::Stage::kOne) throw ConfigError("--train-count applies to stage 1 configs");
    cfg.train_counts = {o.train_count};
  }
  if (sub->get_option_no_throw("--split") && sub->count("--split")) {
    if (cfg.stage != harness::Stage::kTwo) throw ConfigError("--split applies to stage 2 configs");
    cfg.splits = {o.split};
  }
  cfg.validate();
  return cfg;
}

void write_config_copy(const harness::ExperimentConfig& cfg) {
  write_text_atomic(cfg.output_dir / "config.yaml", harness::to_yaml(cfg));
}

int cmd_stage(const Options& o, CLI::App* sub, harness::Stage stage, std::ostream& out) {
  const auto cfg = resolve_config(o, sub);
  if (cfg.stage != stage) {
    throw ConfigError("config is for stage " + std::to_string(static_cast<int>(cfg.stage)) +
                      ", not stage " + std::to_string(static_cast<int>(stage)));
  }
  const auto report = harness::run_experiment(cfg);
  harness::emit_report(report, cfg.output_dir);
  write_config_copy(cfg);
  for (const auto& c : report.curves) {
    out << c.group << " " << c.model << " final test accuracy " << c.final_test_accuracy << "\n";
  }
  if (report.validation_accuracy) {
    out << "validation accuracy " << *report.validation_accuracy << " (reference "
        << report.reference_accuracy << ")\n";
  }
  out << "report written to " << cfg.output_dir.string() << "\n";
  return 0;
}

int cmd_train(const Options& o, CLI::App* sub, std::ostream& out) {
  auto cfg = resolve_config(o, sub);
  if (cfg.seeds.size() != 1) throw ConfigError("train runs one seed; pass --seed");
  const harness::Experiment exp(cfg);
  const auto data = exp.group(0);
  const auto result = harness::train_model(cfg, data, o.model, cfg.seeds.front());
  nn::save_model(cfg.output_dir / "model.qvmd", result.model);
  nn::write_metrics(cfg.output_dir / "metrics.csv", result.history);
  write_config_copy(cfg);
  out << o.model << " " << data.name << " final test accuracy " << result.history.back().test_accuracy << "\n";
  return 0;
}

int cmd_evaluate(const Options& o, CLI::App* sub, std::ostream& out) {
  const auto cfg = resolve_config(o, sub);
  const auto model = nn::load_model(o.checkpoint);
  const harness::Experiment exp(cfg);
  const auto data = exp.group(0);
  const nn::Dataset* test = nullptr;
  if (model.spec.input_shape == data.qnn_test.shape) test = &data.qnn_test;
  if (model.spec.input_shape == data.cnn_test.shape) test = &data.cnn_test;
  if (!test) {
    throw InputError("checkpoint input " + model.spec.input_shape.str() + " matches neither test set");
  }
  const auto ev = nn::evaluate(model, *test, {}, false, cfg.train.eval_batch_size);
  std::ostringstream csv;
  csv << "id,label,prediction,confidence\n";
  char buf[64];
  for (std::size_t i = 0; i < ev.predictions.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", ev.confidences[i]);
    csv << data.test_ids[i] << "," << test->labels[i] << "," << ev.predictions[i] << "," << buf << "\n";
  }
  write_text_atomic(cfg.output_dir / "predictions.csv", csv.str());
  std::snprintf(buf, sizeof buf, "%.17g", ev.accuracy);
  std::string summary = std::string("{\n  \"model\": \"") + model.spec.name + "\",\n  \"group\": \"" +
                        data.name + "\",\n  \"test_set_hash\": \"" + data.test_set_hash +
                        "\",\n  \"examples\": " + std::to_string(ev.predictions.size()) +
                        ",\n  \"accuracy\": " + buf;
  std::snprintf(buf, sizeof buf, "%.17g", ev.loss);
  summary += std::string(",\n  \"loss\": ") + buf + "\n}\n";
  write_text_atomic(cfg.output_dir / "evaluation.json", summary);
  out << model.spec.name << " accuracy " << ev.accuracy << " loss " << ev.loss << "\n";
  return 0;
}

int cmd_synth(const Options& o, CLI::App* sub, std::ostream& out) {
  const auto stage = static_cast<harness::Stage>(o.stage);
  auto spec = harness::default_synthetic(stage);
  if (sub->count("--image-size")) spec.image_size = o.image_size;
  spec.seed = o.seed;
  const auto items = harness::generate_synthetic(spec, o.count);
  harness::write_corpus(items, o.output_dir, stage);
  int positives = 0;
  for (const auto& i : items) positives += i.label;
  out << "wrote " << items.size() << " images (" << positives << " with cracks) to " << o.output_dir << "\n";
  return 0;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(in)) {
        if (e.is_regular_file() && imaging::is_netpbm_path(e.path())) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(in)) {
      files.emplace_back(in);
    } else {
      throw InputError("no such file or directory: " + in);
    }
  }
  if (files.empty()) throw InputError("no images found");
  return files;
}

int cmd_quanvolve(const Options& o, CLI::App* sub, std::ostream& out) {
  quanv::QuanvConfig qc;
  fs::path cache;
  if (sub->count("--config")) {
    const auto cfg = harness::load_config(o.config);
    qc = cfg.quanv;
    cache = cfg.effective_cache_dir();
  }
  if (sub->count("--patch-size")) qc.patch_size = qc.stride = o.patch_size;
  if (sub->count("--layers")) qc.n_random_layers = o.layers;
  if (sub->count("--seed")) qc.seed = o.seed;
  if (const char* env = std::getenv("QV_CACHE_DIR"); env && *env) cache = env;
  if (sub->count("--cache-dir")) cache = o.cache_dir;
  if (cache.empty()) throw ConfigError("no cache directory: pass --cache-dir, --config or set QV_CACHE_DIR");
  qc.validate();
  std::vector<imaging::Image> images;
  std::vector<std::string> ids;
  for (const auto& f : expand_inputs(o.inputs)) {
    images.push_back(imaging::min_max_normalize(imaging::read_netpbm(f)));
    ids.push_back(f.string());
  }
  const auto batch = quanv::quanvolve_batch(images, ids, qc, cache);
  if (!o.output_dir.empty()) {
    for (const auto& t : batch.tensors) {
      quanv::serialize_tensor(t, fs::path(o.output_dir) / (fs::path(t.source_id).stem().string() + ".qtns"));
    }
  }
  out << "quanvolved " << images.size() << " images: " << batch.stats.cache_hits << " cached, "
      << batch.stats.computed << " computed, " << batch.stats.circuit_executions << " circuit runs\n";
  return 0;
}

imaging::CategoryTable categories_for(const Options& o) {
  return o.categories.empty() ? harness::default_categories() : imaging::CategoryTable::load(o.categories);
}

int cmd_split(const Options& o, std::ostream& out) {
  const auto image = imaging::read_netpbm(o.image);
  const std::string id = fs::path(o.image).stem().string();
  auto grid = imaging::split_image(image, categories_for(o), id);
  if (!o.mask.empty()) grid = imaging::label_regions(std::move(grid), {imaging::read_netpbm(o.mask), o.threshold});
  const fs::path dir(o.output_dir);
  std::ostringstream index;
  index << "row,col,label,defect_fraction,weight,file\n";
  char name[64];
  for (const auto& r : grid.regions) {
    std::snprintf(name, sizeof name, "r%dc%d.pgm", r.row, r.col);
    imaging::write_pgm(dir / name, r.pixels);
    index << r.row << "," << r.col << "," << (r.label ? 1 : 0) << "," << r.defect_fraction << ","
          << r.weight << "," << name << "\n";
  }
  write_text_atomic(dir / "regions.csv", index.str());
  out << "split " << o.image << " (" << grid.category << ") into " << grid.regions.size() << " regions of "
      << grid.region_height << "x" << grid.region_width << "\n";
  return 0;
}

int cmd_stitch(const Options& o, std::ostream& out) {
  const auto image = imaging::read_netpbm(o.image);
  const auto grid = imaging::split_image(image, categories_for(o), fs::path(o.image).stem().string());
  auto records = imaging::read_sidecar(o.predictions);
  if (records.size() != imaging::kRegionCount) {
    throw StructuralError("predictions hold " + std::to_string(records.size()) + " regions, expected 81");
  }
  std::vector<int> preds(imaging::kRegionCount, -1);
  std::vector<double> conf(imaging::kRegionCount, 0.0);
  for (const auto& r : records) {
    if (r.row < 0 || r.col < 0 || r.row >= imaging::kGridSize || r.col >= imaging::kGridSize) {
      throw InputError("region index out of range in " + o.predictions);
    }
    preds[r.row * imaging::kGridSize + r.col] = r.label;
    conf[r.row * imaging::kGridSize + r.col] = r.confidence;
  }
  if (std::find(preds.begin(), preds.end(), -1) != preds.end()) {
    throw InputError("predictions do not cover every region");
  }
  const auto result = imaging::stitch_predictions(grid, preds, conf);
  imaging::write_ppm(o.output, result.annotated);
  out << "wrote " << o.output << "\n";
  return 0;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kNumeric:
      return 3;
    case ErrorKind::kIo:
    case ErrorKind::kCache:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Quanvolutional neural network experiments: quantum patch encoding, region "
               "localization and QNN vs CNN comparisons.",
               "qvnet"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string("qvnet ") + kVersion);
  app.add_flag("-v,--verbose", o.verbosity, "Increase log verbosity (repeatable)");

  auto* stage1 = app.add_subcommand("stage1", "Run the stage-1 QNN vs CNN comparison");
  add_experiment_flags(stage1, o, true, false);
  auto* stage2 = app.add_subcommand("stage2", "Run the stage-2 localization comparison");
  add_experiment_flags(stage2, o, false, true);

  auto* train = app.add_subcommand("train", "Train one model on the first comparison group");
  add_experiment_flags(train, o, true, true);
  train->add_option("--model", o.model, "Model to train")->check(CLI::IsMember({"qnn", "cnn"}));

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on the config's test set");
  add_experiment_flags(evaluate, o, true, true);
  evaluate->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic crack corpus");
  synth->add_option("--stage", o.stage, "Corpus layout: 1 (class folders) or 2 (images + masks)")
      ->check(CLI::IsMember({1, 2}));
  synth->add_option("--count", o.count, "Number of images")->required()->check(CLI::PositiveNumber);
  synth->add_option("--image-size", o.image_size, "Square image size")->check(CLI::Range(4, 4096));
  synth->add_option("--seed", o.seed, "Generator seed");
  synth->add_option("-o,--output-dir", o.output_dir, "Corpus directory")->required();

  auto* quanvolve = app.add_subcommand("quanvolve", "Quanvolve min-max scaled images into the cache");
  quanvolve->add_option("inputs", o.inputs, "Images or directories of Netpbm images")->required();
  quanvolve->add_option("-c,--config", o.config, "Take circuit settings and cache from a config")
      ->check(CLI::ExistingFile);
  quanvolve->add_option("--patch-size", o.patch_size, "Patch side (stride equals the patch)")
      ->check(CLI::IsMember({2, 4}));
  quanvolve->add_option("--layers", o.layers, "Random circuit layers")->check(CLI::NonNegativeNumber);
  quanvolve->add_option("--seed", o.seed, "Circuit seed");
  quanvolve->add_option("--cache-dir", o.cache_dir, "Cache directory (overrides QV_CACHE_DIR)");
  quanvolve->add_option("-o,--output-dir", o.output_dir, "Also write one .qtns per image here");

  auto* split = app.add_subcommand("split", "Split an image into the 9x9 region grid");
  split->add_option("image", o.image, "Netpbm image")->required()->check(CLI::ExistingFile);
  split->add_option("--mask", o.mask, "Defect mask for region labels")->check(CLI::ExistingFile);
  split->add_option("--threshold", o.threshold, "Defect fraction that marks a region positive");
  split->add_option("--categories", o.categories, "Resolution category table")->check(CLI::ExistingFile);
  split->add_option("-o,--output-dir", o.output_dir, "Directory for region images")->required();

  auto* stitch = app.add_subcommand("stitch", "Draw region predictions onto an image");
  stitch->add_option("image", o.image, "Netpbm image")->required()->check(CLI::ExistingFile);
  stitch->add_option("--predictions", o.predictions, "Region sidecar (row,col,label,confidence)")
      ->required()
      ->check(CLI::ExistingFile);
  stitch->add_option("--categories", o.categories, "Resolution category table")->check(CLI::ExistingFile);
  stitch->add_option("--output", o.output, "Annotated PPM")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  init_logging(o.verbosity);
  try {
    if (stage1->parsed()) return cmd_stage(o, stage1, harness::Stage::kOne, out);
    if (stage2->parsed()) return cmd_stage(o, stage2, harness::Stage::kTwo, out);
    if (train->parsed()) return cmd_train(o, train, out);
    if (evaluate->parsed()) return cmd_evaluate(o, evaluate, out);
    if (synth->parsed()) return cmd_synth(o, synth, out);
    if (quanvolve->parsed()) return cmd_quanvolve(o, quanvolve, out);
    if (split->parsed()) return cmd_split(o, out);
    if (stitch->parsed()) return cmd_stitch(o, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("qvnet");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace qv::cli
