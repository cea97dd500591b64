#include "qv/harness/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <optional>

#include "qv/common/error.hpp"
#include "qv/imaging/image.hpp"

namespace qv::harness {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> image_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && imaging::is_netpbm_path(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::optional<imaging::Image> try_read(const fs::path& path, std::size_t& skipped) {
  try {
    return imaging::read_netpbm(path);
  } catch (const Error& e) {
    spdlog::warn("skipping unreadable image {}: {}", path.string(), e.what());
    ++skipped;
    return std::nullopt;
  }
}

IngestResult ingest_classified(const fs::path& root) {
  IngestResult out;
  for (const auto& [name, label] : {std::pair{"negative", 0}, std::pair{"positive", 1}}) {
    const fs::path dir = root / name;
    if (!fs::is_directory(dir)) throw InputError("missing class directory " + dir.string());
    const auto files = image_files(dir);
    if (files.empty()) throw InputError("class directory " + dir.string() + " has no images");
    std::size_t loaded = 0;
    for (const auto& f : files) {
      auto img = try_read(f, out.skipped);
      if (!img) continue;
      out.items.push_back({std::string(name) + "/" + f.filename().string(), std::move(*img), {}, label});
      ++loaded;
    }
    if (loaded == 0) throw InputError("no readable images in " + dir.string());
  }
  return out;
}

IngestResult ingest_masked(const fs::path& root) {
  IngestResult out;
  const fs::path mask_dir = root / "masks";
  if (!fs::is_directory(mask_dir)) throw InputError("missing masks directory " + mask_dir.string());
  std::map<std::string, fs::path> masks;
  for (const auto& m : image_files(mask_dir)) masks.emplace(m.stem().string(), m);
  const auto files = image_files(root);
  if (files.empty()) throw InputError("no images in " + root.string());
  for (const auto& f : files) {
    const auto it = masks.find(f.stem().string());
    if (it == masks.end()) {
      spdlog::warn("skipping {}: no mask in {}", f.string(), mask_dir.string());
      ++out.skipped;
      continue;
    }
    auto img = try_read(f, out.skipped);
    if (!img) continue;
    auto mask = try_read(it->second, out.skipped);
    if (!mask) continue;
    if (mask->height != img->height || mask->width != img->width) {
      throw InputError("mask " + it->second.string() + " does not match the size of " + f.string());
    }
    const bool defect = std::any_of(mask->pixels.begin(), mask->pixels.end(), [](double v) { return v > 0; });
    out.items.push_back({f.filename().string(), std::move(*img), std::move(*mask), defect ? 1 : 0});
  }
  if (out.items.empty()) throw InputError("no readable image/mask pairs in " + root.string());
  return out;
}

}  // namespace

IngestResult ingest_dataset(const fs::path& root, Stage stage) {
  if (!fs::is_directory(root)) throw InputError("dataset directory " + root.string() + " does not exist");
  auto out = stage == Stage::kOne ? ingest_classified(root) : ingest_masked(root);
  if (out.skipped > 0) spdlog::warn("{} file(s) skipped while reading {}", out.skipped, root.string());
  return out;
}

void write_corpus(const std::vector<LabeledImage>& items, const fs::path& root, Stage stage) {
  for (const auto& item : items) {
    const std::string file = item.id + ".pgm";
    if (stage == Stage::kOne) {
      imaging::write_pgm(root / (item.label ? "positive" : "negative") / file, item.image);
    } else {
      imaging::write_pgm(root / file, item.image);
      imaging::write_pgm(root / "masks" / file, item.mask);
    }
  }
}

std::vector<LabeledImage> load_corpus(const ExperimentConfig& config) {
  if (config.dataset.synthetic) {
    return generate_synthetic(*config.dataset.synthetic, config.dataset.synthetic_count);
  }
  return ingest_dataset(config.dataset.path, config.stage).items;
}

}  // namespace qv::harness
