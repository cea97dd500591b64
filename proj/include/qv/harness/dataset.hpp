#pragma once

#include <filesystem>
#include <vector>

#include "qv/harness/config.hpp"
#include "qv/harness/synthetic.hpp"

namespace qv::harness {

struct IngestResult {
  std::vector<LabeledImage> items;  // sorted by file name within each class
  std::size_t skipped = 0;          // unreadable files, each logged as a warning
};

/// Stage 1 layout: `positive/` and `negative/` subdirectories of Netpbm
/// images; ids are "positive/<file>" and "negative/<file>". Stage 2 layout:
/// images at the top level with same-stem masks under `masks/`; the label is
/// whether the mask has any defect pixel. Samples are scaled to [0, 1].
/// Throws InputError for a missing or empty class directory, a missing
/// `masks/` directory, or a mask whose size differs from its image.
IngestResult ingest_dataset(const std::filesystem::path& root, Stage stage);

/// Writes a corpus in the layout ingest_dataset() reads (PGM files).
void write_corpus(const std::vector<LabeledImage>& items, const std::filesystem::path& root,
                  Stage stage);

/// Loads the configured corpus: generated when synthetic, else ingested.
std::vector<LabeledImage> load_corpus(const ExperimentConfig& config);

}  // namespace qv::harness
