#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qv/harness/experiment.hpp"
#include "qv/imaging/image.hpp"

namespace qv::harness {

// Output layout under the report directory:
//   runs/<group>_<model>_seed<seed>.csv   per-run metrics
//   curves/<group>_<model>.csv            seed-averaged metrics
//   summary.json                          final numbers, deterministic
//   timings.json                          wall-clock figures
//   plots/accuracy.ppm, plots/loss.ppm    test curves, all runs overlaid
//   annotations/<group>/<model>/<image>.ppm + .regions   (stage 2)

std::string run_file_name(const RunRecord& run);
std::string summary_json(const ComparisonReport& report);
std::string timings_json(const ComparisonReport& report);

struct PlotSeries {
  std::string label;
  std::vector<double> values;  // one per epoch
  std::uint8_t rgb[3] = {0, 0, 0};
};

/// Line chart on a white canvas; y spans [y_min, y_max].
imaging::RgbImage plot_series(const std::vector<PlotSeries>& series, double y_min, double y_max,
                              int width = 640, int height = 400);

/// Writes every artifact; throws IoError if the directory is not writable.
void emit_report(const ComparisonReport& report, const std::filesystem::path& output_dir);

}  // namespace qv::harness
