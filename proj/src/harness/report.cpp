#include "qv/harness/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "qv/common/binary_io.hpp"
#include "qv/common/error.hpp"

namespace qv::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// QNN curves in greens/blues, CNN curves in reds/oranges.
constexpr std::uint8_t kQnnColors[][3] = {{0, 90, 200}, {0, 160, 60}, {0, 170, 190}, {120, 60, 200}};
constexpr std::uint8_t kCnnColors[][3] = {{220, 40, 40}, {240, 140, 0}, {170, 80, 40}, {200, 0, 140}};

void set_thick(imaging::RgbImage& img, int r, int c, const std::uint8_t rgb[3]) {
  for (int dr = 0; dr <= 1; ++dr) {
    for (int dc = 0; dc <= 1; ++dc) {
      const int rr = r + dr, cc = c + dc;
      if (rr >= 0 && cc >= 0 && rr < img.height && cc < img.width) img.set(rr, cc, rgb[0], rgb[1], rgb[2]);
    }
  }
}

void draw_line(imaging::RgbImage& img, int r0, int c0, int r1, int c1, const std::uint8_t rgb[3]) {
  const int dc = std::abs(c1 - c0), sc = c0 < c1 ? 1 : -1;
  const int dr = -std::abs(r1 - r0), sr = r0 < r1 ? 1 : -1;
  int err = dc + dr;
  while (true) {
    set_thick(img, r0, c0, rgb);
    if (r0 == r1 && c0 == c1) break;
    const int e2 = 2 * err;
    if (e2 >= dr) {
      err += dr;
      c0 += sc;
    }
    if (e2 <= dc) {
      err += dc;
      r0 += sr;
    }
  }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<PlotSeries> collect(const ComparisonReport& report, bool accuracy) {
  std::vector<PlotSeries> out;
  for (std::size_t gi = 0; gi < report.groups.size(); ++gi) {
    for (const char* model : {"qnn", "cnn"}) {
      const Curve* c = report.find(model, report.groups[gi]);
      if (!c) continue;
      PlotSeries s;
      s.label = std::string(model) + " " + c->group;
      for (const auto& m : c->mean) s.values.push_back(accuracy ? m.test_accuracy : m.test_loss);
      const auto& rgb = std::string(model) == "qnn" ? kQnnColors[gi % 4] : kCnnColors[gi % 4];
      std::copy(rgb, rgb + 3, s.rgb);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::string hex_color(const std::uint8_t rgb[3]) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::string safe_name(std::string s) {
  for (auto& ch : s) {
    if (ch == '/' || ch == '\\' || ch == '#') ch = '_';
  }
  return s;
}

fs::path annotation_stem(const Localization& loc) {
  return fs::path("annotations") / loc.group / loc.model / safe_name(fs::path(loc.image_id).stem().string());
}

}  // namespace

std::string run_file_name(const RunRecord& run) {
  return run.group + "_" + run.model + "_seed" + std::to_string(run.seed) + ".csv";
}

imaging::RgbImage plot_series(const std::vector<PlotSeries>& series, double y_min, double y_max,
                              int width, int height) {
  imaging::RgbImage img(height, width, 255);
  const int left = 40, right = width - 15, top = 15, bottom = height - 30;
  const std::uint8_t grid[3] = {225, 225, 225};
  const std::uint8_t axis[3] = {0, 0, 0};
  for (int k = 0; k <= 4; ++k) {
    const int r = bottom - (bottom - top) * k / 4;
    draw_line(img, r, left, r, right, grid);
  }
  draw_line(img, bottom, left, bottom, right, axis);
  draw_line(img, top, left, bottom, left, axis);
  if (!(y_max > y_min)) y_max = y_min + 1.0;
  auto row_of = [&](double v) {
    const double t = std::clamp((v - y_min) / (y_max - y_min), 0.0, 1.0);
    return bottom - static_cast<int>(std::lround(t * (bottom - top)));
  };
  for (const auto& s : series) {
    const std::size_t n = s.values.size();
    auto col_of = [&](std::size_t i) {
      return n <= 1 ? left : left + static_cast<int>(std::lround(static_cast<double>(i) * (right - left) / (n - 1)));
    };
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!std::isfinite(s.values[i]) || !std::isfinite(s.values[i + 1])) continue;
      draw_line(img, row_of(s.values[i]), col_of(i), row_of(s.values[i + 1]), col_of(i + 1), s.rgb);
    }
    if (n == 1 && std::isfinite(s.values[0])) set_thick(img, row_of(s.values[0]), left, s.rgb);
  }
  return img;
}

std::string summary_json(const ComparisonReport& report) {
  json j;
  j["stage"] = static_cast<int>(report.stage);
  j["epochs"] = report.epochs;
  j["groups"] = report.groups;
  j["parameters"] = {{"qnn", report.qnn_parameters},
                     {"cnn", report.cnn_parameters},
                     {"qnn_flatten_width", report.qnn_flatten_width},
                     {"cnn_flatten_width", report.cnn_flatten_width}};
  json runs = json::array();
  for (const auto& r : report.runs) {
    const auto& last = r.history.back();
    runs.push_back({{"model", r.model},
                    {"group", r.group},
                    {"seed", r.seed},
                    {"train_count", r.train_count},
                    {"test_count", r.test_count},
                    {"parameters", r.parameters},
                    {"test_set_hash", r.test_set_hash},
                    {"final_test_accuracy", finite_or_null(last.test_accuracy)},
                    {"final_test_loss", finite_or_null(last.test_loss)},
                    {"final_train_accuracy", finite_or_null(last.train_accuracy)},
                    {"metrics_file", "runs/" + run_file_name(r)}});
  }
  j["runs"] = runs;
  json curves = json::array();
  for (const auto& c : report.curves) {
    curves.push_back({{"model", c.model},
                      {"group", c.group},
                      {"final_test_accuracy", finite_or_null(c.final_test_accuracy)},
                      {"final_test_loss", finite_or_null(c.final_test_loss)},
                      {"test_loss_step_variance", finite_or_null(c.test_loss_step_variance)},
                      {"metrics_file", "curves/" + c.group + "_" + c.model + ".csv"}});
  }
  j["curves"] = curves;
  json legend = json::array();
  for (const auto& s : collect(report, true)) legend.push_back({{"curve", s.label}, {"color", hex_color(s.rgb)}});
  j["plot_legend"] = legend;
  if (report.stage == Stage::kTwo) {
    j["validation_group"] = report.validation_group;
    j["validation_accuracy"] = report.validation_accuracy ? finite_or_null(*report.validation_accuracy) : json(nullptr);
    j["reference_accuracy"] = report.reference_accuracy;
    j["meets_reference"] = report.validation_accuracy && *report.validation_accuracy >= report.reference_accuracy;
    json loc = json::array();
    for (const auto& l : report.localization) {
      std::size_t positives = 0;
      for (const auto& rec : l.stitched.records) positives += rec.label == 1;
      const auto stem = annotation_stem(l);
      loc.push_back({{"group", l.group},
                     {"model", l.model},
                     {"image", l.image_id},
                     {"regions", l.stitched.records.size()},
                     {"positive_regions", positives},
                     {"annotation", stem.string() + ".ppm"},
                     {"sidecar", stem.string() + ".regions"}});
    }
    j["localization"] = loc;
  }
  return j.dump(2) + "\n";
}

std::string timings_json(const ComparisonReport& report) {
  json j;
  j["total_seconds"] = report.total_seconds;
  j["quanvolution"] = {{"wall_seconds", report.quanv_stats.wall_seconds},
                       {"circuit_seconds", report.quanv_stats.circuit_seconds},
                       {"circuit_executions", report.quanv_stats.circuit_executions},
                       {"cache_hits", report.quanv_stats.cache_hits},
                       {"computed", report.quanv_stats.computed},
                       {"cache_repairs", report.quanv_stats.cache_repairs}};
  json runs = json::array();
  for (const auto& r : report.runs) {
    runs.push_back({{"model", r.model}, {"group", r.group}, {"seed", r.seed}, {"train_seconds", r.train_seconds}});
  }
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

void emit_report(const ComparisonReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create report directory " + dir.string());

  for (const auto& r : report.runs) nn::write_metrics(dir / "runs" / run_file_name(r), r.history);
  for (const auto& c : report.curves) nn::write_metrics(dir / "curves" / (c.group + "_" + c.model + ".csv"), c.mean);
  write_text_atomic(dir / "summary.json", summary_json(report));
  write_text_atomic(dir / "timings.json", timings_json(report));

  const auto acc = collect(report, true);
  imaging::write_ppm(dir / "plots" / "accuracy.ppm", plot_series(acc, 0.0, 1.0));
  const auto loss = collect(report, false);
  double max_loss = 0.0;
  for (const auto& s : loss) {
    for (double v : s.values) {
      if (std::isfinite(v)) max_loss = std::max(max_loss, v);
    }
  }
  imaging::write_ppm(dir / "plots" / "loss.ppm", plot_series(loss, 0.0, max_loss * 1.05));

  for (const auto& l : report.localization) {
    const auto stem = dir / annotation_stem(l);
    imaging::write_ppm(fs::path(stem.string() + ".ppm"), l.stitched.annotated);
    imaging::write_sidecar(fs::path(stem.string() + ".regions"), l.stitched.records);
  }
}

}  // namespace qv::harness
