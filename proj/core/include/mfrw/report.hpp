// SPDX-License-Identifier: Apache-2.0
//
// Static SVG line charts and a text summary table from finished run directories.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mfrw/experiment.hpp"

namespace mfrw {

struct RunSeries {
  std::string name;  // legend label, the run directory's name
  std::vector<MetricsRecord> records;
};

/// Reads <dir>/metrics.csv; a missing file raises IoError.
RunSeries load_run(const std::filesystem::path& dir);

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (epoch, value)
};

struct ChartSpec {
  std::string title;
  std::string y_label;
  std::vector<Series> series;
  std::vector<std::string> legend;  // one entry per run
};

/// One polyline per (run, split) for `metric` ("loss" or "accuracy").
ChartSpec build_chart(const std::vector<RunSeries>& runs, const std::string& metric);

/// Deterministic SVG text; colors follow run order, dash patterns follow split.
std::string render_svg(const ChartSpec& chart);

/// Final-epoch values per run, fixed-width columns.
std::string render_table(const std::vector<RunSeries>& runs);

/// Writes loss.svg, accuracy.svg (and adv_weight.svg when any run logged
/// meta-model weights) plus table.txt into `outdir`; returns the table text.
std::string write_report(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& outdir);

}  // namespace mfrw
