// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver behind the command-line tool: dataset preparation, single
// runs with metrics persistence, and (method x noise x seed) sweeps.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mfrw/config.hpp"
#include "mfrw/metaloop.hpp"

namespace mfrw {

inline constexpr const char* kMetricsHeader = "epoch,split,loss,accuracy,adv_w_clean,adv_w_noisy";

/// One row of metrics.csv.
struct MetricsRecord {
  int epoch = 0;
  std::string split;  // train | meta | test
  double loss = 0.0;
  double accuracy = 0.0;
  std::optional<double> adv_w_clean;
  std::optional<double> adv_w_noisy;
};

/// Builds or loads the data, carves the clean meta set out of the training
/// pool, then corrupts the remaining training labels.
Datasets prepare_datasets(const ExperimentConfig& config);

/// Three rows (train, meta, test) per epoch; advisor columns only on train rows
/// of meta-learning methods.
std::vector<MetricsRecord> to_records(const std::vector<EpochMetrics>& history);
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

/// key = value lines of summary.txt.
std::map<std::string, std::string> read_summary(const std::filesystem::path& path);

struct RunOutcome {
  TrainResult result;
  double final_test_accuracy = 0.0;
};

/// Trains, then writes config.ini, metrics.csv and summary.txt into config.outdir.
/// `log` receives one progress line per epoch when non-null.
RunOutcome run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Writes train.csv, meta.csv and test.csv (y_true, y_observed, corrupted, x...)
/// plus transition.csv into config.outdir.
void generate_data(const ExperimentConfig& config);

struct SweepOptions {
  std::vector<Method> methods;
  std::vector<double> noise_levels;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path outdir;
  unsigned jobs = 1;
};

struct SweepCell {
  Method method = Method::ce;
  double p = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  bool ok = false;
  double final_test_accuracy = 0.0;
  std::string error;
};

struct AggregateEntry {
  std::size_t count = 0;
  double mean = 0.0;
  std::optional<double> stddev;  // sample standard deviation, needs >= 2 cells
};

struct AggregateTable {
  std::vector<Method> methods;
  std::vector<double> noise_levels;
  std::vector<std::vector<AggregateEntry>> entries;  // [method][noise level]
};

struct SweepResult {
  std::vector<SweepCell> cells;
  AggregateTable table;
  bool all_ok = true;
};

std::string cell_name(Method method, double p, std::uint64_t seed);

/// Mean and sample standard deviation of successful cells' final test accuracy.
AggregateTable aggregate(const std::vector<SweepCell>& cells, const std::vector<Method>& methods,
                         const std::vector<double>& noise_levels);
/// Rows = methods, columns = noise levels, cells "mean±std" in percent; the
/// best mean of each column carries a trailing '*'.
void write_table_csv(std::ostream& out, const AggregateTable& table);

/// Runs every cell (failures are recorded, not fatal) and writes table.csv.
SweepResult run_sweep(const ExperimentConfig& base, const SweepOptions& options, std::ostream* log = nullptr);

std::string format_number(double v);

}  // namespace mfrw
