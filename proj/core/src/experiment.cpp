// SPDX-License-Identifier: Apache-2.0
#include "mfrw/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "mfrw/errors.hpp"

namespace mfrw {

namespace fs = std::filesystem;

namespace {

// Stream ids for seeds derived from the config's seeds.
constexpr std::uint64_t kBlobsStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kSplitStream = 3;
constexpr std::uint64_t kNoiseStream = 4;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FormatError(where + ": not a number: '" + s + "'");
  return v;
}

std::optional<double> optional_field(const std::string& s, const std::string& where) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, where);
}

std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

void write_dataset_csv(const fs::path& path, const LabeledDataset& d) {
  auto out = open_out(path);
  out << "y_true,y_observed,corrupted";
  for (std::size_t j = 0; j < d.input_dim(); ++j) out << ",x" << j;
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.y_true[i] << ',' << d.y_observed[i] << ',' << (d.corrupted[i] ? 1 : 0);
    for (std::size_t j = 0; j < d.input_dim(); ++j) out << ',' << format_number(d.x.at(i, j));
    out << '\n';
  }
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

Datasets prepare_datasets(const ExperimentConfig& config) {
  const auto& src = config.data;
  LabeledDataset pool;
  LabeledDataset test;
  if (src.kind == DataSource::Kind::blobs) {
    auto blobs = make_blobs(src.blobs, derive_seed(src.seed, kBlobsStream));
    pool = std::move(blobs.data);
    test = sample_blobs(blobs.centers, src.test_n, src.blobs.noise_std, derive_seed(src.seed, kTestStream));
  } else {
    pool = load_idx(src.train_images, src.train_labels, src.limit);
    test = load_idx(src.test_images, src.test_labels, src.test_limit, pool.num_classes);
  }
  SplitSpec split = config.split;
  split.seed = derive_seed(split.seed, kSplitStream);
  auto parts = split_meta(pool, split);
  NoiseSpec noise = config.noise;
  noise.seed = derive_seed(noise.seed, kNoiseStream);
  parts.train.apply_noise(noise);
  return Datasets{std::move(parts.train), std::move(parts.meta), std::move(test)};
}

std::vector<MetricsRecord> to_records(const std::vector<EpochMetrics>& history) {
  std::vector<MetricsRecord> out;
  out.reserve(3 * history.size());
  for (const auto& m : history) {
    out.push_back({m.epoch, "train", m.train.loss, m.train.accuracy, m.weight_clean, m.weight_noisy});
    out.push_back({m.epoch, "meta", m.meta.loss, m.meta.accuracy, std::nullopt, std::nullopt});
    out.push_back({m.epoch, "test", m.test.loss, m.test.accuracy, std::nullopt, std::nullopt});
  }
  return out;
}

namespace {

void write_record(std::ostream& out, const MetricsRecord& r) {
  out << r.epoch << ',' << r.split << ',' << format_number(r.loss) << ',' << format_number(r.accuracy) << ',';
  if (r.adv_w_clean) out << format_number(*r.adv_w_clean);
  out << ',';
  if (r.adv_w_noisy) out << format_number(*r.adv_w_noisy);
  out << '\n';
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out << kMetricsHeader << '\n';
  for (const auto& r : records) write_record(out, r);
}

std::vector<MetricsRecord> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw FormatError(path.string() + ": unexpected header '" + line + "'");
  std::vector<MetricsRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    const auto f = split_fields(line);
    if (f.size() != 6) throw FormatError(where + ": expected 6 fields, got " + std::to_string(f.size()));
    MetricsRecord r;
    r.epoch = static_cast<int>(parse_double(f[0], where));
    r.split = f[1];
    r.loss = parse_double(f[2], where);
    r.accuracy = parse_double(f[3], where);
    r.adv_w_clean = optional_field(f[4], where);
    r.adv_w_noisy = optional_field(f[5], where);
    out.push_back(std::move(r));
  }
  return out;
}

std::map<std::string, std::string> read_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

RunOutcome run_experiment(const ExperimentConfig& config, std::ostream* log) {
  validate(config);
  fs::create_directories(config.outdir);
  {
    auto cfg = open_out(config.outdir / "config.ini");
    cfg << to_text(config);
  }

  const auto data = prepare_datasets(config);
  TrainConfig tc = config.train;
  tc.nets.main.backbone.input_dim = data.train.input_dim();
  tc.nets.main.classifier.num_classes = data.train.num_classes;
  tc.nets.main.classifier.feature_dim = tc.nets.main.backbone.feature_dim;
  tc.nets.advisor.feature_dim = tc.nets.main.backbone.feature_dim;

  // Rows are flushed per epoch so a diverging run leaves its history behind.
  auto metrics = open_out(config.outdir / "metrics.csv");
  metrics << kMetricsHeader << '\n';
  auto on_epoch = [&](const EpochMetrics& m) {
    for (const auto& r : to_records({m})) write_record(metrics, r);
    metrics.flush();
    if (!std::isfinite(m.train.loss) || !std::isfinite(m.meta.loss) || !std::isfinite(m.test.loss)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(m.epoch));
    }
    if (log) {
      *log << to_string(tc.method) << " epoch " << m.epoch << "/" << tc.epochs << "  train_loss "
           << format_number(m.train.loss) << "  test_acc " << format_number(m.test.accuracy) << '\n';
    }
  };

  RunOutcome outcome;
  outcome.result = train(tc, data, on_epoch);
  const auto& res = outcome.result;
  outcome.final_test_accuracy = res.history.empty() ? res.initial_test.accuracy : res.history.back().test.accuracy;
  const double final_loss = res.history.empty() ? res.initial_test.loss : res.history.back().test.loss;

  auto summary = open_out(config.outdir / "summary.txt");
  summary << "method = " << to_string(tc.method) << '\n'
          << "epochs = " << tc.epochs << '\n'
          << "noise_kind = " << to_string(config.noise.kind) << '\n'
          << "noise_p = " << format_number(config.noise.p) << '\n'
          << "train_size = " << data.train.size() << '\n'
          << "meta_size = " << data.meta.size() << '\n'
          << "test_size = " << data.test.size() << '\n'
          << "initial_test_accuracy = " << format_number(res.initial_test.accuracy) << '\n'
          << "final_test_loss = " << format_number(final_loss) << '\n'
          << "final_test_accuracy = " << format_number(outcome.final_test_accuracy) << '\n';
  return outcome;
}

void generate_data(const ExperimentConfig& config) {
  validate(config);
  fs::create_directories(config.outdir);
  const auto data = prepare_datasets(config);
  write_dataset_csv(config.outdir / "train.csv", data.train);
  write_dataset_csv(config.outdir / "meta.csv", data.meta);
  write_dataset_csv(config.outdir / "test.csv", data.test);
  const auto t = build_transition_matrix(config.noise, data.train.num_classes);
  auto out = open_out(config.outdir / "transition.csv");
  for (std::size_t i = 0; i < t.classes(); ++i) {
    for (std::size_t j = 0; j < t.classes(); ++j) out << (j ? "," : "") << format_number(t.at(i, j));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

std::string cell_name(Method method, double p, std::uint64_t seed) {
  return to_string(method) + "_p" + format_number(p) + "_seed" + std::to_string(seed);
}

AggregateTable aggregate(const std::vector<SweepCell>& cells, const std::vector<Method>& methods,
                         const std::vector<double>& noise_levels) {
  AggregateTable t{methods, noise_levels, {}};
  t.entries.assign(methods.size(), std::vector<AggregateEntry>(noise_levels.size()));
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t pi = 0; pi < noise_levels.size(); ++pi) {
      std::vector<double> acc;
      for (const auto& c : cells) {
        if (c.ok && c.method == methods[mi] && c.p == noise_levels[pi]) acc.push_back(c.final_test_accuracy);
      }
      auto& e = t.entries[mi][pi];
      e.count = acc.size();
      if (acc.empty()) continue;
      double sum = 0.0;
      for (double a : acc) sum += a;
      e.mean = sum / static_cast<double>(acc.size());
      if (acc.size() >= 2) {
        double ss = 0.0;
        for (double a : acc) ss += (a - e.mean) * (a - e.mean);
        e.stddev = std::sqrt(ss / static_cast<double>(acc.size() - 1));
      }
    }
  }
  return t;
}

void write_table_csv(std::ostream& out, const AggregateTable& t) {
  out << "method";
  for (double p : t.noise_levels) out << ",p=" << format_number(p);
  out << '\n';
  // best[pi] = row index of the highest mean among populated entries
  std::vector<std::optional<std::size_t>> best(t.noise_levels.size());
  for (std::size_t pi = 0; pi < t.noise_levels.size(); ++pi) {
    for (std::size_t mi = 0; mi < t.methods.size(); ++mi) {
      const auto& e = t.entries[mi][pi];
      if (e.count == 0) continue;
      if (!best[pi] || e.mean > t.entries[*best[pi]][pi].mean) best[pi] = mi;
    }
  }
  for (std::size_t mi = 0; mi < t.methods.size(); ++mi) {
    out << to_string(t.methods[mi]);
    for (std::size_t pi = 0; pi < t.noise_levels.size(); ++pi) {
      const auto& e = t.entries[mi][pi];
      out << ',';
      if (e.count == 0) {
        out << "n/a";
        continue;
      }
      out << format_percent(e.mean);
      if (e.stddev) out << "±" << format_percent(*e.stddev);
      if (best[pi] == mi) out << '*';
    }
    out << '\n';
  }
}

SweepResult run_sweep(const ExperimentConfig& base, const SweepOptions& options, std::ostream* log) {
  if (options.methods.empty() || options.noise_levels.empty() || options.seeds.empty()) {
    throw UsageError("sweep needs at least one method, noise level and seed");
  }
  for (double p : options.noise_levels) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("noise.p", "sweep noise level outside [0, 1]");
    if (p > 0.0 && base.noise.kind == NoiseKind::none) {
      throw ValidationError("noise.kind", "sweep noise level > 0 needs noise.kind other than none");
    }
  }
  fs::create_directories(options.outdir);

  SweepResult result;
  for (auto m : options.methods) {
    for (double p : options.noise_levels) {
      for (auto s : options.seeds) {
        SweepCell c;
        c.method = m;
        c.p = p;
        c.seed = s;
        c.dir = options.outdir / cell_name(m, p, s);
        result.cells.push_back(std::move(c));
      }
    }
  }

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.cells.size(); i = next++) {
      auto& cell = result.cells[i];
      ExperimentConfig cfg = base;
      cfg.train.method = cell.method;
      cfg.noise.p = cell.p;
      apply_seed(cfg, cell.seed);
      cfg.outdir = cell.dir;
      try {
        cell.final_test_accuracy = run_experiment(cfg).final_test_accuracy;
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      if (log) {
        std::lock_guard lock(log_mutex);
        *log << cell.dir.filename().string() << ": "
             << (cell.ok ? "test_acc " + format_number(cell.final_test_accuracy) : "FAILED: " + cell.error) << '\n';
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(result.cells.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  result.all_ok = std::all_of(result.cells.begin(), result.cells.end(), [](const auto& c) { return c.ok; });
  result.table = aggregate(result.cells, options.methods, options.noise_levels);
  auto out = open_out(options.outdir / "table.csv");
  write_table_csv(out, result.table);
  return result;
}

}  // namespace mfrw
