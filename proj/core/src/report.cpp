// SPDX-License-Identifier: Apache-2.0
#include "mfrw/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mfrw/errors.hpp"

namespace mfrw {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 460.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 200.0;  // room for the legend
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* dash_for(const std::string& label) {
  if (label.ends_with("/meta") || label.ends_with("/noisy")) return "7 4";
  if (label.ends_with("/test")) return "2 3";
  return "";
}

// Round the upper bound up to a 1-2-5 step so ticks land on readable values.
double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

RunSeries load_run(const fs::path& dir) {
  const auto csv = dir / "metrics.csv";
  if (!fs::exists(csv)) throw IoError("missing " + csv.string());
  auto name = dir.filename().string();
  if (name.empty()) name = dir.parent_path().filename().string();
  return RunSeries{name, read_metrics_csv(csv)};
}

ChartSpec build_chart(const std::vector<RunSeries>& runs, const std::string& metric) {
  ChartSpec chart;
  if (metric == "adv_weight") {
    chart.title = "mean meta-model weight on training examples";
    chart.y_label = "weight";
  } else {
    chart.title = metric + " vs epoch";
    chart.y_label = metric;
  }
  for (const auto& run : runs) {
    chart.legend.push_back(run.name);
    if (metric == "adv_weight") {
      Series clean{run.name + "/clean", {}};
      Series noisy{run.name + "/noisy", {}};
      for (const auto& r : run.records) {
        if (r.split != "train") continue;
        if (r.adv_w_clean) clean.points.emplace_back(r.epoch, *r.adv_w_clean);
        if (r.adv_w_noisy) noisy.points.emplace_back(r.epoch, *r.adv_w_noisy);
      }
      chart.series.push_back(std::move(clean));
      chart.series.push_back(std::move(noisy));
      continue;
    }
    for (const char* split : {"train", "meta", "test"}) {
      Series s{run.name + "/" + split, {}};
      for (const auto& r : run.records) {
        if (r.split != split) continue;
        if (metric == "loss") {
          s.points.emplace_back(r.epoch, r.loss);
        } else if (metric == "accuracy") {
          s.points.emplace_back(r.epoch, r.accuracy);
        } else {
          throw UsageError("unknown chart metric '" + metric + "'");
        }
      }
      chart.series.push_back(std::move(s));
    }
  }
  return chart;
}

std::string render_svg(const ChartSpec& chart) {
  double x_max = 1.0;
  double y_max = 0.0;
  for (const auto& s : chart.series) {
    for (const auto& [x, y] : s.points) {
      x_max = std::max(x_max, x);
      if (std::isfinite(y)) y_max = std::max(y_max, y);
    }
  }
  const bool unit = chart.y_label == "accuracy" || chart.y_label == "weight";
  const double y_step = unit ? 0.2 : nice_step(y_max > 0.0 ? y_max : 1.0);
  const double y_top = unit ? 1.0 : y_step * std::ceil((y_max > 0.0 ? y_max : 1.0) / y_step);
  const double x_step = nice_step(x_max);
  const double x_right = std::max(x_max, 1.0);

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + pw * x / x_right; };
  auto py = [&](double y) { return kTop + ph * (1.0 - std::clamp(y, 0.0, y_top) / y_top); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape_xml(chart.title) << "</text>\n";

  // axes and grid
  o << "<g stroke=\"#dddddd\">\n";
  for (double y = 0.0; y <= y_top + 1e-9; y += y_step) {
    o << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(py(y)) << "\" x2=\"" << fmt(kLeft + pw) << "\" y2=\""
      << fmt(py(y)) << "\"/>\n";
  }
  o << "</g>\n<g fill=\"#333333\">\n";
  for (double y = 0.0; y <= y_top + 1e-9; y += y_step) {
    o << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py(y) + 4) << "\" text-anchor=\"end\">" << tick_label(y)
      << "</text>\n";
  }
  for (double x = 0.0; x <= x_right + 1e-9; x += x_step) {
    o << "<text x=\"" << fmt(px(x)) << "\" y=\"" << fmt(kTop + ph + 18) << "\" text-anchor=\"middle\">"
      << tick_label(x) << "</text>\n";
  }
  o << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 12) << "\" text-anchor=\"middle\">epoch</text>\n";
  o << "<text transform=\"translate(18 " << fmt(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape_xml(chart.y_label) << "</text>\n";
  o << "</g>\n";
  o << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
    << "\" fill=\"none\" stroke=\"#333333\"/>\n";

  // one color per run; the series of a run share its color
  const std::size_t per_run = chart.legend.empty() ? 1 : std::max<std::size_t>(1, chart.series.size() / chart.legend.size());
  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    if (s.points.empty()) continue;
    const char* color = kPalette[(i / per_run) % kPaletteSize];
    o << "<polyline class=\"series\" data-label=\"" << escape_xml(s.label) << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.8\"";
    if (const char* d = dash_for(s.label); *d) o << " stroke-dasharray=\"" << d << '"';
    o << " points=\"";
    for (std::size_t k = 0; k < s.points.size(); ++k) {
      o << (k ? " " : "") << fmt(px(s.points[k].first)) << ',' << fmt(py(s.points[k].second));
    }
    o << "\"/>\n";
  }

  // legend: runs by color, then the line-style key
  const double lx = kLeft + pw + 16;
  double ly = kTop + 8;
  for (std::size_t r = 0; r < chart.legend.size(); ++r) {
    o << "<g class=\"legend-entry\"><line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(lx + 22)
      << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << kPalette[r % kPaletteSize] << "\" stroke-width=\"3\"/><text x=\""
      << fmt(lx + 28) << "\" y=\"" << fmt(ly + 4) << "\">" << escape_xml(chart.legend[r]) << "</text></g>\n";
    ly += 18;
  }
  ly += 10;
  const bool weights = chart.y_label == "weight";
  const std::vector<std::pair<std::string, const char*>> styles =
      weights ? std::vector<std::pair<std::string, const char*>>{{"clean", ""}, {"noisy", "7 4"}}
              : std::vector<std::pair<std::string, const char*>>{{"train", ""}, {"meta", "7 4"}, {"test", "2 3"}};
  for (const auto& [name, dash] : styles) {
    o << "<g class=\"style-key\"><line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(lx + 22)
      << "\" y2=\"" << fmt(ly) << "\" stroke=\"#555555\" stroke-width=\"1.8\"";
    if (*dash) o << " stroke-dasharray=\"" << dash << '"';
    o << "/><text x=\"" << fmt(lx + 28) << "\" y=\"" << fmt(ly + 4) << "\">" << name << "</text></g>\n";
    ly += 18;
  }
  o << "</svg>\n";
  return o.str();
}

std::string render_table(const std::vector<RunSeries>& runs) {
  std::size_t name_w = 3;
  for (const auto& r : runs) name_w = std::max(name_w, r.name.size());
  std::ostringstream o;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %6s  %9s  %9s  %9s  %9s  %9s\n", static_cast<int>(name_w), "run", "epochs",
                "train_acc", "meta_acc", "test_acc", "test_loss", "w_c/w_n");
  o << buf;
  for (const auto& run : runs) {
    int last = 0;
    for (const auto& r : run.records) last = std::max(last, r.epoch);
    double train = NAN, meta = NAN, test = NAN, loss = NAN;
    std::string w = "-";
    for (const auto& r : run.records) {
      if (r.epoch != last) continue;
      if (r.split == "train") {
        train = r.accuracy;
        if (r.adv_w_clean || r.adv_w_noisy) {
          char wb[64];
          std::snprintf(wb, sizeof wb, "%s/%s", r.adv_w_clean ? fmt(*r.adv_w_clean).c_str() : "-",
                        r.adv_w_noisy ? fmt(*r.adv_w_noisy).c_str() : "-");
          w = wb;
        }
      } else if (r.split == "meta") {
        meta = r.accuracy;
      } else if (r.split == "test") {
        test = r.accuracy;
        loss = r.loss;
      }
    }
    auto cell = [](double v) { return std::isnan(v) ? std::string("-") : fmt(100.0 * v); };
    std::snprintf(buf, sizeof buf, "%-*s  %6d  %9s  %9s  %9s  %9s  %9s\n", static_cast<int>(name_w), run.name.c_str(),
                  last, cell(train).c_str(), cell(meta).c_str(), cell(test).c_str(),
                  std::isnan(loss) ? "-" : fmt(loss).c_str(), w.c_str());
    o << buf;
  }
  return o.str();
}

std::string write_report(const std::vector<fs::path>& run_dirs, const fs::path& outdir) {
  if (run_dirs.empty()) throw UsageError("report needs at least one run directory");
  std::vector<RunSeries> runs;
  for (const auto& d : run_dirs) runs.push_back(load_run(d));
  fs::create_directories(outdir);
  auto write = [&](const fs::path& name, const std::string& text) {
    std::ofstream out(outdir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (outdir / name).string());
    out << text;
  };
  write("accuracy.svg", render_svg(build_chart(runs, "accuracy")));
  write("loss.svg", render_svg(build_chart(runs, "loss")));
  const bool any_weights = std::any_of(runs.begin(), runs.end(), [](const RunSeries& r) {
    return std::any_of(r.records.begin(), r.records.end(), [](const MetricsRecord& m) { return m.adv_w_clean || m.adv_w_noisy; });
  });
  if (any_weights) write("adv_weight.svg", render_svg(build_chart(runs, "adv_weight")));
  const auto table = render_table(runs);
  write("table.txt", table);
  return table;
}

}  // namespace mfrw
