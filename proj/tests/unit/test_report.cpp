// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfrw/errors.hpp"
#include "mfrw/report.hpp"

namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_run(const fs::path& root, const std::string& name, bool weights) {
  const auto dir = root / name;
  fs::create_directories(dir);
  std::vector<mfrw::MetricsRecord> rows;
  for (int e = 1; e <= 3; ++e) {
    rows.push_back({e, "train", 1.0 / e, 0.5 + 0.1 * e, weights ? std::optional(0.6) : std::nullopt,
                    weights ? std::optional(0.4) : std::nullopt});
    rows.push_back({e, "meta", 1.2 / e, 0.4 + 0.1 * e, {}, {}});
    rows.push_back({e, "test", 1.1 / e, 0.45 + 0.1 * e, {}, {}});
  }
  std::ofstream out(dir / "metrics.csv");
  mfrw::write_metrics_csv(out, rows);
  return dir;
}

}  // namespace

TEST(Report, SingleRunHasOnePolylinePerSplit) {
  const auto root = fs::temp_directory_path() / "mfrw_report_single";
  fs::remove_all(root);
  const auto run = write_run(root, "ce_run", false);
  const auto svg = mfrw::render_svg(mfrw::build_chart({mfrw::load_run(run)}, "accuracy"));
  EXPECT_EQ(count(svg, "<polyline"), 3u);
  EXPECT_EQ(count(svg, "class=\"legend-entry\""), 1u);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  fs::remove_all(root);
}

TEST(Report, TwoRunsGiveTwoLegendEntriesAndDeterministicFiles) {
  const auto root = fs::temp_directory_path() / "mfrw_report_two";
  fs::remove_all(root);
  const auto a = write_run(root, "ce_run", false);
  const auto b = write_run(root, "mfrw_run", true);
  const auto table = mfrw::write_report({a, b}, root / "out1");
  mfrw::write_report({a, b}, root / "out2");
  for (const char* f : {"accuracy.svg", "loss.svg", "adv_weight.svg", "table.txt"}) {
    ASSERT_TRUE(fs::exists(root / "out1" / f)) << f;
    EXPECT_EQ(slurp(root / "out1" / f), slurp(root / "out2" / f)) << f;
  }
  const auto svg = slurp(root / "out1" / "accuracy.svg");
  EXPECT_EQ(count(svg, "class=\"legend-entry\""), 2u);
  EXPECT_EQ(count(svg, "<polyline"), 6u);
  EXPECT_NE(table.find("mfrw_run"), std::string::npos);
  EXPECT_NE(table.find("0.60/0.40"), std::string::npos);
  fs::remove_all(root);
}

TEST(Report, NoWeightChartWithoutWeights) {
  const auto root = fs::temp_directory_path() / "mfrw_report_noweights";
  fs::remove_all(root);
  const auto a = write_run(root, "ce_run", false);
  mfrw::write_report({a}, root / "out");
  EXPECT_FALSE(fs::exists(root / "out" / "adv_weight.svg"));
  fs::remove_all(root);
}

TEST(Report, MissingCsvIsAnError) {
  EXPECT_THROW(mfrw::load_run("/nonexistent/run"), mfrw::IoError);
  EXPECT_THROW(mfrw::write_report({}, "/tmp/unused"), mfrw::UsageError);
}
