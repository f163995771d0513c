// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mfrw/experiment.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kCli = MFRW_CLI_PATH;
const fs::path kSource = MFRW_SOURCE_DIR;

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + kCli.string() + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mfrw_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string smoke() { return "\"" + (kSource / "configs" / "smoke.ini").string() + "\""; }

}  // namespace

TEST(Cli, RunWritesMetricsSummaryAndConfig) {
  const auto dir = scratch("run");
  ASSERT_EQ(run_cli("run -q " + smoke() + " --outdir " + (dir / "r").string()), 0);
  const auto csv = slurp(dir / "r" / "metrics.csv");
  EXPECT_EQ(csv.rfind("epoch,split,loss,accuracy,adv_w_clean,adv_w_noisy\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  const auto summary = mfrw::read_summary(dir / "r" / "summary.txt");
  const double acc = std::stod(summary.at("final_test_accuracy"));
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  EXPECT_TRUE(fs::exists(dir / "r" / "config.ini"));
  fs::remove_all(dir);
}

TEST(Cli, SameConfigTwiceIsByteIdentical) {
  const auto dir = scratch("det");
  ASSERT_EQ(run_cli("run -q " + smoke() + " --outdir " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("run -q " + smoke() + " --outdir " + (dir / "b").string()), 0);
  EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
  fs::remove_all(dir);
}

TEST(Cli, SweepThenReport) {
  const auto dir = scratch("sweep");
  ASSERT_EQ(run_cli("sweep " + smoke() + " --methods ce,mfrw --noise 0,0.4 --seeds 1,2 -j 4 --outdir " +
                    (dir / "grid").string()),
            0);
  const auto table = slurp(dir / "grid" / "table.csv");
  EXPECT_EQ(table.rfind("method,p=0,p=0.4\nce,", 0), 0u);
  EXPECT_NE(table.find("\nmfrw,"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '*'), 2);

  const auto a = dir / "grid" / mfrw::cell_name(mfrw::Method::ce, 0.4, 1);
  const auto b = dir / "grid" / mfrw::cell_name(mfrw::Method::mfrw, 0.4, 1);
  ASSERT_EQ(run_cli("report " + a.string() + " " + b.string() + " -o " + (dir / "rep").string()), 0);
  for (const char* f : {"accuracy.svg", "loss.svg", "adv_weight.svg", "table.txt"}) {
    EXPECT_TRUE(fs::exists(dir / "rep" / f)) << f;
  }
  const auto svg = slurp(dir / "rep" / "accuracy.svg");
  std::size_t legends = 0;
  for (auto pos = svg.find("legend-entry"); pos != std::string::npos; pos = svg.find("legend-entry", pos + 1)) {
    ++legends;
  }
  EXPECT_EQ(legends, 2u);
  fs::remove_all(dir);
}

TEST(Cli, GenDataWritesSplits) {
  const auto dir = scratch("gen");
  ASSERT_EQ(run_cli("gen-data " + smoke() + " --outdir " + dir.string()), 0);
  for (const char* f : {"train.csv", "meta.csv", "test.csv", "transition.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  fs::remove_all(dir);
}

TEST(Cli, InvalidConfigExitsWithValidationCode) {
  const auto dir = scratch("bad");
  std::ofstream(dir / "bad.ini") << "[run]\nmethod = ce\n[noise]\nkind = flip\np = 1.3\n";
  EXPECT_EQ(run_cli("run " + (dir / "bad.ini").string()), 2);
  std::ofstream(dir / "unknown.ini") << "[run]\nmethod = ce\nspeed = 3\n";
  EXPECT_NE(run_cli("run " + (dir / "unknown.ini").string()), 0);
  fs::remove_all(dir);
}

TEST(Cli, MissingInputsFail) {
  EXPECT_NE(run_cli("run /nonexistent/config.ini"), 0);
  EXPECT_NE(run_cli("report /nonexistent/run -o /tmp/mfrw_cli_unused"), 0);
  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_NE(run_cli(""), 0);
}
