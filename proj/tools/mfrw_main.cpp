// SPDX-License-Identifier: Apache-2.0
//
// mfrw: run, sweep, report and gen-data subcommands.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfrw/config.hpp"
#include "mfrw/errors.hpp"
#include "mfrw/experiment.hpp"
#include "mfrw/report.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned feature reweighting for noisy labels"};
  app.require_subcommand(1);

  std::string config_path;
  std::string outdir;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "train one configuration");
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--outdir", outdir, "override run.outdir");
  run->add_flag("-q,--quiet", quiet, "no per-epoch progress");

  std::vector<std::string> methods;
  std::vector<double> noise;
  std::vector<std::uint64_t> seeds;
  unsigned jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "run a method x noise x seed grid");
  sweep->add_option("config", config_path, "base config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--methods", methods, "methods (ce, mwnet, mfrw)")->required()->delimiter(',');
  sweep->add_option("--noise", noise, "noise levels p")->required()->delimiter(',');
  sweep->add_option("--seeds", seeds, "seeds")->required()->delimiter(',');
  sweep->add_option("--outdir", outdir, "override run.outdir");
  sweep->add_option("-j,--jobs", jobs, "cells run concurrently")->check(CLI::PositiveNumber);

  std::vector<std::string> dirs;
  std::string report_out = "report";
  auto* report = app.add_subcommand("report", "plot metrics of finished runs");
  report->add_option("dirs", dirs, "run directories")->required();
  report->add_option("-o,--out", report_out, "output directory")->capture_default_str();

  auto* gen = app.add_subcommand("gen-data", "write the prepared datasets as CSV");
  gen->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  gen->add_option("--outdir", outdir, "override run.outdir");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*report) {
      std::vector<fs::path> paths(dirs.begin(), dirs.end());
      std::cout << mfrw::write_report(paths, report_out);
      return 0;
    }

    auto config = mfrw::load_config(config_path);
    if (!outdir.empty()) config.outdir = outdir;

    if (*run) {
      const auto outcome = mfrw::run_experiment(config, quiet ? nullptr : &std::cerr);
      std::cout << "final_test_accuracy = " << mfrw::format_number(outcome.final_test_accuracy) << "\n";
      return 0;
    }
    if (*gen) {
      mfrw::generate_data(config);
      std::cout << "wrote " << config.outdir.string() << "\n";
      return 0;
    }
    if (*sweep) {
      mfrw::SweepOptions opt;
      for (const auto& m : methods) opt.methods.push_back(mfrw::parse_method(m));
      opt.noise_levels = noise;
      opt.seeds = seeds;
      opt.outdir = config.outdir;
      opt.jobs = jobs;
      const auto result = mfrw::run_sweep(config, opt, &std::cerr);
      mfrw::write_table_csv(std::cout, result.table);
      if (!result.all_ok) {
        std::cerr << "error: some sweep cells failed\n";
        return 1;
      }
      return 0;
    }
  } catch (const mfrw::ValidationError& e) {
    std::cerr << "error: invalid config (" << e.field() << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
