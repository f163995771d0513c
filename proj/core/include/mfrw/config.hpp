// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: one INI-style text file with flat sections.
// Every key is optional except run.method; see README for the full table.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mfrw/data.hpp"
#include "mfrw/metaloop.hpp"
#include "mfrw/noise.hpp"

namespace mfrw {

struct DataSource {
  enum class Kind { blobs, idx };
  Kind kind = Kind::blobs;

  // blobs
  BlobsSpec blobs;
  std::size_t test_n = 1000;
  std::uint64_t seed = 0;

  // idx
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::optional<std::size_t> limit;
  std::optional<std::size_t> test_limit;
};

struct ExperimentConfig {
  DataSource data;
  NoiseSpec noise;
  SplitSpec split;
  TrainConfig train;  // train.method is run.method
  std::filesystem::path outdir = "out";
};

/// Parses and validates config text. Unknown keys raise ConfigError naming
/// the key; invariant violations raise ValidationError with the field path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Re-checks every invariant; parse_config calls this.
void validate(const ExperimentConfig& config);

/// Sets every seed of the run (data, split, noise, init, shuffle) from one value.
void apply_seed(ExperimentConfig& config, std::uint64_t seed);

/// Canonical text for a config; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& config);

}  // namespace mfrw
