// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mfrw/noise.hpp"
#include "mfrw/tensor.hpp"

namespace mfrw {

/// Examples with observed (possibly corrupted) and true labels.
struct LabeledDataset {
  Tensor x;  // [N x d_in]
  std::vector<int> y_true;
  std::vector<int> y_observed;
  std::vector<bool> corrupted;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return y_true.size(); }
  std::size_t input_dim() const noexcept { return x.cols(); }
  /// Throws ConsistencyError when lengths, label ranges or the mask disagree.
  void validate() const;
  LabeledDataset subset(std::span<const std::size_t> indices) const;
  /// Replaces observed labels and mask with a corruption of the true labels.
  void apply_noise(const NoiseSpec& spec);
};

/// One mini-batch gathered from a dataset.
struct Batch {
  Tensor x;
  std::vector<int> labels;  // observed
  std::vector<int> true_labels;
  std::vector<bool> corrupted;

  std::size_t size() const noexcept { return labels.size(); }
};

Batch gather(const LabeledDataset& data, std::span<const std::size_t> indices);
Batch full_batch(const LabeledDataset& data);

// --- IDX ------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an IDX image/label pair: pixels scaled from bytes to [0, 1] and
/// flattened; labels are clean (observed == true). `limit` keeps the first
/// examples only. `num_classes` defaults to max label + 1.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::optional<std::size_t> limit = std::nullopt,
                        std::optional<std::size_t> num_classes = std::nullopt);

/// Writes raw IDX files (big-endian headers, one unsigned byte per pixel).
void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

// --- synthetic ---------------------------------------------------------------

struct BlobsSpec {
  std::size_t n = 10000;
  std::size_t classes = 10;
  std::size_t input_dim = 32;
  double separation = 4.0;
  double noise_std = 1.0;
};

/// Gaussian clusters around class centers; returns centers too so a test set
/// can share them.
struct Blobs {
  LabeledDataset data;
  Tensor centers;  // [c x d_in]
};

/// Centers pairwise at least `separation` apart; class i % c for the i-th draw
/// before a seeded shuffle, so counts differ by at most one.
Blobs make_blobs(const BlobsSpec& spec, std::uint64_t seed);
/// Fresh samples around existing centers.
LabeledDataset sample_blobs(const Tensor& centers, std::size_t n, double noise_std, std::uint64_t seed);

// --- splitting and batching -------------------------------------------------

struct SplitSpec {
  std::size_t meta_size = 1000;
  std::uint64_t seed = 0;
};

struct MetaSplit {
  LabeledDataset train;
  LabeledDataset meta;
  std::vector<std::size_t> train_index;  // positions in the source dataset
  std::vector<std::size_t> meta_index;
};

/// Class-balanced clean meta set of floor(meta_size / c) examples per class;
/// the rest is train. Requires meta_size <= N / 10.
MetaSplit split_meta(const LabeledDataset& data, const SplitSpec& spec);

/// Seeded permutation of [0, n) cut into consecutive batches; the last may be short.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed);

/// Deterministic seed for a named random stream (e.g. shuffling at an epoch).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

}  // namespace mfrw
