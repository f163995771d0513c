// SPDX-License-Identifier: Apache-2.0
#include "mfrw/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "mfrw/errors.hpp"

namespace mfrw {

void LabeledDataset::validate() const {
  const std::size_t n = y_true.size();
  if (y_observed.size() != n || corrupted.size() != n || x.rows() != n) {
    throw ConsistencyError("dataset arrays disagree in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (y_true[i] < 0 || static_cast<std::size_t>(y_true[i]) >= num_classes || y_observed[i] < 0 ||
        static_cast<std::size_t>(y_observed[i]) >= num_classes) {
      throw ConsistencyError("label outside [0, " + std::to_string(num_classes) + ") at index " + std::to_string(i));
    }
    if (corrupted[i] != (y_observed[i] != y_true[i])) {
      throw ConsistencyError("corruption mask inconsistent at index " + std::to_string(i));
    }
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  const std::size_t d = input_dim();
  std::vector<double> xs;
  xs.reserve(indices.size() * d);
  for (auto i : indices) {
    if (i >= size()) throw UsageError("subset index out of range");
    const auto row = x.data().subspan(i * d, d);
    xs.insert(xs.end(), row.begin(), row.end());
    out.y_true.push_back(y_true[i]);
    out.y_observed.push_back(y_observed[i]);
    out.corrupted.push_back(corrupted[i]);
  }
  if (!indices.empty()) out.x = Tensor::matrix(indices.size(), d, std::move(xs));
  return out;
}

void LabeledDataset::apply_noise(const NoiseSpec& spec) {
  const auto t = build_transition_matrix(spec, num_classes);
  auto result = corrupt_labels(y_true, t, spec.seed);
  y_observed = std::move(result.observed);
  corrupted = std::move(result.corrupted);
}

Batch gather(const LabeledDataset& data, std::span<const std::size_t> indices) {
  const auto sub = data.subset(indices);
  return Batch{sub.x, sub.y_observed, sub.y_true, sub.corrupted};
}

Batch full_batch(const LabeledDataset& data) {
  return Batch{data.x, data.y_observed, data.y_true, data.corrupted};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) throw IoError(path.string() + ": truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                              static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::optional<std::size_t> limit, std::optional<std::size_t> num_classes) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);

  const auto img_magic = read_be32(img, 0, images);
  if (img_magic != kIdxImageMagic) throw FormatError(images.string() + ": bad image magic");
  const auto lab_magic = read_be32(lab, 0, labels);
  if (lab_magic != kIdxLabelMagic) throw FormatError(labels.string() + ": bad label magic");

  const std::size_t n_img = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t n_lab = read_be32(lab, 4, labels);
  if (n_img != n_lab) {
    throw ConsistencyError("image count " + std::to_string(n_img) + " != label count " + std::to_string(n_lab));
  }
  if (n_img == 0 || rows == 0 || cols == 0) throw FormatError(images.string() + ": empty image set");
  const std::size_t d = rows * cols;
  if (img.size() < 16 + n_img * d) throw IoError(images.string() + ": truncated pixel data");
  if (lab.size() < 8 + n_lab) throw IoError(labels.string() + ": truncated label data");

  const std::size_t n = limit ? std::min(*limit, n_img) : n_img;
  LabeledDataset out;
  std::vector<double> xs(n * d);
  for (std::size_t i = 0; i < n * d; ++i) xs[i] = static_cast<double>(img[16 + i]) / 255.0;
  out.x = Tensor::matrix(n, d, std::move(xs));
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = lab[8 + i];
    max_label = std::max(max_label, y);
    out.y_true.push_back(y);
  }
  out.y_observed = out.y_true;
  out.corrupted.assign(n, false);
  out.num_classes = num_classes.value_or(static_cast<std::size_t>(max_label) + 1);
  out.validate();
  return out;
}

void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels) {
  if (rows == 0 || cols == 0 || pixels.size() % (rows * cols) != 0) {
    throw UsageError("write_idx_images: pixel count is not a multiple of rows*cols");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(pixels.size() / (rows * cols)));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

// ---------------------------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t{out[0]} << 32) | out[1];
}

Blobs make_blobs(const BlobsSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2) throw InputError("make_blobs: need at least 2 classes");
  if (spec.n < spec.classes) throw InputError("make_blobs: N must be >= number of classes");
  if (spec.input_dim == 0) throw InputError("make_blobs: input_dim must be >= 1");
  if (spec.separation < 0.0 || spec.noise_std < 0.0) throw InputError("make_blobs: negative scale");

  std::mt19937_64 rng(derive_seed(seed, 0));
  const std::size_t c = spec.classes, d = spec.input_dim;

  // Rejection sampling in a cube that grows when it gets crowded.
  Tensor centers({c, d});
  double half_width = std::max(spec.separation, 1e-9);
  std::size_t placed = 0, failures = 0;
  std::vector<double> candidate(d);
  while (placed < c) {
    std::uniform_real_distribution<double> coord(-half_width, half_width);
    for (auto& v : candidate) v = coord(rng);
    bool ok = true;
    for (std::size_t k = 0; k < placed && ok; ++k) {
      double dist2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = candidate[j] - centers.at(k, j);
        dist2 += diff * diff;
      }
      ok = std::sqrt(dist2) >= spec.separation;
    }
    if (ok) {
      std::copy(candidate.begin(), candidate.end(), centers.data().begin() + static_cast<std::ptrdiff_t>(placed * d));
      ++placed;
      failures = 0;
    } else if (++failures >= 1000) {
      half_width *= 1.1;
      failures = 0;
    }
  }
  return Blobs{sample_blobs(centers, spec.n, spec.noise_std, derive_seed(seed, 1)), centers};
}

LabeledDataset sample_blobs(const Tensor& centers, std::size_t n, double noise_std, std::uint64_t seed) {
  const std::size_t c = centers.dim(0), d = centers.dim(1);
  std::mt19937_64 rng(seed);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % c);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> xs(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    for (std::size_t j = 0; j < d; ++j) xs[i * d + j] = centers.at(k, j) + noise_std * gauss(rng);
  }
  LabeledDataset out;
  out.x = Tensor::matrix(n, d, std::move(xs));
  out.y_true = labels;
  out.y_observed = std::move(labels);
  out.corrupted.assign(n, false);
  out.num_classes = c;
  return out;
}

MetaSplit split_meta(const LabeledDataset& data, const SplitSpec& spec) {
  const std::size_t n = data.size(), c = data.num_classes;
  if (spec.meta_size == 0) throw InputError("split_meta: meta_size must be >= 1");
  if (spec.meta_size > n / 10) {
    throw InputError("split_meta: meta_size " + std::to_string(spec.meta_size) + " exceeds N/10 = " +
                     std::to_string(n / 10));
  }
  const std::size_t per_class = spec.meta_size / c;
  if (per_class == 0) throw InputError("split_meta: meta_size smaller than the number of classes");

  std::vector<std::vector<std::size_t>> by_class(c);
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(data.y_true[i])].push_back(i);

  std::mt19937_64 rng(spec.seed);
  std::vector<bool> in_meta(n, false);
  MetaSplit out;
  for (std::size_t k = 0; k < c; ++k) {
    auto& pool = by_class[k];
    if (pool.size() < per_class) {
      throw InputError("split_meta: class " + std::to_string(k) + " has only " + std::to_string(pool.size()) +
                       " examples, " + std::to_string(per_class) + " needed");
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t j = 0; j < per_class; ++j) in_meta[pool[j]] = true;
  }
  for (std::size_t i = 0; i < n; ++i) (in_meta[i] ? out.meta_index : out.train_index).push_back(i);

  out.train = data.subset(out.train_index);
  out.meta = data.subset(out.meta_index);
  // The meta set is clean by construction.
  out.meta.y_observed = out.meta.y_true;
  out.meta.corrupted.assign(out.meta.size(), false);
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed) {
  if (batch_size == 0) throw InputError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

}  // namespace mfrw
