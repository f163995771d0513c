// SPDX-License-Identifier: Apache-2.0
//
// Structured label corruption. Flip sends each class to one designated
// similar class with probability p; Flip2 and Flip3 spread p evenly over two
// or three designated classes. The diagonal always keeps 1 - p, so an example
// is relabelled with probability exactly p.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mfrw {

enum class NoiseKind { none, flip, flip2, flip3 };

NoiseKind parse_noise_kind(const std::string& text);
std::string to_string(NoiseKind kind);
/// Number of corruption targets per class (0 for none).
std::size_t target_count(NoiseKind kind) noexcept;

/// targets[i] lists the classes that class i may be relabelled as.
using Pairing = std::vector<std::vector<int>>;

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double p = 0.0;
  Pairing pairing;  // empty: default_pairing(c, kind)
  std::uint64_t seed = 0;
};

class TransitionMatrix {
 public:
  explicit TransitionMatrix(std::size_t classes);

  std::size_t classes() const noexcept { return classes_; }
  double at(std::size_t true_class, std::size_t observed) const { return data_[true_class * classes_ + observed]; }
  double& at(std::size_t true_class, std::size_t observed) { return data_[true_class * classes_ + observed]; }
  std::span<const double> row(std::size_t true_class) const {
    return std::span<const double>(data_).subspan(true_class * classes_, classes_);
  }

 private:
  std::size_t classes_;
  std::vector<double> data_;
};

/// Cyclic successors: class i targets (i+1), (i+2), ... mod c.
Pairing default_pairing(std::size_t classes, NoiseKind kind);

/// Throws SpecError unless every class has exactly target_count(kind) distinct
/// in-range targets, none equal to itself.
void validate_pairing(const Pairing& pairing, std::size_t classes, NoiseKind kind);

TransitionMatrix build_transition_matrix(const NoiseSpec& spec, std::size_t classes);

struct CorruptionResult {
  std::vector<int> observed;
  std::vector<bool> corrupted;
};

/// Resamples each label from its row of `t`. Deterministic in `seed`.
CorruptionResult corrupt_labels(std::span<const int> true_labels, const TransitionMatrix& t, std::uint64_t seed);

}  // namespace mfrw
