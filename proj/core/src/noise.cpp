// SPDX-License-Identifier: Apache-2.0
#include "mfrw/noise.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "mfrw/errors.hpp"

namespace mfrw {

NoiseKind parse_noise_kind(const std::string& text) {
  if (text == "none") return NoiseKind::none;
  if (text == "flip") return NoiseKind::flip;
  if (text == "flip2") return NoiseKind::flip2;
  if (text == "flip3") return NoiseKind::flip3;
  throw SpecError("unknown noise kind '" + text + "' (expected none, flip, flip2 or flip3)");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::flip: return "flip";
    case NoiseKind::flip2: return "flip2";
    case NoiseKind::flip3: return "flip3";
  }
  return "none";
}

std::size_t target_count(NoiseKind kind) noexcept {
  switch (kind) {
    case NoiseKind::none: return 0;
    case NoiseKind::flip: return 1;
    case NoiseKind::flip2: return 2;
    case NoiseKind::flip3: return 3;
  }
  return 0;
}

TransitionMatrix::TransitionMatrix(std::size_t classes) : classes_(classes), data_(classes * classes, 0.0) {}

Pairing default_pairing(std::size_t classes, NoiseKind kind) {
  const std::size_t k = target_count(kind);
  if (classes < k + 1) {
    throw SpecError(to_string(kind) + " noise needs at least " + std::to_string(k + 1) + " classes, got " +
                    std::to_string(classes));
  }
  Pairing pairing(classes);
  for (std::size_t i = 0; i < classes; ++i) {
    for (std::size_t s = 1; s <= k; ++s) pairing[i].push_back(static_cast<int>((i + s) % classes));
  }
  return pairing;
}

void validate_pairing(const Pairing& pairing, std::size_t classes, NoiseKind kind) {
  const std::size_t k = target_count(kind);
  if (pairing.size() != classes) {
    throw SpecError("pairing covers " + std::to_string(pairing.size()) + " classes, expected " +
                    std::to_string(classes));
  }
  for (std::size_t i = 0; i < classes; ++i) {
    const auto& targets = pairing[i];
    if (targets.size() != k) {
      throw SpecError("class " + std::to_string(i) + " has " + std::to_string(targets.size()) + " targets, " +
                      to_string(kind) + " requires " + std::to_string(k));
    }
    std::set<int> seen;
    for (int t : targets) {
      if (t < 0 || static_cast<std::size_t>(t) >= classes) {
        throw SpecError("class " + std::to_string(i) + " targets out-of-range class " + std::to_string(t));
      }
      if (static_cast<std::size_t>(t) == i) throw SpecError("class " + std::to_string(i) + " targets itself");
      if (!seen.insert(t).second) {
        throw SpecError("class " + std::to_string(i) + " lists target " + std::to_string(t) + " twice");
      }
    }
  }
}

TransitionMatrix build_transition_matrix(const NoiseSpec& spec, std::size_t classes) {
  if (!(spec.p >= 0.0 && spec.p <= 1.0)) throw SpecError("noise level p must lie in [0, 1]");
  TransitionMatrix t(classes);
  if (spec.kind == NoiseKind::none) {
    for (std::size_t i = 0; i < classes; ++i) t.at(i, i) = 1.0;
    return t;
  }
  const Pairing pairing = spec.pairing.empty() ? default_pairing(classes, spec.kind) : spec.pairing;
  validate_pairing(pairing, classes, spec.kind);
  const double share = spec.p / static_cast<double>(target_count(spec.kind));
  for (std::size_t i = 0; i < classes; ++i) {
    t.at(i, i) = 1.0 - spec.p;
    for (int target : pairing[i]) t.at(i, static_cast<std::size_t>(target)) = share;
  }
  return t;
}

CorruptionResult corrupt_labels(std::span<const int> true_labels, const TransitionMatrix& t, std::uint64_t seed) {
  const std::size_t c = t.classes();
  std::vector<std::discrete_distribution<int>> rows;
  rows.reserve(c);
  for (std::size_t i = 0; i < c; ++i) {
    const auto r = t.row(i);
    rows.emplace_back(r.begin(), r.end());
  }
  std::mt19937_64 rng(seed);
  CorruptionResult out;
  out.observed.reserve(true_labels.size());
  out.corrupted.reserve(true_labels.size());
  for (int y : true_labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw InputError("corrupt_labels: label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
    }
    const int observed = rows[static_cast<std::size_t>(y)](rng);
    out.observed.push_back(observed);
    out.corrupted.push_back(observed != y);
  }
  return out;
}

}  // namespace mfrw
