// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations for the test suites. Nothing here uses
// the tape: gradients come from central differences of forward values, and
// cross-entropy is recomputed in long double.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mfrw/data.hpp"
#include "mfrw/metaloop.hpp"
#include "mfrw/nets.hpp"
#include "mfrw/tensor.hpp"

namespace mfrw::testing {

/// Hand-rolled generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  Tensor normal(Tensor::Shape shape, double stddev = 1.0);
  Tensor uniform(Tensor::Shape shape, double lo, double hi);
  int integer(int lo, int hi);  // inclusive
  std::vector<int> labels(std::size_t n, std::size_t classes);
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

using ScalarFn = std::function<double(const ParamSet&)>;

/// Central differences of f over every coordinate of p.
std::vector<Tensor> numeric_gradient(const ScalarFn& f, const ParamSet& p, double step);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(std::span<const Tensor> a, std::span<const Tensor> b, double floor);
double cosine_similarity(std::span<const Tensor> a, std::span<const Tensor> b);
/// ||a - b|| / ||b||
double relative_l2_error(std::span<const Tensor> a, std::span<const Tensor> b);

/// Per-example softmax cross-entropy in long double via log-sum-exp.
std::vector<long double> reference_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Plain-algebra forward of the main model (no tape): relu(x W + b) per
/// backbone layer, then an affine classifier.
Tensor reference_logits(const MainModelSpec& spec, const ParamSet& w, const Tensor& x);

/// theta -> L_meta(w_hat(theta)) differentiated coordinate by coordinate,
/// running the whole virtual step for every probe.
std::vector<Tensor> brute_force_hypergradient(const LoopContext& ctx, Method method, const ParamSet& w,
                                              const ParamSet& theta, const Batch& batch, const Tensor& pre_loss,
                                              const Batch& meta_batch, double step);

/// Small fully specified meta-learning instance with randomized meta-model
/// weights (a zero output layer would hide every other theta coordinate).
struct TinyProblem {
  LoopContext ctx;
  ParamSet w{ParamRole::main_w};
  ParamSet theta{ParamRole::meta_theta};
  Batch train;
  Batch meta;
  Tensor pre_loss;
};

/// 2-dim inputs, 3-unit features, 2 classes, batches of 4.
TinyProblem make_tiny_problem(Method method, std::uint64_t seed);

/// Random dataset of Gaussian points with the given labels count per class.
Batch random_batch(Gen& gen, std::size_t n, std::size_t input_dim, std::size_t classes);

}  // namespace mfrw::testing
