// SPDX-License-Identifier: Apache-2.0
//
// Training algorithms over the networks in nets.hpp:
//
//   ce     plain softmax cross-entropy with SGD momentum.
//   mwnet  per-example loss weights V_i = Psi(loss_i; theta), learned online
//          with a virtual step, a meta step and an actual step.
//   mfrw   per-feature attention W_f = Psi(f, L_pre; theta) applied to the
//          backbone features before the classifier, learned with four phases
//          per iteration: loss pre-calculation, virtual train, meta train and
//          actual train.
//
// The meta step needs d L_meta(w_hat(theta)) / d theta where
// w_hat(theta) = w - alpha * grad_w L_train(w, theta). With v the meta-loss
// gradient at w_hat, that hypergradient equals -alpha * (d^2 L_train / d theta d w) v,
// which is approximated by a central difference of first-order theta
// gradients taken at w +- eps * v, eps = eps_scale / ||v||.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfrw/data.hpp"
#include "mfrw/nets.hpp"
#include "mfrw/optim.hpp"
#include "mfrw/tensor.hpp"

namespace mfrw {

enum class Method { ce, mwnet, mfrw };

Method parse_method(const std::string& text);
std::string to_string(Method method);

struct HypergradSpec {
  enum class Mode { finite_difference, disabled };
  Mode mode = Mode::finite_difference;
  double eps_scale = 0.01;
};

struct Networks {
  MainModelSpec main;
  AdvisorSpec advisor;
  MwNetSpec mwnet;
};

/// Everything one iteration needs besides the mutable state.
struct LoopContext {
  Networks nets;
  double lr = 0.1;  // alpha, for both the virtual and the actual step
  HypergradSpec hyper;
  /// When set, the meta-model output is replaced by this constant (every
  /// attention entry for mfrw, every example weight for mwnet). Used for
  /// ablations and reduction checks.
  std::optional<double> forced_weight;
};

struct TrainerState {
  ParamSet w{ParamRole::main_w};
  ParamSet theta{ParamRole::meta_theta};
  SgdState sgd;
  AdamState adam;
  std::int64_t iteration = 0;
};

/// Clone of the main parameters after one vanilla SGD step.
struct VirtualModel {
  ParamSet weights{ParamRole::main_w};
  std::int64_t source_iteration = 0;
};

struct IterationTrace {
  std::int64_t iteration = 0;
  Tensor pre_loss;                     // [n], loss of the unattended model
  std::vector<double> example_weight;  // [n], mean W_f per example (mfrw) or V_i (mwnet); empty for ce
  std::optional<double> mean_weight_clean;
  std::optional<double> mean_weight_noisy;
  double train_loss = 0.0;
  std::optional<double> meta_loss;
};

struct HypergradResult {
  std::vector<Tensor> grad;  // aligned with theta
  double meta_loss = 0.0;
  double v_norm = 0.0;
  double eps = 0.0;
};

/// Per-example cross-entropy of the full unattended model; no gradients.
Tensor loss_precalculate(const MainModelSpec& spec, const ParamSet& w, const Batch& batch);

/// Mean training loss of `method` with main parameters `w` and meta
/// parameters `theta` bound on `tape` (tracking decided by the caller).
/// `pre_loss` feeds the meta-model. Scalarised per-example weights are written
/// to `example_weight` when non-null.
ad::Var weighted_train_loss(const LoopContext& ctx, Method method, ad::Tape& tape, std::span<const ad::Var> w,
                            std::span<const ad::Var> theta, const Batch& batch, const Tensor& pre_loss,
                            std::vector<double>* example_weight = nullptr);

/// w_hat = w - alpha * grad_w L_train(w, theta). theta and w are not modified.
VirtualModel virtual_train(const LoopContext& ctx, Method method, const ParamSet& w, const ParamSet& theta,
                           const Batch& batch, const Tensor& pre_loss, std::int64_t iteration = 0);
VirtualModel virtual_train_mfrw(const LoopContext& ctx, const ParamSet& w, const ParamSet& theta, const Batch& batch,
                                const Tensor& pre_loss, std::int64_t iteration = 0);

/// Mean clean-set loss of a main model; the meta batch bypasses the meta-model.
double meta_loss(const MainModelSpec& spec, const ParamSet& w, const Batch& meta_batch);

/// Finite-difference hypergradient d L_meta(w_hat(theta)) / d theta.
/// Throws DegenerateGradientError when the meta-loss gradient at w_hat is zero.
HypergradResult compute_hypergradient(const LoopContext& ctx, Method method, const ParamSet& w,
                                      const ParamSet& theta, const Batch& batch_train, const Tensor& pre_loss,
                                      const Batch& batch_meta);

struct MetaTrainResult {
  ParamSet theta{ParamRole::meta_theta};
  HypergradResult hypergrad;
};

/// theta' = adam_step(theta, hypergradient). w is not modified.
MetaTrainResult meta_train(const LoopContext& ctx, Method method, const ParamSet& w, const ParamSet& theta,
                           const Batch& batch_train, const Tensor& pre_loss, const Batch& batch_meta,
                           AdamState& adam);

/// Real optimizer step on w with the meta-model held fixed at `theta`.
/// Returns the trace fields that depend on the step (weights, train loss).
IterationTrace actual_train(const LoopContext& ctx, Method method, ParamSet& w, const ParamSet& theta,
                            const Batch& batch, const Tensor& pre_loss, SgdState& sgd);
IterationTrace actual_train_mfrw(const LoopContext& ctx, ParamSet& w, const ParamSet& theta, const Batch& batch,
                                 const Tensor& pre_loss, SgdState& sgd);

IterationTrace mfrw_iteration(const LoopContext& ctx, TrainerState& state, const Batch& batch_train,
                              const Batch& batch_meta);
IterationTrace mwnet_iteration(const LoopContext& ctx, TrainerState& state, const Batch& batch_train,
                               const Batch& batch_meta);
IterationTrace ce_iteration(const LoopContext& ctx, TrainerState& state, const Batch& batch_train);

// --- full training runs ------------------------------------------------------

struct TrainConfig {
  Method method = Method::mfrw;
  Networks nets;
  LrSchedule lr{0.1, {50, 70}};
  SgdConfig sgd;
  AdamConfig adam;
  std::size_t batch_size = 128;
  std::size_t meta_batch_size = 128;
  int epochs = 100;
  HypergradSpec hyper;
  std::uint64_t init_seed = 0;
  std::uint64_t shuffle_seed = 0;
  std::optional<double> forced_weight;
};

struct Datasets {
  LabeledDataset train;
  LabeledDataset meta;
  LabeledDataset test;
};

struct SplitMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  SplitMetrics train;  // against observed labels
  SplitMetrics meta;
  SplitMetrics test;
  std::optional<double> weight_clean;  // mean meta-model weight over clean train examples
  std::optional<double> weight_noisy;  // ... over corrupted train examples
};

struct TrainResult {
  ParamSet model{ParamRole::main_w};  // main network only
  SplitMetrics initial_test;
  std::vector<EpochMetrics> history;
};

/// Loss and accuracy of the main model; `use_true_labels` selects the label column.
SplitMetrics evaluate(const MainModelSpec& spec, const ParamSet& w, const LabeledDataset& data, bool use_true_labels);

/// Initial trainer state: main weights, the method's meta-model and optimizer states.
TrainerState initial_state(const TrainConfig& config);

using EpochCallback = std::function<void(const EpochMetrics&)>;

TrainResult train(const TrainConfig& config, const Datasets& data, const EpochCallback& on_epoch = {});

}  // namespace mfrw
