// SPDX-License-Identifier: Apache-2.0
#include "mfrw/metaloop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfrw/errors.hpp"

namespace mfrw {

Method parse_method(const std::string& text) {
  if (text == "ce") return Method::ce;
  if (text == "mwnet") return Method::mwnet;
  if (text == "mfrw") return Method::mfrw;
  throw InputError("unknown method '" + text + "' (expected ce, mwnet or mfrw)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::ce: return "ce";
    case Method::mwnet: return "mwnet";
    case Method::mfrw: return "mfrw";
  }
  return "ce";
}

namespace {

ad::Var constant_weights(ad::Tape& tape, Tensor::Shape shape, double value) {
  return tape.constant(Tensor(std::move(shape), value));
}

void check_pre_loss(const Batch& batch, const Tensor& pre_loss) {
  if (pre_loss.size() != batch.size()) {
    throw UsageError("pre-computed losses cover " + std::to_string(pre_loss.size()) + " examples, batch has " +
                     std::to_string(batch.size()));
  }
}

void split_means(const std::vector<double>& weights, const std::vector<bool>& corrupted, IterationTrace& trace) {
  double clean = 0.0, noisy = 0.0;
  std::size_t n_clean = 0, n_noisy = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (corrupted[i]) {
      noisy += weights[i];
      ++n_noisy;
    } else {
      clean += weights[i];
      ++n_clean;
    }
  }
  if (n_clean > 0) trace.mean_weight_clean = clean / static_cast<double>(n_clean);
  if (n_noisy > 0) trace.mean_weight_noisy = noisy / static_cast<double>(n_noisy);
}

std::vector<Tensor> zero_grads(const ParamSet& p) {
  std::vector<Tensor> out;
  for (const auto& t : p.tensors()) out.push_back(zeros_like(t));
  return out;
}

}  // namespace

Tensor loss_precalculate(const MainModelSpec& spec, const ParamSet& w, const Batch& batch) {
  ad::Tape tape;
  const auto vars = bind(tape, w, Tracking::constant);
  const auto f = backbone_forward(spec.backbone, tape.constant(batch.x), backbone_part(spec, vars));
  const auto logits = classifier_forward(spec.classifier, f, classifier_part(spec, vars));
  return ad::softmax_cross_entropy(logits, batch.labels).value();
}

ad::Var weighted_train_loss(const LoopContext& ctx, Method method, ad::Tape& tape, std::span<const ad::Var> w,
                            std::span<const ad::Var> theta, const Batch& batch, const Tensor& pre_loss,
                            std::vector<double>* example_weight) {
  const auto& spec = ctx.nets.main;
  const auto x = tape.constant(batch.x);
  ad::Var f = backbone_forward(spec.backbone, x, backbone_part(spec, w));

  if (method == Method::mfrw) {
    check_pre_loss(batch, pre_loss);
    const ad::Var attention = ctx.forced_weight ? constant_weights(tape, f.value().shape(), *ctx.forced_weight)
                                                : advisor_forward(ctx.nets.advisor, f, pre_loss, theta);
    if (example_weight) {
      const auto& a = attention.value();
      const auto n = a.dim(0), d = a.dim(1);
      example_weight->assign(n, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += a.at(r, c);
        (*example_weight)[r] = s / static_cast<double>(d);
      }
    }
    f = ad::hadamard(f, attention);
  }

  const auto logits = classifier_forward(spec.classifier, f, classifier_part(spec, w));
  ad::Var losses = ad::softmax_cross_entropy(logits, batch.labels);

  if (method == Method::mwnet) {
    check_pre_loss(batch, pre_loss);
    const ad::Var v = ctx.forced_weight ? constant_weights(tape, {batch.size()}, *ctx.forced_weight)
                                        : mwnet_forward(ctx.nets.mwnet, pre_loss, theta);
    if (example_weight) example_weight->assign(v.value().data().begin(), v.value().data().end());
    losses = ad::hadamard(v, losses);
  }
  return ad::mean(losses);
}

VirtualModel virtual_train(const LoopContext& ctx, Method method, const ParamSet& w, const ParamSet& theta,
                           const Batch& batch, const Tensor& pre_loss, std::int64_t iteration) {
  ad::Tape tape;
  const auto w_vars = bind(tape, w, Tracking::tracked);
  const auto theta_vars = bind(tape, theta, Tracking::constant);
  const auto loss = weighted_train_loss(ctx, method, tape, w_vars, theta_vars, batch, pre_loss);
  const auto grads = tape.backward(loss).collect(w_vars);
  VirtualModel vm{w.clone(), iteration};
  sgd_step(vm.weights, grads, ctx.lr);
  return vm;
}

VirtualModel virtual_train_mfrw(const LoopContext& ctx, const ParamSet& w, const ParamSet& theta, const Batch& batch,
                                const Tensor& pre_loss, std::int64_t iteration) {
  return virtual_train(ctx, Method::mfrw, w, theta, batch, pre_loss, iteration);
}

double meta_loss(const MainModelSpec& spec, const ParamSet& w, const Batch& meta_batch) {
  return mean_of(loss_precalculate(spec, w, meta_batch));
}

HypergradResult compute_hypergradient(const LoopContext& ctx, Method method, const ParamSet& w,
                                      const ParamSet& theta, const Batch& batch_train, const Tensor& pre_loss,
                                      const Batch& batch_meta) {
  HypergradResult out;
  if (ctx.hyper.mode == HypergradSpec::Mode::disabled || theta.empty()) {
    out.grad = zero_grads(theta);
    return out;
  }
  const auto& spec = ctx.nets.main;
  const VirtualModel vm = virtual_train(ctx, method, w, theta, batch_train, pre_loss);

  // v = grad of the meta loss at the virtual weights.
  std::vector<Tensor> v;
  {
    ad::Tape tape;
    const auto w_hat = bind(tape, vm.weights, Tracking::tracked);
    const auto f = backbone_forward(spec.backbone, tape.constant(batch_meta.x), backbone_part(spec, w_hat));
    const auto logits = classifier_forward(spec.classifier, f, classifier_part(spec, w_hat));
    const auto loss = ad::mean(ad::softmax_cross_entropy(logits, batch_meta.labels));
    out.meta_loss = loss.value().item();
    v = tape.backward(loss).collect(w_hat);
  }
  out.v_norm = l2_norm(v);
  if (!(out.v_norm > 0.0)) {
    throw DegenerateGradientError("meta-loss gradient vanished at the virtual model; cannot form a hypergradient");
  }
  out.eps = ctx.hyper.eps_scale / out.v_norm;

  auto theta_grad_at = [&](double shift) {
    const ParamSet w_shifted = w.shifted(shift, v);
    ad::Tape tape;
    const auto w_vars = bind(tape, w_shifted, Tracking::constant);
    const auto theta_vars = bind(tape, theta, Tracking::tracked);
    const auto loss = weighted_train_loss(ctx, method, tape, w_vars, theta_vars, batch_train, pre_loss);
    return tape.backward(loss).collect(theta_vars);
  };
  const auto g_plus = theta_grad_at(out.eps);
  const auto g_minus = theta_grad_at(-out.eps);

  const double coeff = -ctx.lr / (2.0 * out.eps);
  out.grad.reserve(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Tensor g = g_plus[i];
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = coeff * (g_plus[i][k] - g_minus[i][k]);
    out.grad.push_back(std::move(g));
  }
  return out;
}

MetaTrainResult meta_train(const LoopContext& ctx, Method method, const ParamSet& w, const ParamSet& theta,
                           const Batch& batch_train, const Tensor& pre_loss, const Batch& batch_meta,
                           AdamState& adam) {
  MetaTrainResult out{theta.clone(), compute_hypergradient(ctx, method, w, theta, batch_train, pre_loss, batch_meta)};
  if (!out.theta.empty() && ctx.hyper.mode != HypergradSpec::Mode::disabled) {
    adam_step(out.theta, out.hypergrad.grad, adam);
  }
  return out;
}

IterationTrace actual_train(const LoopContext& ctx, Method method, ParamSet& w, const ParamSet& theta,
                            const Batch& batch, const Tensor& pre_loss, SgdState& sgd) {
  IterationTrace trace;
  ad::Tape tape;
  const auto w_vars = bind(tape, w, Tracking::tracked);
  const auto theta_vars = bind(tape, theta, Tracking::constant);
  const auto loss = weighted_train_loss(ctx, method, tape, w_vars, theta_vars, batch, pre_loss,
                                        method == Method::ce ? nullptr : &trace.example_weight);
  trace.train_loss = loss.value().item();
  const auto grads = tape.backward(loss).collect(w_vars);
  sgd_momentum_step(w, grads, ctx.lr, sgd);
  if (!trace.example_weight.empty()) split_means(trace.example_weight, batch.corrupted, trace);
  return trace;
}

IterationTrace actual_train_mfrw(const LoopContext& ctx, ParamSet& w, const ParamSet& theta, const Batch& batch,
                                 const Tensor& pre_loss, SgdState& sgd) {
  return actual_train(ctx, Method::mfrw, w, theta, batch, pre_loss, sgd);
}

namespace {

IterationTrace meta_iteration(Method method, const LoopContext& ctx, TrainerState& state, const Batch& batch_train,
                              const Batch& batch_meta) {
  const Tensor pre = loss_precalculate(ctx.nets.main, state.w, batch_train);
  auto meta = meta_train(ctx, method, state.w, state.theta, batch_train, pre, batch_meta, state.adam);
  state.theta = std::move(meta.theta);
  IterationTrace trace = actual_train(ctx, method, state.w, state.theta, batch_train, pre, state.sgd);
  trace.iteration = state.iteration++;
  trace.pre_loss = pre;
  if (ctx.hyper.mode != HypergradSpec::Mode::disabled) trace.meta_loss = meta.hypergrad.meta_loss;
  return trace;
}

}  // namespace

IterationTrace mfrw_iteration(const LoopContext& ctx, TrainerState& state, const Batch& batch_train,
                              const Batch& batch_meta) {
  return meta_iteration(Method::mfrw, ctx, state, batch_train, batch_meta);
}

IterationTrace mwnet_iteration(const LoopContext& ctx, TrainerState& state, const Batch& batch_train,
                               const Batch& batch_meta) {
  return meta_iteration(Method::mwnet, ctx, state, batch_train, batch_meta);
}

IterationTrace ce_iteration(const LoopContext& ctx, TrainerState& state, const Batch& batch_train) {
  const Tensor pre = loss_precalculate(ctx.nets.main, state.w, batch_train);
  IterationTrace trace = actual_train(ctx, Method::ce, state.w, state.theta, batch_train, pre, state.sgd);
  trace.iteration = state.iteration++;
  trace.pre_loss = pre;
  return trace;
}

// ---------------------------------------------------------------------------

SplitMetrics evaluate(const MainModelSpec& spec, const ParamSet& w, const LabeledDataset& data, bool use_true_labels) {
  SplitMetrics out;
  const std::size_t n = data.size();
  if (n == 0) return out;
  constexpr std::size_t chunk = 1024;
  const auto& labels = use_true_labels ? data.y_true : data.y_observed;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t stop = std::min(n, start + chunk);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto sub = data.subset(idx);
    ad::Tape tape;
    const auto vars = bind(tape, w, Tracking::constant);
    const auto f = backbone_forward(spec.backbone, tape.constant(sub.x), backbone_part(spec, vars));
    const auto logits = classifier_forward(spec.classifier, f, classifier_part(spec, vars));
    const std::vector<int> y(labels.begin() + static_cast<std::ptrdiff_t>(start),
                             labels.begin() + static_cast<std::ptrdiff_t>(stop));
    const auto losses = ad::softmax_cross_entropy(logits, y).value();
    const auto& z = logits.value();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      loss_sum += losses[r];
      std::size_t best = 0;
      for (std::size_t c = 1; c < z.dim(1); ++c) {
        if (z.at(r, c) > z.at(r, best)) best = c;
      }
      if (static_cast<int>(best) == y[r]) ++correct;
    }
  }
  out.loss = loss_sum / static_cast<double>(n);
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return out;
}

TrainerState initial_state(const TrainConfig& config) {
  config.nets.main.validate();
  TrainerState state;
  state.w = init_params(config.nets.main, derive_seed(config.init_seed, 10));
  if (config.method == Method::mfrw) {
    state.theta = init_params(config.nets.advisor, derive_seed(config.init_seed, 11));
  } else if (config.method == Method::mwnet) {
    state.theta = init_params(config.nets.mwnet, derive_seed(config.init_seed, 12));
  }
  state.sgd.config = config.sgd;
  state.adam.config = config.adam;
  return state;
}

namespace {

/// Cycles through seeded shuffles of the meta set, reshuffling after each pass.
class MetaSampler {
 public:
  MetaSampler(const LabeledDataset& meta, std::size_t batch_size, std::uint64_t seed)
      : meta_(meta), batch_size_(std::min(batch_size, meta.size())), seed_(seed) {}

  Batch next() {
    if (cursor_ >= order_.size()) {
      order_ = batches(meta_.size(), batch_size_, derive_seed(seed_, 2, pass_++));
      // Drop a short tail so every meta batch has the same size.
      if (order_.size() > 1 && order_.back().size() < batch_size_) order_.pop_back();
      cursor_ = 0;
    }
    return gather(meta_, order_[cursor_++]);
  }

 private:
  const LabeledDataset& meta_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t pass_ = 0;
  std::vector<std::vector<std::size_t>> order_;
  std::size_t cursor_ = 0;
};

}  // namespace

TrainResult train(const TrainConfig& config, const Datasets& data, const EpochCallback& on_epoch) {
  config.lr.validate();
  if (config.batch_size == 0 || config.meta_batch_size == 0) throw InputError("batch sizes must be >= 1");
  if (config.epochs < 0) throw InputError("epochs must be >= 0");
  const bool needs_meta = config.method != Method::ce;
  if (needs_meta && data.meta.size() == 0) throw InputError("method " + to_string(config.method) + " needs a meta set");

  TrainerState state = initial_state(config);
  LoopContext ctx{config.nets, config.lr.base, config.hyper, config.forced_weight};

  TrainResult result;
  result.initial_test = evaluate(config.nets.main, state.w, data.test, true);
  std::optional<MetaSampler> sampler;
  if (needs_meta) sampler.emplace(data.meta, config.meta_batch_size, config.shuffle_seed);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ctx.lr = lr_at_epoch(config.lr, epoch);
    double w_clean = 0.0, w_noisy = 0.0;
    std::size_t n_clean = 0, n_noisy = 0;
    for (const auto& idx : batches(data.train.size(), config.batch_size, derive_seed(config.shuffle_seed, 1, epoch))) {
      const Batch batch = gather(data.train, idx);
      IterationTrace trace;
      switch (config.method) {
        case Method::ce: trace = ce_iteration(ctx, state, batch); break;
        case Method::mwnet: trace = mwnet_iteration(ctx, state, batch, sampler->next()); break;
        case Method::mfrw: trace = mfrw_iteration(ctx, state, batch, sampler->next()); break;
      }
      for (std::size_t i = 0; i < trace.example_weight.size(); ++i) {
        if (batch.corrupted[i]) {
          w_noisy += trace.example_weight[i];
          ++n_noisy;
        } else {
          w_clean += trace.example_weight[i];
          ++n_clean;
        }
      }
    }
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.train = evaluate(config.nets.main, state.w, data.train, false);
    m.meta = evaluate(config.nets.main, state.w, data.meta, true);
    m.test = evaluate(config.nets.main, state.w, data.test, true);
    if (n_clean > 0) m.weight_clean = w_clean / static_cast<double>(n_clean);
    if (n_noisy > 0) m.weight_noisy = w_noisy / static_cast<double>(n_noisy);
    if (on_epoch) on_epoch(m);
    result.history.push_back(m);
  }
  result.model = std::move(state.w);
  return result;
}

}  // namespace mfrw
