// SPDX-License-Identifier: Apache-2.0
#include "mfrw/optim.hpp"

#include <cmath>
#include <string>

#include "mfrw/errors.hpp"

namespace mfrw {

namespace {

void check_grads(const ParamSet& params, std::span<const Tensor> grads, const char* who) {
  if (grads.size() != params.size()) {
    throw UsageError(std::string(who) + ": " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].same_shape(params[i])) {
      throw UsageError(std::string(who) + ": gradient shape mismatch for '" + params.name(i) + "'");
    }
  }
}

void ensure_buffers(std::vector<Tensor>& buffers, const ParamSet& params) {
  if (buffers.size() == params.size()) return;
  buffers.clear();
  for (const auto& t : params.tensors()) buffers.push_back(zeros_like(t));
}

}  // namespace

void sgd_momentum_step(ParamSet& params, std::span<const Tensor> grads, double lr, SgdState& state) {
  check_grads(params, grads, "sgd_momentum_step");
  ensure_buffers(state.buffers, params);
  const double mu = state.config.momentum;
  const double wd = state.config.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto b = state.buffers[i].data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      b[k] = mu * b[k] + (g[k] + wd * p[k]);
      p[k] -= lr * b[k];
    }
  }
}

void sgd_step(ParamSet& params, std::span<const Tensor> grads, double lr) {
  check_grads(params, grads, "sgd_step");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  }
}

void adam_step(ParamSet& params, std::span<const Tensor> grads, AdamState& state) {
  check_grads(params, grads, "adam_step");
  ensure_buffers(state.m, params);
  ensure_buffers(state.v, params);
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      p[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void LrSchedule::validate() const {
  for (std::size_t i = 1; i < milestones.size(); ++i) {
    if (milestones[i] <= milestones[i - 1]) throw InputError("lr milestones must be strictly increasing");
  }
}

double lr_at_epoch(const LrSchedule& schedule, int epoch) {
  double lr = schedule.base;
  for (int m : schedule.milestones) {
    if (epoch >= m) lr /= 10.0;
  }
  return lr;
}

}  // namespace mfrw
