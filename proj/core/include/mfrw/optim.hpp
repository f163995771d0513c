// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mfrw/nets.hpp"
#include "mfrw/tensor.hpp"

namespace mfrw {

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct SgdState {
  SgdConfig config;
  std::vector<Tensor> buffers;  // lazily shaped like the parameters
};

/// buf = momentum * buf + (grad + weight_decay * param); param -= lr * buf.
void sgd_momentum_step(ParamSet& params, std::span<const Tensor> grads, double lr, SgdState& state);

/// param -= lr * grad. The virtual step of the meta loop uses this form.
void sgd_step(ParamSet& params, std::span<const Tensor> grads, double lr);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
};

/// Adam with bias correction.
void adam_step(ParamSet& params, std::span<const Tensor> grads, AdamState& state);

struct LrSchedule {
  double base = 0.1;
  std::vector<int> milestones;  // strictly increasing epochs

  void validate() const;
};

/// Base rate divided by 10 for every milestone <= epoch.
double lr_at_epoch(const LrSchedule& schedule, int epoch);

}  // namespace mfrw
