// SPDX-License-Identifier: Apache-2.0
//
// The networks trained by the meta loop: an MLP backbone producing features,
// a linear classifier producing logits, the feature advisor that emits
// per-feature attention in (0, 1), and the per-example loss weighting net used
// by the MW-Net baseline.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfrw/autodiff.hpp"
#include "mfrw/tensor.hpp"

namespace mfrw {

struct BackboneSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t feature_dim = 0;

  void validate() const;
  /// Number of affine layers, feature layer included.
  std::size_t layer_count() const noexcept { return hidden_dims.size() + 1; }
};

struct ClassifierSpec {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;

  void validate() const;
};

/// Backbone followed by classifier; the parameters of both live in one ParamSet,
/// backbone layers first.
struct MainModelSpec {
  BackboneSpec backbone;
  ClassifierSpec classifier;

  void validate() const;
  std::size_t backbone_param_count() const noexcept { return 2 * backbone.layer_count(); }
  std::size_t param_count() const noexcept { return backbone_param_count() + 2; }
};

struct AdvisorSpec {
  std::size_t feature_dim = 0;
  std::size_t embed_dim = 100;

  void validate() const;
  std::size_t common_dim() const noexcept { return 2 * embed_dim; }
  std::size_t output_dim() const noexcept { return feature_dim; }
};

struct MwNetSpec {
  std::size_t hidden_dim = 100;

  void validate() const;
};

enum class ParamRole { main_w, meta_theta };

/// Ordered collection of named tensors forming one model's parameters.
class ParamSet {
 public:
  explicit ParamSet(ParamRole role = ParamRole::main_w) : role_(role) {}

  void add(std::string name, Tensor value);

  ParamRole role() const noexcept { return role_; }
  std::size_t size() const noexcept { return tensors_.size(); }
  bool empty() const noexcept { return tensors_.empty(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Tensor& operator[](std::size_t i) const { return tensors_.at(i); }
  Tensor& operator[](std::size_t i) { return tensors_.at(i); }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  std::span<const Tensor> tensors() const noexcept { return tensors_; }
  std::size_t scalar_count() const noexcept;

  /// Copy with identical names and values but distinct storage.
  ParamSet clone() const { return *this; }
  /// this + scale * direction, tensor by tensor.
  ParamSet shifted(double scale, std::span<const Tensor> direction) const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  ParamRole role_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

enum class Tracking { tracked, constant };

/// Places every tensor of `params` on the tape, in order.
std::vector<ad::Var> bind(ad::Tape& tape, const ParamSet& params, Tracking tracking);

/// relu(affine(.)) per layer; the feature is the activation of the last layer.
ad::Var backbone_forward(const BackboneSpec& spec, const ad::Var& x, std::span<const ad::Var> w_b);
/// Single affine layer emitting logits.
ad::Var classifier_forward(const ClassifierSpec& spec, const ad::Var& f, std::span<const ad::Var> w_c);
/// Attention weights [n x d] from features [n x d] and per-example losses [n].
/// The loss enters as a constant; gradients never flow into it.
ad::Var advisor_forward(const AdvisorSpec& spec, const ad::Var& f, const Tensor& loss,
                        std::span<const ad::Var> theta);
/// Scalar example weights [n] from per-example losses [n].
ad::Var mwnet_forward(const MwNetSpec& spec, const Tensor& loss, std::span<const ad::Var> theta);

/// Splits the bound main-model parameters into backbone and classifier parts.
std::span<const ad::Var> backbone_part(const MainModelSpec& spec, std::span<const ad::Var> w);
std::span<const ad::Var> classifier_part(const MainModelSpec& spec, std::span<const ad::Var> w);

/// Gradient-free logits of the full main model.
Tensor predict_logits(const MainModelSpec& spec, const ParamSet& w, const Tensor& x);
/// Gradient-free features of the backbone.
Tensor compute_features(const MainModelSpec& spec, const ParamSet& w, const Tensor& x);

/// Weights uniform in +-sqrt(3 / fan_in) (unit gain on variance), biases zero.
ParamSet init_params(const MainModelSpec& spec, std::uint64_t seed);
/// As above, but the final layer is zero so the initial attention is exactly 0.5.
ParamSet init_params(const AdvisorSpec& spec, std::uint64_t seed);
ParamSet init_params(const MwNetSpec& spec, std::uint64_t seed);

}  // namespace mfrw
