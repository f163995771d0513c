// SPDX-License-Identifier: Apache-2.0
#include "mfrw/nets.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mfrw/errors.hpp"

namespace mfrw {

void BackboneSpec::validate() const {
  if (input_dim == 0) throw InputError("backbone input_dim must be >= 1");
  if (feature_dim == 0) throw InputError("backbone feature_dim must be >= 1");
  if (std::any_of(hidden_dims.begin(), hidden_dims.end(), [](auto d) { return d == 0; })) {
    throw InputError("backbone hidden widths must be >= 1");
  }
}

void ClassifierSpec::validate() const {
  if (feature_dim == 0) throw InputError("classifier feature_dim must be >= 1");
  if (num_classes < 2) throw InputError("classifier needs at least 2 classes");
}

void MainModelSpec::validate() const {
  backbone.validate();
  classifier.validate();
  if (backbone.feature_dim != classifier.feature_dim) {
    throw InputError("backbone feature_dim " + std::to_string(backbone.feature_dim) +
                     " != classifier feature_dim " + std::to_string(classifier.feature_dim));
  }
}

void AdvisorSpec::validate() const {
  if (feature_dim == 0) throw InputError("advisor feature_dim must be >= 1");
  if (embed_dim == 0) throw InputError("advisor embed_dim must be >= 1");
}

void MwNetSpec::validate() const {
  if (hidden_dim == 0) throw InputError("mwnet hidden_dim must be >= 1");
}

// ---------------------------------------------------------------------------

void ParamSet::add(std::string name, Tensor value) {
  if (std::find(names_.begin(), names_.end(), name) != names_.end()) {
    throw UsageError("duplicate parameter name '" + name + "'");
  }
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw UsageError("no parameter named '" + name + "'");
  return tensors_[static_cast<std::size_t>(it - names_.begin())];
}

Tensor& ParamSet::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParamSet&>(*this).get(name));
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

ParamSet ParamSet::shifted(double scale, std::span<const Tensor> direction) const {
  if (direction.size() != tensors_.size()) throw UsageError("shifted: direction does not cover all parameters");
  ParamSet out = *this;
  for (std::size_t i = 0; i < tensors_.size(); ++i) out.tensors_[i] = axpy(tensors_[i], scale, direction[i]);
  return out;
}

std::vector<ad::Var> bind(ad::Tape& tape, const ParamSet& params, Tracking tracking) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const auto& t : params.tensors()) {
    vars.push_back(tracking == Tracking::tracked ? tape.variable(t) : tape.constant(t));
  }
  return vars;
}

// ---------------------------------------------------------------------------

namespace {

void expect_params(std::span<const ad::Var> p, std::size_t n, const char* who) {
  if (p.size() != n) {
    throw UsageError(std::string(who) + ": expected " + std::to_string(n) + " parameter tensors, got " +
                     std::to_string(p.size()));
  }
}

void expect_width(const ad::Var& x, std::size_t width, const char* who) {
  const auto& v = x.value();
  if (v.rank() != 2 || v.dim(1) != width) {
    throw InputError(std::string(who) + ": input width must be " + std::to_string(width) + ", got shape " +
                     shape_string(v.shape()));
  }
}

}  // namespace

ad::Var backbone_forward(const BackboneSpec& spec, const ad::Var& x, std::span<const ad::Var> w_b) {
  expect_params(w_b, 2 * spec.layer_count(), "backbone_forward");
  expect_width(x, spec.input_dim, "backbone_forward");
  ad::Var h = x;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    h = ad::relu(ad::affine(h, w_b[2 * l], w_b[2 * l + 1]));
  }
  return h;
}

ad::Var classifier_forward(const ClassifierSpec& spec, const ad::Var& f, std::span<const ad::Var> w_c) {
  expect_params(w_c, 2, "classifier_forward");
  expect_width(f, spec.feature_dim, "classifier_forward");
  return ad::affine(f, w_c[0], w_c[1]);
}

ad::Var advisor_forward(const AdvisorSpec& spec, const ad::Var& f, const Tensor& loss,
                        std::span<const ad::Var> theta) {
  expect_params(theta, 8, "advisor_forward");
  expect_width(f, spec.feature_dim, "advisor_forward");
  const auto n = f.value().dim(0);
  if (loss.size() != n) {
    throw DimensionError("advisor_forward: " + std::to_string(loss.size()) + " losses for " + std::to_string(n) +
                         " features");
  }
  for (double v : loss.data()) {
    if (!std::isfinite(v) || v < 0.0) throw InputError("advisor_forward: losses must be finite and non-negative");
  }
  auto& tape = *f.tape();
  const ad::Var loss_col = tape.constant(loss.reshaped({n, 1}));
  const ad::Var embed_f = ad::relu(ad::affine(f, theta[0], theta[1]));
  const ad::Var embed_l = ad::relu(ad::affine(loss_col, theta[2], theta[3]));
  const ad::Var common = ad::relu(ad::affine(ad::concat_cols(embed_f, embed_l), theta[4], theta[5]));
  return ad::sigmoid(ad::affine(common, theta[6], theta[7]));
}

ad::Var mwnet_forward(const MwNetSpec& /*spec*/, const Tensor& loss, std::span<const ad::Var> theta) {
  expect_params(theta, 4, "mwnet_forward");
  if (!loss.all_finite()) throw InputError("mwnet_forward: losses must be finite");
  auto& tape = *theta[0].tape();
  const auto n = loss.size();
  const ad::Var loss_col = tape.constant(loss.reshaped({n, 1}));
  const ad::Var hidden = ad::relu(ad::affine(loss_col, theta[0], theta[1]));
  return ad::reshape(ad::sigmoid(ad::affine(hidden, theta[2], theta[3])), {n});
}

std::span<const ad::Var> backbone_part(const MainModelSpec& spec, std::span<const ad::Var> w) {
  expect_params(w, spec.param_count(), "main model");
  return w.first(spec.backbone_param_count());
}

std::span<const ad::Var> classifier_part(const MainModelSpec& spec, std::span<const ad::Var> w) {
  expect_params(w, spec.param_count(), "main model");
  return w.subspan(spec.backbone_param_count());
}

Tensor compute_features(const MainModelSpec& spec, const ParamSet& w, const Tensor& x) {
  ad::Tape tape;
  const auto vars = bind(tape, w, Tracking::constant);
  return backbone_forward(spec.backbone, tape.constant(x), backbone_part(spec, vars)).value();
}

Tensor predict_logits(const MainModelSpec& spec, const ParamSet& w, const Tensor& x) {
  ad::Tape tape;
  const auto vars = bind(tape, w, Tracking::constant);
  const auto f = backbone_forward(spec.backbone, tape.constant(x), backbone_part(spec, vars));
  return classifier_forward(spec.classifier, f, classifier_part(spec, vars)).value();
}

// ---------------------------------------------------------------------------

namespace {

Tensor fan_in_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w({fan_in, fan_out});
  for (auto& v : w.data()) v = dist(rng);
  return w;
}

void add_layer(ParamSet& p, const std::string& prefix, std::size_t fan_in, std::size_t fan_out,
               std::mt19937_64& rng, bool zero_weight) {
  p.add(prefix + ".weight", zero_weight ? Tensor({fan_in, fan_out}) : fan_in_uniform(fan_in, fan_out, rng));
  p.add(prefix + ".bias", Tensor({fan_out}));
}

}  // namespace

ParamSet init_params(const MainModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  ParamSet p(ParamRole::main_w);
  std::size_t in = spec.backbone.input_dim;
  for (std::size_t l = 0; l < spec.backbone.layer_count(); ++l) {
    const std::size_t out = l < spec.backbone.hidden_dims.size() ? spec.backbone.hidden_dims[l]
                                                                  : spec.backbone.feature_dim;
    add_layer(p, "backbone." + std::to_string(l), in, out, rng, false);
    in = out;
  }
  add_layer(p, "classifier", spec.classifier.feature_dim, spec.classifier.num_classes, rng, false);
  return p;
}

ParamSet init_params(const AdvisorSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  ParamSet p(ParamRole::meta_theta);
  add_layer(p, "advisor.embed_feature", spec.feature_dim, spec.embed_dim, rng, false);
  add_layer(p, "advisor.embed_loss", 1, spec.embed_dim, rng, false);
  add_layer(p, "advisor.common", spec.common_dim(), spec.common_dim(), rng, false);
  add_layer(p, "advisor.output", spec.common_dim(), spec.output_dim(), rng, true);
  return p;
}

ParamSet init_params(const MwNetSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  ParamSet p(ParamRole::meta_theta);
  add_layer(p, "mwnet.hidden", 1, spec.hidden_dim, rng, false);
  add_layer(p, "mwnet.output", spec.hidden_dim, 1, rng, true);
  return p;
}

}  // namespace mfrw
