// SPDX-License-Identifier: Apache-2.0
#include "mfrw/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mfrw/errors.hpp"

namespace mfrw::ad {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw UsageError(std::string(op) + ": operands live on different tapes");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                         ", got " + shape_string(t.shape()));
  }
}

Tensor checked(const char* op, Tensor t) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite value in forward output");
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------

namespace kernels {

void gemm(std::span<const double> a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
          std::span<const double> b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
          std::span<double> out, bool accumulate) {
  ConstMap am(a.data(), static_cast<Eigen::Index>(a_rows), static_cast<Eigen::Index>(a_cols));
  ConstMap bm(b.data(), static_cast<Eigen::Index>(b_rows), static_cast<Eigen::Index>(b_cols));
  const auto m = trans_a ? a_cols : a_rows;
  const auto n = trans_b ? b_rows : b_cols;
  MutMap om(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (!accumulate) om.setZero();
  if (trans_a && trans_b) {
    om.noalias() += am.transpose() * bm.transpose();
  } else if (trans_a) {
    om.noalias() += am.transpose() * bm;
  } else if (trans_b) {
    om.noalias() += am * bm.transpose();
  } else {
    om.noalias() += am * bm;
  }
}

double stable_sigmoid(double x) noexcept {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  return std::clamp(s, lo, hi);
}

}  // namespace kernels

// ---------------------------------------------------------------------------

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw UsageError("value() on a detached Var");
  return tape_->value(id_);
}

bool Var::tracked() const {
  if (tape_ == nullptr) throw UsageError("tracked() on a detached Var");
  return tape_->tracked(id_);
}

const Tensor& GradientMap::at(const Var& v) const {
  auto it = grads_.find(v.id());
  if (it == grads_.end()) throw UsageError("no gradient recorded for value " + std::to_string(v.id()));
  return it->second;
}

std::vector<Tensor> GradientMap::collect(std::span<const Var> vars) const {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(at(v));
  return out;
}

Var Tape::variable(Tensor value) {
  if (!value.all_finite()) throw NumericError("variable: non-finite value");
  nodes_.push_back(Node{std::move(value), true, true, "variable", {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite value");
  nodes_.push_back(Node{std::move(value), false, true, "constant", {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool tracked = false;
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw UsageError(std::string(op) + ": input is not on this tape");
    tracked = tracked || nodes_[id].tracked;
  }
  Node node{std::move(value), tracked, false, op, std::move(inputs), {}};
  if (tracked) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

GradientMap Tape::backward(const Var& root) {
  if (root.tape() != this) throw UsageError("backward: root is not on this tape");
  const auto& root_value = nodes_.at(root.id()).value;
  if (root_value.size() != 1) {
    throw UsageError("backward: root must be scalar, got shape " + shape_string(root_value.shape()));
  }

  std::vector<Tensor> grads(nodes_.size());
  std::vector<bool> has_grad(nodes_.size(), false);
  if (nodes_[root.id()].tracked) {
    grads[root.id()] = ones_like(root_value);
    has_grad[root.id()] = true;
  }

  std::vector<Tensor*> input_grads;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!has_grad[i] || node.leaf || !node.tracked) continue;
    input_grads.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const auto in = node.inputs[k];
      if (!nodes_[in].tracked) continue;
      if (!has_grad[in]) {
        grads[in] = zeros_like(nodes_[in].value);
        has_grad[in] = true;
      }
      input_grads[k] = &grads[in];
    }
    node.backward(*this, grads[i], input_grads);
  }

  GradientMap out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (!node.leaf || !node.tracked) continue;
    out.grads_.emplace(i, has_grad[i] ? std::move(grads[i]) : zeros_like(node.value));
  }
  reset();
  return out;
}

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul", "lhs");
  require_rank(bv, 2, "matmul", "rhs");
  const auto m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor out({m, n});
  kernels::gemm(av.data(), m, k, false, bv.data(), k, n, false, out.data(), false);
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(
      "matmul", checked("matmul", std::move(out)), {ia, ib},
      [ia, ib, m, k, n](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0]) kernels::gemm(g.data(), m, n, false, t.value(ib).data(), k, n, true, gi[0]->data(), true);
        if (gi[1]) kernels::gemm(t.value(ia).data(), m, k, true, g.data(), m, n, false, gi[1]->data(), true);
      });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_tape(a, b, "hadamard");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "hadamard");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record("hadamard", checked("hadamard", std::move(out)), {ia, ib},
                          [ia, ib](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                            const Tensor& x = t.value(ia);
                            const Tensor& y = t.value(ib);
                            if (gi[0]) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * y[i];
                            }
                            if (gi[1]) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * x[i];
                            }
                          });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape()->record("add", checked("add", std::move(out)), {a.id(), b.id()},
                          [](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                            for (auto* dst : gi) {
                              if (!dst) continue;
                              for (std::size_t i = 0; i < g.size(); ++i) (*dst)[i] += g[i];
                            }
                          });
}

Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= c;
  return a.tape()->record("scale", checked("scale", std::move(out)), {a.id()},
                          [c](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                            for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += c * g[i];
                          });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  const auto ia = a.id();
  return a.tape()->record("relu", checked("relu", std::move(out)), {ia},
                          [ia](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                            const Tensor& x = t.value(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              if (x[i] > 0.0) (*gi[0])[i] += g[i];
                            }
                          });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = kernels::stable_sigmoid(v);
  out = checked("sigmoid", std::move(out));
  Tensor saved = out;
  return a.tape()->record("sigmoid", std::move(out), {a.id()},
                          [s = std::move(saved)](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                            for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * s[i] * (1.0 - s[i]);
                          });
}

Var affine(const Var& x, const Var& weight, const Var& bias) {
  require_same_tape(x, weight, "affine");
  require_same_tape(x, bias, "affine");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  require_rank(xv, 2, "affine", "input");
  require_rank(wv, 2, "affine", "weight");
  require_rank(bv, 1, "affine", "bias");
  const auto n = xv.dim(0), d = xv.dim(1), h = wv.dim(1);
  if (wv.dim(0) != d || bv.dim(0) != h) {
    throw DimensionError("affine: incompatible shapes x" + shape_string(xv.shape()) + " W" +
                         shape_string(wv.shape()) + " b" + shape_string(bv.shape()));
  }
  Tensor out({n, h});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < h; ++c) out.at(r, c) = bv[c];
  }
  kernels::gemm(xv.data(), n, d, false, wv.data(), d, h, false, out.data(), true);
  const auto ix = x.id(), iw = weight.id();
  return x.tape()->record(
      "affine", checked("affine", std::move(out)), {ix, iw, bias.id()},
      [ix, iw, n, d, h](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0]) kernels::gemm(g.data(), n, h, false, t.value(iw).data(), d, h, true, gi[0]->data(), true);
        if (gi[1]) kernels::gemm(t.value(ix).data(), n, d, true, g.data(), n, h, false, gi[1]->data(), true);
        if (gi[2]) {
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < h; ++c) (*gi[2])[c] += g[r * h + c];
          }
        }
      });
}

Var mean(const Var& a) {
  const Tensor& av = a.value();
  const double inv_n = 1.0 / static_cast<double>(av.size());
  double s = 0.0;
  for (double v : av.data()) s += v;
  return a.tape()->record("mean", checked("mean", Tensor::scalar(s * inv_n)), {a.id()},
                          [inv_n](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                            const double gv = g[0] * inv_n;
                            for (auto& v : gi[0]->data()) v += gv;
                          });
}

Var row_mean(const Var& a) {
  const Tensor& av = a.value();
  require_rank(av, 2, "row_mean", "input");
  const auto n = av.dim(0), d = av.dim(1);
  const double inv_d = 1.0 / static_cast<double>(d);
  Tensor out({n});
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += av.at(r, c);
    out[r] = s * inv_d;
  }
  return a.tape()->record("row_mean", checked("row_mean", std::move(out)), {a.id()},
                          [n, d, inv_d](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                            for (std::size_t r = 0; r < n; ++r) {
                              for (std::size_t c = 0; c < d; ++c) (*gi[0])[r * d + c] += g[r] * inv_d;
                            }
                          });
}

Var concat_cols(const Var& a, const Var& b) {
  require_same_tape(a, b, "concat_cols");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "concat_cols", "lhs");
  require_rank(bv, 2, "concat_cols", "rhs");
  if (av.dim(0) != bv.dim(0)) throw DimensionError("concat_cols: row counts differ");
  const auto n = av.dim(0), p = av.dim(1), q = bv.dim(1);
  Tensor out({n, p + q});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) out.at(r, c) = av.at(r, c);
    for (std::size_t c = 0; c < q; ++c) out.at(r, p + c) = bv.at(r, c);
  }
  return a.tape()->record("concat_cols", std::move(out), {a.id(), b.id()},
                          [n, p, q](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                            for (std::size_t r = 0; r < n; ++r) {
                              if (gi[0]) {
                                for (std::size_t c = 0; c < p; ++c) (*gi[0])[r * p + c] += g[r * (p + q) + c];
                              }
                              if (gi[1]) {
                                for (std::size_t c = 0; c < q; ++c) (*gi[1])[r * q + c] += g[r * (p + q) + p + c];
                              }
                            }
                          });
}

Var reshape(const Var& a, Tensor::Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape()->record("reshape", std::move(out), {a.id()},
                          [](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                            for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                          });
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  require_rank(z, 2, "softmax_cross_entropy", "logits");
  const auto n = z.dim(0), c = z.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  Tensor probs({n, c});
  Tensor loss({n});
  std::vector<int> y(labels.begin(), labels.end());
  for (std::size_t r = 0; r < n; ++r) {
    if (y[r] < 0 || static_cast<std::size_t>(y[r]) >= c) {
      throw InputError("softmax_cross_entropy: label " + std::to_string(y[r]) + " outside [0, " +
                       std::to_string(c) + ")");
    }
    double zmax = z.at(r, 0);
    for (std::size_t j = 1; j < c; ++j) zmax = std::max(zmax, z.at(r, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(z.at(r, j) - zmax);
      probs.at(r, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < c; ++j) probs.at(r, j) /= sum;
    loss[r] = std::log(sum) - (z.at(r, static_cast<std::size_t>(y[r])) - zmax);
  }
  return logits.tape()->record(
      "softmax_cross_entropy", checked("softmax_cross_entropy", std::move(loss)), {logits.id()},
      [probs = std::move(probs), y = std::move(y), n, c](const Tape&, const Tensor& g,
                                                         std::span<Tensor* const> gi) {
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            const double target = static_cast<std::size_t>(y[r]) == j ? 1.0 : 0.0;
            (*gi[0])[r * c + j] += g[r] * (probs.at(r, j) - target);
          }
        }
      });
}

}  // namespace mfrw::ad
