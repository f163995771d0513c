// SPDX-License-Identifier: Apache-2.0
//
// Tape-based first-order reverse-mode differentiation over dense Tensors.
//
// A Tape owns every value produced during one forward pass. Leaves enter the
// tape either as tracked variables (gradients wanted) or as constants. Each op
// appends one record holding its output value, the ids of its inputs and a
// closure that maps the output gradient to input gradients. backward() walks
// the records once in reverse order and then clears the tape, so every phase
// of a training step starts from an empty tape.
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "mfrw/tensor.hpp"

namespace mfrw::ad {

class Tape;

/// Handle to a value recorded on a Tape. Valid until the tape is reset.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  bool tracked() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients of a scalar root with respect to the tracked leaves of a tape.
/// Untracked values never appear. A tracked leaf the root does not depend on
/// receives an all-zero gradient.
class GradientMap {
 public:
  bool empty() const noexcept { return grads_.empty(); }
  std::size_t size() const noexcept { return grads_.size(); }
  bool contains(const Var& v) const { return grads_.count(v.id()) != 0; }
  const Tensor& at(const Var& v) const;
  /// Gradients for `vars` in order; throws UsageError if any is absent.
  std::vector<Tensor> collect(std::span<const Var> vars) const;

 private:
  friend class Tape;
  std::map<std::size_t, Tensor> grads_;
};

/// Receives the output gradient; accumulates into the gradients of the inputs.
/// `input_grads[k]` is null when input k is untracked.
using BackwardFn =
    std::function<void(const Tape& tape, const Tensor& grad_out, std::span<Tensor* const> input_grads)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Tensor value);
  Var constant(Tensor value);

  /// Appends an op record. The output is tracked iff any input is tracked;
  /// untracked outputs drop the closure.
  Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool tracked(std::size_t id) const { return nodes_.at(id).tracked; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar root. Resets the tape afterwards.
  GradientMap backward(const Var& root);
  void reset() noexcept { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    bool tracked = false;
    bool leaf = true;
    const char* op = "leaf";
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Every op checks shapes (DimensionError) and that
// its output is finite (NumericError).

/// [m x k] * [k x n] -> [m x n]
Var matmul(const Var& a, const Var& b);
/// Elementwise product of equal shapes.
Var hadamard(const Var& a, const Var& b);
/// Elementwise sum of equal shapes.
Var add(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var relu(const Var& a);
/// Logistic function, clamped so outputs stay strictly inside (0, 1).
Var sigmoid(const Var& a);
/// x [n x d] * W [d x h] + bias [h] broadcast over rows.
Var affine(const Var& x, const Var& weight, const Var& bias);
/// Mean of all elements, as a scalar.
Var mean(const Var& a);
/// Row means of a matrix: [n x d] -> [n].
Var row_mean(const Var& a);
/// Horizontal concatenation [n x p], [n x q] -> [n x (p+q)].
Var concat_cols(const Var& a, const Var& b);
Var reshape(const Var& a, Tensor::Shape shape);
/// Per-example -log softmax(logits_i)[labels_i], max-subtracted. [n x c] -> [n].
Var softmax_cross_entropy(const Var& logits, std::span<const int> labels);

// Raw kernels shared with value-level code.
namespace kernels {
/// out (+)= op(a) * op(b) for row-major matrices.
void gemm(std::span<const double> a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
          std::span<const double> b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
          std::span<double> out, bool accumulate);
double stable_sigmoid(double x) noexcept;
}  // namespace kernels

}  // namespace mfrw::ad
