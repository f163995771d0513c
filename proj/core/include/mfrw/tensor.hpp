// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mfrw {

/// Dense row-major array of doubles. A rank-0 tensor (empty shape) is a scalar.
///
/// Tensors are plain values: copies are deep, and no operation in the library
/// mutates a tensor it receives as input.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  /// Leading dimension; 1 for scalars.
  std::size_t rows() const noexcept { return shape_.empty() ? 1 : shape_[0]; }
  /// Product of all trailing dimensions; 1 for scalars and vectors.
  std::size_t cols() const noexcept;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  /// Value of a single-element tensor.
  double item() const;

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  bool all_finite() const noexcept;

  /// Same data, different shape of equal element count.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t element_count(const Tensor::Shape& shape) noexcept;
std::string shape_string(const Tensor::Shape& shape);

// Value-level helpers used by optimizers and the meta loop.
Tensor zeros_like(const Tensor& t);
Tensor ones_like(const Tensor& t);
/// a + scale * b, elementwise.
Tensor axpy(const Tensor& a, double scale, const Tensor& b);
double dot(const Tensor& a, const Tensor& b);
double mean_of(const Tensor& t);
double l2_norm(const Tensor& t);
double l2_norm(std::span<const Tensor> ts);

}  // namespace mfrw
