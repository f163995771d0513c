// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mfrw/errors.hpp"
#include "mfrw/tensor.hpp"

using mfrw::Tensor;

TEST(Tensor, DefaultIsScalarZero) {
  Tensor t;
  EXPECT_EQ(t.rank(), 0u);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t.item(), 0.0);
}

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), mfrw::DimensionError);
  Tensor m({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.at(1, 2), 6.0);
}

TEST(Tensor, MatrixFromRowsRejectsRagged) {
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), mfrw::DimensionError);
  EXPECT_EQ(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix(2, 2, {1, 2, 3, 4}));
}

TEST(Tensor, IdentityAndItem) {
  const auto i = Tensor::identity(3);
  EXPECT_EQ(i.at(0, 0), 1.0);
  EXPECT_EQ(i.at(0, 1), 0.0);
  EXPECT_THROW(static_cast<void>(i.item()), mfrw::UsageError);
}

TEST(Tensor, ReshapeKeepsElementCount) {
  const auto v = Tensor::vector({1, 2, 3, 4, 5, 6});
  const auto m = v.reshaped({3, 2});
  EXPECT_EQ(m.at(2, 1), 6.0);
  EXPECT_THROW(static_cast<void>(v.reshaped({4, 2})), mfrw::DimensionError);
}

TEST(Tensor, FiniteCheck) {
  auto t = Tensor::vector({1, 2});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, Helpers) {
  const auto a = Tensor::vector({1, 2, 2});
  const auto b = Tensor::vector({1, 0, -1});
  EXPECT_EQ(mfrw::axpy(a, 2.0, b), Tensor::vector({3, 2, 0}));
  EXPECT_EQ(mfrw::dot(a, b), -1.0);
  EXPECT_EQ(mfrw::l2_norm(a), 3.0);
  EXPECT_DOUBLE_EQ(mfrw::mean_of(a), 5.0 / 3.0);
  std::vector<Tensor> both{a, b};
  EXPECT_DOUBLE_EQ(mfrw::l2_norm(both), std::sqrt(11.0));
  EXPECT_THROW(static_cast<void>(mfrw::dot(a, Tensor::vector({1}))), mfrw::DimensionError);
  EXPECT_EQ(mfrw::shape_string({2, 3}), "[2x3]");
}
