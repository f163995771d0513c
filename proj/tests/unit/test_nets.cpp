// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "mfrw/errors.hpp"
#include "mfrw/nets.hpp"
#include "oracles.hpp"

namespace ad = mfrw::ad;
using mfrw::ParamSet;
using mfrw::Tensor;
using mfrw::Tracking;
using mfrw::testing::Gen;

namespace {

ParamSet zeroed(ParamSet p) {
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = mfrw::zeros_like(p[i]);
  return p;
}

Tensor advisor_out(const mfrw::AdvisorSpec& spec, const ParamSet& theta, const Tensor& f, const Tensor& loss) {
  ad::Tape tape;
  const auto vars = mfrw::bind(tape, theta, Tracking::constant);
  return mfrw::advisor_forward(spec, tape.constant(f), loss, vars).value();
}

}  // namespace

TEST(Backbone, ZeroWeightsGiveZeroFeatures) {
  mfrw::MainModelSpec spec{{4, {5}, 3}, {3, 2}};
  const auto w = zeroed(mfrw::init_params(spec, 1));
  Gen gen(1);
  const auto f = mfrw::compute_features(spec, w, gen.normal({6, 4}));
  EXPECT_EQ(f, Tensor({6, 3}));
}

TEST(Backbone, IdentitySingleLayerIsRelu) {
  mfrw::MainModelSpec spec{{3, {}, 3}, {3, 2}};
  auto w = zeroed(mfrw::init_params(spec, 1));
  w.get("backbone.0.weight") = Tensor::identity(3);
  const auto x = Tensor::matrix({{-1, 2, 0}, {3, -4, 5}});
  EXPECT_EQ(mfrw::compute_features(spec, w, x), Tensor::matrix({{0, 2, 0}, {3, 0, 5}}));
}

TEST(Backbone, HandComputedChain) {
  // 2 examples, 3 inputs, one hidden layer of 2, feature width 2
  mfrw::MainModelSpec spec{{3, {2}, 2}, {2, 2}};
  auto w = mfrw::init_params(spec, 1);
  w.get("backbone.0.weight") = Tensor::matrix({{1, -1}, {0, 2}, {1, 1}});
  w.get("backbone.0.bias") = Tensor::vector({0, -1});
  w.get("backbone.1.weight") = Tensor::matrix({{1, 2}, {-1, 1}});
  w.get("backbone.1.bias") = Tensor::vector({0.5, 0});
  const auto x = Tensor::matrix({{1, 2, 3}, {-2, 0, 1}});
  // layer 0: x0 -> [4, 6-1] = [4, 5] ; x1 -> relu([-1, 3-1]) = [0, 2]
  // layer 1: [4,5] -> relu([4-5+0.5, 8+5]) = [0, 13] ; [0,2] -> relu([-2+0.5, 2]) = [0, 2]
  EXPECT_EQ(mfrw::compute_features(spec, w, x), Tensor::matrix({{0, 13}, {0, 2}}));
}

TEST(Backbone, WidthMismatch) {
  mfrw::MainModelSpec spec{{4, {5}, 3}, {3, 2}};
  const auto w = mfrw::init_params(spec, 1);
  EXPECT_THROW(mfrw::compute_features(spec, w, Tensor({2, 5})), mfrw::InputError);
}

TEST(Classifier, ZeroWeightsGiveLogC) {
  mfrw::MainModelSpec spec{{4, {5}, 3}, {3, 7}};
  auto w = mfrw::init_params(spec, 2);
  w.get("classifier.weight") = Tensor({3, 7});
  Gen gen(2);
  ad::Tape tape;
  const std::vector<int> y{0, 6, 3};
  const auto logits = tape.constant(mfrw::predict_logits(spec, w, gen.normal({3, 4})));
  for (double v : ad::softmax_cross_entropy(logits, y).value().data()) EXPECT_NEAR(v, std::log(7.0), 1e-15);
}

TEST(Classifier, BinarySoftmaxIsSigmoidOfTwiceLogit) {
  mfrw::ClassifierSpec spec{2, 2};
  ad::Tape tape;
  const double z = 0.7;
  const auto s = mfrw::classifier_forward(spec, tape.constant(Tensor::matrix({{z, 0}})),
                                          std::vector<ad::Var>{tape.constant(Tensor::matrix({{1, 0}, {0, 0}})),
                                                               tape.constant(Tensor::vector({0, 0}))});
  // logits [z, 0] shifted by -z/2 are [z/2, -z/2]: p0 = sigmoid(z)
  const std::vector<int> y{0};
  const double p0 = std::exp(-ad::softmax_cross_entropy(s, y).value()[0]);
  EXPECT_NEAR(p0, 1.0 / (1.0 + std::exp(-2.0 * (z / 2))), 1e-15);
}

TEST(Classifier, MatchesExplicitAlgebra) {
  mfrw::MainModelSpec spec{{3, {4}, 5}, {5, 3}};
  Gen gen(5);
  const auto w = mfrw::init_params(spec, 5);
  const auto x = gen.normal({4, 3});
  const auto got = mfrw::predict_logits(spec, w, x);
  const auto ref = mfrw::testing::reference_logits(spec, w, x);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-13);
}

TEST(Classifier, WidthMismatch) {
  ad::Tape tape;
  mfrw::ClassifierSpec spec{3, 2};
  std::vector<ad::Var> wc{tape.constant(Tensor({3, 2})), tape.constant(Tensor({2}))};
  EXPECT_THROW(mfrw::classifier_forward(spec, tape.constant(Tensor({2, 4})), wc), mfrw::InputError);
}

TEST(Advisor, FreshInitIsOneHalf) {
  mfrw::AdvisorSpec spec{6, 10};
  Gen gen(3);
  const auto theta = mfrw::init_params(spec, 3);
  const auto w = advisor_out(spec, theta, gen.normal({5, 6}), gen.uniform({5}, 0, 3));
  EXPECT_EQ(w.shape(), (Tensor::Shape{5, 6}));
  for (double v : w.data()) EXPECT_EQ(v, 0.5);
}

TEST(Advisor, ArchitectureWidths) {
  mfrw::AdvisorSpec spec{6, 10};
  const auto theta = mfrw::init_params(spec, 3);
  EXPECT_EQ(theta.get("advisor.embed_feature.weight").shape(), (Tensor::Shape{6, 10}));
  EXPECT_EQ(theta.get("advisor.embed_loss.weight").shape(), (Tensor::Shape{1, 10}));
  EXPECT_EQ(theta.get("advisor.common.weight").shape(), (Tensor::Shape{20, 20}));
  EXPECT_EQ(theta.get("advisor.output.weight").shape(), (Tensor::Shape{20, 6}));
  EXPECT_EQ(spec.common_dim(), 20u);
}

TEST(Advisor, IdenticalRowsGiveIdenticalWeights) {
  mfrw::AdvisorSpec spec{4, 5};
  Gen gen(4);
  auto theta = mfrw::init_params(spec, 4);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = gen.normal(theta[i].shape());
  const auto row = gen.normal({1, 4});
  Tensor f({2, 4});
  for (std::size_t j = 0; j < 4; ++j) f.at(0, j) = f.at(1, j) = row[j];
  const auto w = advisor_out(spec, theta, f, Tensor::vector({0.8, 0.8}));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(w.at(0, j), w.at(1, j));
  for (double v : w.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Advisor, GradientOfMeanWeightMatchesFiniteDifferences) {
  mfrw::AdvisorSpec spec{3, 4};
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Gen gen(seed);
    auto theta = mfrw::init_params(spec, seed);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = gen.normal(theta[i].shape(), 0.8);
    const auto f = gen.normal({5, 3});
    const auto loss = gen.uniform({5}, 0.1, 2.0);
    ad::Tape tape;
    const auto vars = mfrw::bind(tape, theta, Tracking::tracked);
    const auto analytic =
        tape.backward(ad::mean(mfrw::advisor_forward(spec, tape.constant(f), loss, vars))).collect(vars);
    const auto fd = mfrw::testing::numeric_gradient(
        [&](const ParamSet& p) { return mfrw::mean_of(advisor_out(spec, p, f, loss)); }, theta, 1e-5);
    EXPECT_LT(mfrw::testing::max_relative_error(analytic, fd, 1e-6), 1e-4) << "seed " << seed;
  }
}

TEST(Advisor, FeatureWidthMismatchAndBadLoss) {
  mfrw::AdvisorSpec spec{4, 5};
  const auto theta = mfrw::init_params(spec, 1);
  EXPECT_THROW(advisor_out(spec, theta, Tensor({2, 3}), Tensor({2})), mfrw::InputError);
  EXPECT_THROW(advisor_out(spec, theta, Tensor({2, 4}), Tensor::vector({1, -1})), mfrw::InputError);
  EXPECT_THROW(advisor_out(spec, theta, Tensor({2, 4}), Tensor({3})), mfrw::DimensionError);
}

TEST(MwNet, FreshInitIsOneHalfAndGradientsMatch) {
  mfrw::MwNetSpec spec{8};
  auto theta = mfrw::init_params(spec, 9);
  const auto loss = Tensor::vector({0.1, 1.5, 3.0});
  {
    ad::Tape tape;
    const auto v = mfrw::mwnet_forward(spec, loss, mfrw::bind(tape, theta, Tracking::constant)).value();
    EXPECT_EQ(v, Tensor({3}, 0.5));
  }
  Gen gen(9);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = gen.normal(theta[i].shape());
  ad::Tape tape;
  const auto vars = mfrw::bind(tape, theta, Tracking::tracked);
  const auto analytic = tape.backward(ad::mean(mfrw::mwnet_forward(spec, loss, vars))).collect(vars);
  const auto fd = mfrw::testing::numeric_gradient(
      [&](const ParamSet& p) {
        ad::Tape t;
        return mfrw::mean_of(mfrw::mwnet_forward(spec, loss, mfrw::bind(t, p, Tracking::constant)).value());
      },
      theta, 1e-5);
  EXPECT_LT(mfrw::testing::max_relative_error(analytic, fd, 1e-6), 1e-4);
}

TEST(ParamSet, NamesUniqueCloneIsIndependent) {
  ParamSet p;
  p.add("a", Tensor::vector({1, 2}));
  EXPECT_THROW(p.add("a", Tensor::vector({3})), mfrw::UsageError);
  auto c = p.clone();
  EXPECT_EQ(c, p);
  c[0][0] = 9;
  EXPECT_EQ(p[0][0], 1.0);
  EXPECT_THROW(static_cast<void>(p.get("missing")), mfrw::UsageError);
}

TEST(Init, DeterministicAndFanInScaled) {
  mfrw::MainModelSpec spec{{200, {200}, 200}, {200, 10}};
  EXPECT_EQ(mfrw::init_params(spec, 4), mfrw::init_params(spec, 4));
  EXPECT_NE(mfrw::init_params(spec, 4), mfrw::init_params(spec, 5));
  // Monte-Carlo: variance of x W over 1000 unit-variance samples stays within x/÷ 2 of the input variance.
  const auto w = mfrw::init_params(spec, 4);
  Gen gen(4);
  const auto x = gen.normal({1000, 200});
  ad::Tape tape;
  const auto out = ad::matmul(tape.constant(x), tape.constant(w.get("backbone.0.weight"))).value();
  double ss = 0.0;
  for (double v : out.data()) ss += v * v;
  const double var = ss / static_cast<double>(out.size());
  EXPECT_GT(var, 0.5);
  EXPECT_LT(var, 2.0);
}

TEST(Specs, Validation) {
  EXPECT_THROW((mfrw::MainModelSpec{{4, {5}, 3}, {2, 2}}).validate(), mfrw::InputError);
  EXPECT_THROW((mfrw::MainModelSpec{{4, {5}, 3}, {3, 1}}).validate(), mfrw::InputError);
  EXPECT_THROW((mfrw::BackboneSpec{4, {0}, 3}).validate(), mfrw::InputError);
  EXPECT_THROW((mfrw::AdvisorSpec{3, 0}).validate(), mfrw::InputError);
}
