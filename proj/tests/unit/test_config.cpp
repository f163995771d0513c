// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "mfrw/config.hpp"
#include "mfrw/errors.hpp"

using mfrw::ConfigError;
using mfrw::ValidationError;

namespace {

std::string field_of(const std::string& text) {
  try {
    mfrw::parse_config(text);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalConfigMaterializesDefaults) {
  const auto c = mfrw::parse_config("[run]\nmethod = mfrw\n");
  EXPECT_EQ(c.train.method, mfrw::Method::mfrw);
  EXPECT_DOUBLE_EQ(c.train.lr.base, 0.1);
  EXPECT_DOUBLE_EQ(c.train.sgd.momentum, 0.9);
  EXPECT_DOUBLE_EQ(c.train.sgd.weight_decay, 5e-4);
  EXPECT_EQ(c.train.batch_size, 128u);
  EXPECT_EQ(c.train.meta_batch_size, 128u);
  EXPECT_DOUBLE_EQ(c.train.adam.lr, 1e-4);
  EXPECT_EQ(c.train.nets.advisor.embed_dim, 100u);
  EXPECT_EQ(c.split.meta_size, 1000u);
  EXPECT_EQ(c.train.nets.main.backbone.hidden_dims, std::vector<std::size_t>{128});
  EXPECT_EQ(c.train.nets.main.backbone.feature_dim, 64u);
  EXPECT_EQ(c.noise.kind, mfrw::NoiseKind::none);
  EXPECT_EQ(c.train.lr.milestones, (std::vector<int>{50, 70}));
}

TEST(Config, MethodIsRequired) {
  EXPECT_EQ(field_of("[run]\nmethod =\n"), "run.method");
  EXPECT_EQ(field_of("[run]\nepochs = 3\n"), "run.method");
  EXPECT_EQ(field_of("[run]\nmethod = sgd\n"), "run.method");
}

TEST(Config, RangeErrorsNameTheField) {
  EXPECT_EQ(field_of("[run]\nmethod = ce\n[noise]\nkind = flip\np = 1.3\n"), "noise.p");
  EXPECT_EQ(field_of("[run]\nmethod = ce\nepochs = -1\n"), "run.epochs");
  EXPECT_EQ(field_of("[run]\nmethod = ce\n[optim]\nbatch_size = 0\n"), "optim.batch_size");
  EXPECT_EQ(field_of("[run]\nmethod = ce\n[optim]\nmilestones = 5,3\n"), "optim.milestones");
  EXPECT_EQ(field_of("[run]\nmethod = ce\n[data]\nn = 100\n"), "split.meta_size");
  EXPECT_EQ(field_of("[run]\nmethod = ce\n[data]\nclasses = 3\n[noise]\nkind = flip3\np = 0.2\n"), "noise.pairs");
  EXPECT_EQ(field_of("[run]\nmethod = ce\n[data]\nsource = idx\n"), "data.train_images");
}

TEST(Config, ValidationErrorIsAConfigError) {
  EXPECT_THROW(mfrw::parse_config("[run]\nmethod = ce\n[noise]\np = 2\n"), ConfigError);
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    mfrw::parse_config("[run]\nmethod = ce\n[optim]\nlearning_rate = 0.1\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("optim.learning_rate"), std::string::npos);
  }
  EXPECT_THROW(mfrw::parse_config("[runs]\nmethod = ce\n"), ConfigError);
  EXPECT_THROW(mfrw::parse_config("method = ce\n"), ConfigError);
}

TEST(Config, MalformedAndDuplicateKeys) {
  EXPECT_THROW(mfrw::parse_config("[run]\nmethod = ce\nmethod = mfrw\n"), ConfigError);
  EXPECT_THROW(mfrw::parse_config("[run\nmethod = ce\n"), ConfigError);
  EXPECT_THROW(mfrw::parse_config("[run]\nmethod = ce\nepochs = ten\n"), ConfigError);
}

TEST(Config, CommentsAndFullSurface) {
  const auto c = mfrw::parse_config(R"(
; comment
# another comment
[run]
method = mwnet
epochs = 7
outdir = somewhere

[data]
source = blobs
n = 2000
classes = 4
dim = 5
separation = 2.5
noise_std = 0.5
test_n = 300
seed = 11

[noise]
kind = flip2
p = 0.4
seed = 12
pairs = 0:1 2; 1:2 3; 2:3 0; 3:0 1

[split]
meta_size = 40
seed = 13

[model]
hidden = 32,16
feature_dim = 8
embed_dim = 10
mwnet_hidden = 20
init_seed = 14

[optim]
lr = 0.05
milestones = 3,5
momentum = 0.8
weight_decay = 0
meta_lr = 0.001
batch_size = 64
meta_batch_size = 20
shuffle_seed = 15
hypergrad = disabled
hypergrad_eps = 0.02
)");
  EXPECT_EQ(c.train.method, mfrw::Method::mwnet);
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_EQ(c.outdir, "somewhere");
  EXPECT_EQ(c.data.blobs.n, 2000u);
  EXPECT_EQ(c.data.test_n, 300u);
  EXPECT_EQ(c.noise.kind, mfrw::NoiseKind::flip2);
  EXPECT_EQ(c.noise.pairing[2], (std::vector<int>{3, 0}));
  EXPECT_EQ(c.train.nets.main.backbone.hidden_dims, (std::vector<std::size_t>{32, 16}));
  EXPECT_EQ(c.train.meta_batch_size, 20u);
  EXPECT_EQ(c.train.hyper.mode, mfrw::HypergradSpec::Mode::disabled);
  EXPECT_EQ(c.train.init_seed, 14u);
  EXPECT_EQ(c.split.seed, 13u);

  // canonical text round-trips
  const auto again = mfrw::parse_config(mfrw::to_text(c));
  EXPECT_EQ(mfrw::to_text(again), mfrw::to_text(c));
  EXPECT_EQ(again.noise.pairing, c.noise.pairing);
  EXPECT_DOUBLE_EQ(again.data.blobs.noise_std, 0.5);
}

TEST(Config, ApplySeedSetsEveryStream) {
  auto c = mfrw::parse_config("[run]\nmethod = ce\n");
  mfrw::apply_seed(c, 42);
  EXPECT_EQ(c.data.seed, 42u);
  EXPECT_EQ(c.split.seed, 42u);
  EXPECT_EQ(c.noise.seed, 42u);
  EXPECT_EQ(c.train.init_seed, 42u);
  EXPECT_EQ(c.train.shuffle_seed, 42u);
}
