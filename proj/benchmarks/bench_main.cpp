// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "mfrw/metaloop.hpp"

namespace {

mfrw::Tensor random_tensor(mfrw::Tensor::Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  mfrw::Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

mfrw::Batch random_batch(std::size_t n, std::size_t dim, int classes, std::uint64_t seed) {
  mfrw::Batch b;
  b.x = random_tensor({n, dim}, seed);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(i) % classes);
  b.true_labels = b.labels;
  b.corrupted.assign(n, false);
  for (std::size_t i = 0; i < n; i += 3) b.corrupted[i] = true;
  return b;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 1);
  const auto b = random_tensor({n, n}, 2);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    mfrw::ad::kernels::gemm(a.data(), n, n, false, b.data(), n, n, false, out, false);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(32)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 3);
  const auto b = random_tensor({n, n}, 4);
  for (auto _ : state) {
    mfrw::ad::Tape tape;
    const auto x = tape.variable(a);
    const auto y = tape.variable(b);
    auto grads = tape.backward(mfrw::ad::mean(mfrw::ad::matmul(x, y)));
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

struct Setup {
  mfrw::LoopContext ctx;
  mfrw::TrainerState state;
  mfrw::Batch train;
  mfrw::Batch meta;
};

Setup make_setup(mfrw::Method method) {
  Setup s;
  s.ctx.nets.main = {{32, {128}, 64}, {64, 10}};
  s.ctx.nets.advisor = {64, 100};
  s.ctx.nets.mwnet = {100};
  s.state.w = mfrw::init_params(s.ctx.nets.main, 1);
  if (method == mfrw::Method::mfrw) s.state.theta = mfrw::init_params(s.ctx.nets.advisor, 2);
  if (method == mfrw::Method::mwnet) s.state.theta = mfrw::init_params(s.ctx.nets.mwnet, 2);
  s.train = random_batch(128, 32, 10, 5);
  s.meta = random_batch(128, 32, 10, 6);
  return s;
}

void BM_CeIteration(benchmark::State& state) {
  auto s = make_setup(mfrw::Method::ce);
  for (auto _ : state) benchmark::DoNotOptimize(mfrw::ce_iteration(s.ctx, s.state, s.train));
}
BENCHMARK(BM_CeIteration);

void BM_MwnetIteration(benchmark::State& state) {
  auto s = make_setup(mfrw::Method::mwnet);
  for (auto _ : state) benchmark::DoNotOptimize(mfrw::mwnet_iteration(s.ctx, s.state, s.train, s.meta));
}
BENCHMARK(BM_MwnetIteration);

void BM_MfrwIteration(benchmark::State& state) {
  auto s = make_setup(mfrw::Method::mfrw);
  for (auto _ : state) benchmark::DoNotOptimize(mfrw::mfrw_iteration(s.ctx, s.state, s.train, s.meta));
}
BENCHMARK(BM_MfrwIteration);

}  // namespace

BENCHMARK_MAIN();
