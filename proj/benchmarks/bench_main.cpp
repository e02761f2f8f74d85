#include <benchmark/benchmark.h>

#include <random>

#include "desnow/channel_priors.hpp"
#include "desnow/dtcwt.hpp"
#include "desnow/network.hpp"
#include "desnow/ops.hpp"

using namespace desnow;

namespace {

Tensor noise(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

void BM_Conv2d(benchmark::State& state) {
  const auto c = std::size_t(state.range(0)), n = std::size_t(state.range(1));
  const Tensor x = noise({c, n, n}, 1), w = noise({c, c, 5, 5}, 2), b = noise({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, 1, 2));
  state.SetItemsProcessed(state.iterations() * std::int64_t(c * c * 25 * n * n));
}
BENCHMARK(BM_Conv2d)->Args({8, 32})->Args({8, 64})->Args({16, 64})->Args({64, 64});

void BM_DtcwtForward(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  const Tensor x = noise({3, n, n}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(wavelet::dtcwt_forward(x, 2));
}
BENCHMARK(BM_DtcwtForward)->Arg(64)->Arg(128)->Arg(256);

void BM_DtcwtInverse(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  const wavelet::Pyramid p = wavelet::dtcwt_forward(noise({3, n, n}, 5), 2);
  for (auto _ : state) benchmark::DoNotOptimize(wavelet::idtcwt(p));
}
BENCHMARK(BM_DtcwtInverse)->Arg(64)->Arg(128)->Arg(256);

void BM_Dwt(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  const Tensor x = noise({3, n, n}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(wavelet::idwt2(wavelet::dwt2(x, 2)));
}
BENCHMARK(BM_Dwt)->Arg(128);

void BM_ContradictSliding(benchmark::State& state) {
  const Tensor x = noise({3, 128, 128}, 7);
  const priors::PatchSpec patch{int(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(priors::channel_prior_map(x, priors::PriorKind::kContradict, patch));
}
BENCHMARK(BM_ContradictSliding)->Arg(3)->Arg(15)->Arg(31);

void BM_ContradictBrute(benchmark::State& state) {
  const Tensor x = noise({3, 128, 128}, 7);
  const priors::PatchSpec patch{int(state.range(0))};
  for (auto _ : state)
    benchmark::DoNotOptimize(priors::channel_prior_map_brute(x, priors::PriorKind::kContradict, patch));
}
BENCHMARK(BM_ContradictBrute)->Arg(3)->Arg(15)->Arg(31);

void BM_ModelForward(benchmark::State& state) {
  const net::NetConfig cfg{64, 4, 5, 4, int(state.range(0))};
  const net::ModelWeights w = net::init_weights(cfg, 1);
  const auto n = std::size_t(state.range(1));
  const Tensor x = noise({3, n, n}, 8);
  for (auto _ : state) benchmark::DoNotOptimize(net::model_forward(x, w));
}
BENCHMARK(BM_ModelForward)->Args({8, 32})->Args({8, 64})->Args({4, 64})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  net::ModelWeights w = net::init_weights(net::NetConfig{64, 4, 5, 4, 8}, 1);
  const Tensor x = noise({3, 32, 32}, 9), y = noise({3, 32, 32}, 10);
  for (auto _ : state) {
    Tape tape;
    net::Binder b(tape, w);
    const Var out = net::model_forward(tape.constant(x), b);
    const Var loss = priors::ccl_loss(out, tape.constant(y), {15});
    tape.backward(ops::add(loss, ops::l1_loss(out, tape.constant(y))));
    w.zero_grad();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
