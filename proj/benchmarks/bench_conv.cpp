#include <benchmark/benchmark.h>

#include <random>

#include "lsc/nn/mff_net.hpp"
#include "lsc/nn/ops.hpp"

using namespace lsc::nn;

namespace {

Tensor4<float> random_input(const Shape4& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(s.count());
  for (float& x : v) x = d(rng);
  return Tensor4<float>(s, std::move(v));
}

ConvParams<float> random_params(const ConvGeometry& g) {
  ConvParams<float> p(g);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> d(-0.1f, 0.1f);
  for (float& w : p.weight.value) w = d(rng);
  return p;
}

// args: side, dilation
void BM_ConvForward(benchmark::State& state) {
  const int side = int(state.range(0)), dil = int(state.range(1));
  const auto p = random_params({16, 16, 3, dil, 1, {dil, dil, dil}});
  const auto x = random_input({16, side, side, side}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d_forward(x, p));
  state.SetItemsProcessed(state.iterations() * std::int64_t(x.size()));
}
BENCHMARK(BM_ConvForward)->Args({24, 1})->Args({24, 2})->Args({24, 3})->Args({48, 1})->Unit(benchmark::kMillisecond);

void BM_ConvBackward(benchmark::State& state) {
  const int side = int(state.range(0));
  const auto p = random_params({16, 16, 3, 1, 1, {1, 1, 1}});
  const auto x = random_input({16, side, side, side}, 1);
  const auto go = random_input(conv3d_forward(x, p).shape(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d_backward(x, p, go));
}
BENCHMARK(BM_ConvBackward)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_NetForward(benchmark::State& state) {
  MffNet<float> net({}, 0);
  const auto x = random_input({1, 48, 48, 48}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, Mode::Infer));
}
BENCHMARK(BM_NetForward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
