// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rvseg/kernels.hpp"
#include "rvseg/rdc.hpp"
#include "rvseg/rng.hpp"

namespace {

using namespace rvseg;

FeatureMap<float> noise(int c, int h, int w, Rng& rng) {
  std::normal_distribution<float> n;
  FeatureMap<float> f(c, h, w);
  for (auto& v : f.values()) v = n(rng);
  return f;
}

std::vector<float> noise(std::size_t n, Rng& rng) {
  std::normal_distribution<float> d;
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Args: channels, width (height fixed at 32).
void BM_Conv3x3Forward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int w = static_cast<int>(state.range(1));
  Rng rng(1);
  const auto in = noise(c, 32, w, rng);
  const auto weight = noise(static_cast<std::size_t>(c) * c * 9, rng);
  const auto bias = noise(c, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv3x3<float>(in, weight, bias, c));
  state.SetItemsProcessed(state.iterations() * 32 * w);
}
BENCHMARK(BM_Conv3x3Forward)->Args({16, 256})->Args({32, 256})->Args({16, 512});

void BM_Conv3x3Backward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int w = static_cast<int>(state.range(1));
  Rng rng(2);
  const auto in = noise(c, 32, w, rng);
  const auto weight = noise(static_cast<std::size_t>(c) * c * 9, rng);
  const auto grad_out = noise(c, 32, w, rng);
  FeatureMap<float> grad_in(c, 32, w);
  std::vector<float> gw(weight.size()), gb(c);
  for (auto _ : state) {
    kernels::conv3x3_backward<float>(in, weight, c, 1, grad_out, &grad_in, gw, gb);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 32 * w);
}
BENCHMARK(BM_Conv3x3Backward)->Args({16, 256})->Args({32, 256});

void BM_LinearPixelwise(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Rng rng(3);
  const auto in = noise(c, 32, 256, rng);
  const auto weight = noise(static_cast<std::size_t>(c) * c, rng);
  const auto bias = noise(c, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::linear_pixelwise<float>(in, weight, bias, c));
}
BENCHMARK(BM_LinearPixelwise)->Arg(16)->Arg(48);

// Args: slots.
void BM_StyleRetrieval(benchmark::State& state) {
  const int slots = static_cast<int>(state.range(0));
  Rng rng(4);
  const auto f = noise(16, 32, 256, rng);
  const auto memory = noise(static_cast<std::size_t>(slots) * 16, rng);
  const ValidMask mask(32, 256, true);
  for (auto _ : state) benchmark::DoNotOptimize(rdc::retrieve_style<float>(f, memory, slots, mask));
}
BENCHMARK(BM_StyleRetrieval)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
