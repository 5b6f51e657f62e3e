// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "rvseg/model.hpp"
#include "rvseg/projection.hpp"
#include "rvseg/weather.hpp"

namespace {

using namespace rvseg;

const PointCloud& scene() {
  static const PointCloud pc = [] {
    SceneConfig c;
    c.seed = 7;
    return generate_scene(c);
  }();
  return pc;
}

void BM_GenerateScene(benchmark::State& state) {
  SceneConfig c;
  c.azimuth_steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    c.seed++;
    benchmark::DoNotOptimize(generate_scene(c));
  }
}
BENCHMARK(BM_GenerateScene)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Project(benchmark::State& state) {
  ProjectionConfig p;
  p.width = static_cast<int>(state.range(0));
  const PointCloud& pc = scene();
  for (auto _ : state) benchmark::DoNotOptimize(project(pc, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pc.size()));
}
BENCHMARK(BM_Project)->Arg(256)->Arg(512)->Arg(2048);

void BM_Corrupt(benchmark::State& state) {
  WeatherConfig w = weather_preset(static_cast<Condition>(state.range(0)));
  for (auto _ : state) {
    w.seed++;
    benchmark::DoNotOptimize(corrupt(scene(), w));
  }
}
BENCHMARK(BM_Corrupt)->DenseRange(1, 3)->Unit(benchmark::kMicrosecond);

ModelConfig bench_model() {
  ModelConfig m;
  m.stem_channels = 16;
  m.widths = {16, 32, 48};
  return m;
}

InputPlanes<float> planes(int width) {
  ProjectionConfig p;
  p.width = width;
  return make_input_planes<float>(project(scene(), p), InputStats::identity());
}

void BM_ModelInfer(benchmark::State& state) {
  const Model<float> model(bench_model().with_variant(static_cast<Variant>(state.range(1))), 1);
  const auto in = planes(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(in));
}
BENCHMARK(BM_ModelInfer)
    ->Args({256, static_cast<int>(Variant::baseline)})
    ->Args({256, static_cast<int>(Variant::full)})
    ->Args({512, static_cast<int>(Variant::full)})
    ->Unit(benchmark::kMillisecond);

void BM_ModelTrainStep(benchmark::State& state) {
  const Model<float> model(bench_model().with_variant(static_cast<Variant>(state.range(1))), 1);
  Sample<float> s;
  s.planes = planes(static_cast<int>(state.range(0)));
  const RangeImage img = project(scene(), ProjectionConfig{.width = static_cast<int>(state.range(0))});
  s.labels = pixel_labels(img, scene());
  auto grads = make_grad_buffer(model.params());
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.loss(s, ++seed, &grads));
}
BENCHMARK(BM_ModelTrainStep)
    ->Args({256, static_cast<int>(Variant::baseline)})
    ->Args({256, static_cast<int>(Variant::full)})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
