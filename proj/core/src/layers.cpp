// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/layers.hpp"

#include <cmath>
#include <random>

namespace rvseg::nn {
namespace {

template <typename T>
void fill_normal(std::vector<T>& v, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& x : v) x = static_cast<T>(dist(rng));
}

}  // namespace

template <typename T>
void init_he(ParamList<T>& params, const Conv3x3Spec& s, Rng& rng) {
  fill_normal(params[s.weight].value, std::sqrt(2.0 / (9.0 * s.in)), rng);
  std::fill(params[s.bias].value.begin(), params[s.bias].value.end(), T(0));
}

template <typename T>
void init_he(ParamList<T>& params, const LinearSpec& s, Rng& rng) {
  fill_normal(params[s.weight].value, std::sqrt(2.0 / s.in), rng);
  std::fill(params[s.bias].value.begin(), params[s.bias].value.end(), T(0));
}

template <typename T>
void init_zero(ParamList<T>& params, const LinearSpec& s) {
  std::fill(params[s.weight].value.begin(), params[s.weight].value.end(), T(0));
  std::fill(params[s.bias].value.begin(), params[s.bias].value.end(), T(0));
}

template void init_he<float>(ParamList<float>&, const Conv3x3Spec&, Rng&);
template void init_he<double>(ParamList<double>&, const Conv3x3Spec&, Rng&);
template void init_he<float>(ParamList<float>&, const LinearSpec&, Rng&);
template void init_he<double>(ParamList<double>&, const LinearSpec&, Rng&);
template void init_zero<float>(ParamList<float>&, const LinearSpec&);
template void init_zero<double>(ParamList<double>&, const LinearSpec&);

}  // namespace rvseg::nn
