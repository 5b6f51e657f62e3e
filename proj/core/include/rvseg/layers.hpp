// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Thin parameterized layers over the kernels. A layer is a spec holding
// indices into a ParamList; values live in the list, gradients go to a
// GradBuffer of the same layout.

#pragma once

#include <cstddef>
#include <string>

#include "rvseg/kernels.hpp"
#include "rvseg/rng.hpp"
#include "rvseg/tensor.hpp"

namespace rvseg::nn {

struct Conv3x3Spec {
  std::size_t weight = 0;
  std::size_t bias = 0;
  int in = 0;
  int out = 0;
  int stride = 1;
};

struct LinearSpec {
  std::size_t weight = 0;
  std::size_t bias = 0;
  int in = 0;
  int out = 0;
};

template <typename T>
Conv3x3Spec add_conv3x3(ParamList<T>& params, const std::string& name, int in, int out,
                        int stride = 1) {
  Conv3x3Spec s;
  s.weight = params.add(name + ".weight", ParamRole::weight, {out, in, 3, 3});
  s.bias = params.add(name + ".bias", ParamRole::bias, {out});
  s.in = in;
  s.out = out;
  s.stride = stride;
  return s;
}

template <typename T>
LinearSpec add_linear(ParamList<T>& params, const std::string& name, int in, int out) {
  LinearSpec s;
  s.weight = params.add(name + ".weight", ParamRole::weight, {out, in});
  s.bias = params.add(name + ".bias", ParamRole::bias, {out});
  s.in = in;
  s.out = out;
  return s;
}

/// He-normal weights (std = sqrt(2 / fan_in)), zero bias.
template <typename T>
void init_he(ParamList<T>& params, const Conv3x3Spec& s, Rng& rng);
template <typename T>
void init_he(ParamList<T>& params, const LinearSpec& s, Rng& rng);
template <typename T>
void init_zero(ParamList<T>& params, const LinearSpec& s);

template <typename T>
FeatureMap<T> forward(const Conv3x3Spec& s, const ParamList<T>& params, const FeatureMap<T>& x) {
  return kernels::conv3x3<T>(x, params[s.weight].value, params[s.bias].value, s.out, s.stride);
}

template <typename T>
void backward(const Conv3x3Spec& s, const ParamList<T>& params, const FeatureMap<T>& x,
              const FeatureMap<T>& grad_out, FeatureMap<T>* grad_in, GradBuffer<T>& grads) {
  kernels::conv3x3_backward<T>(x, params[s.weight].value, s.out, s.stride, grad_out, grad_in,
                               grads[s.weight], grads[s.bias]);
}

template <typename T>
FeatureMap<T> forward(const LinearSpec& s, const ParamList<T>& params, const FeatureMap<T>& x) {
  return kernels::linear_pixelwise<T>(x, params[s.weight].value, params[s.bias].value, s.out);
}

template <typename T>
void backward(const LinearSpec& s, const ParamList<T>& params, const FeatureMap<T>& x,
              const FeatureMap<T>& grad_out, FeatureMap<T>* grad_in, GradBuffer<T>& grads) {
  kernels::linear_pixelwise_backward<T>(x, params[s.weight].value, s.out, grad_out, grad_in,
                                        grads[s.weight], grads[s.bias]);
}

inline std::size_t parameter_count(const Conv3x3Spec& s) {
  return static_cast<std::size_t>(s.out) * s.in * 9 + s.out;
}
inline std::size_t parameter_count(const LinearSpec& s) {
  return static_cast<std::size_t>(s.out) * s.in + s.out;
}

}  // namespace rvseg::nn
