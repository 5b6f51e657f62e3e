// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Dense-grid numeric kernels with hand-written backward passes.
//
// Every backward function *accumulates* (+=) into the gradient outputs it is
// handed, so contributions from several consumers of one tensor can be
// summed without temporaries. A null grad_input pointer skips that output.
//
// Kernels are instantiated for float (training) and double (gradient checks).
// All reductions run in a fixed order; results are bit-reproducible.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rvseg/tensor.hpp"

namespace rvseg::kernels {

/// Lower bound applied to every standard deviation.
inline constexpr double kStdFloor = 1e-5;

/// Pixel chunk length for ordered reductions.
inline constexpr std::size_t kReductionChunk = 4096;

// ---------------------------------------------------------------------------
// 1x1 (pixelwise) linear map: out[c] = sum_k weight[c,k] * in[k] + bias[c]

template <typename T>
FeatureMap<T> linear_pixelwise(const FeatureMap<T>& in, std::span<const T> weight,
                               std::span<const T> bias, int out_channels);

template <typename T>
void linear_pixelwise_backward(const FeatureMap<T>& in, std::span<const T> weight,
                               int out_channels, const FeatureMap<T>& grad_out,
                               FeatureMap<T>* grad_in, std::span<T> grad_weight,
                               std::span<T> grad_bias);

// ---------------------------------------------------------------------------
// 3x3 convolution, zero padding 1, stride 1 or 2. weight is
// out x in x 3 x 3. With stride 2 the output is ceil(H/2) x ceil(W/2).

template <typename T>
FeatureMap<T> conv3x3(const FeatureMap<T>& in, std::span<const T> weight,
                      std::span<const T> bias, int out_channels, int stride = 1);

template <typename T>
void conv3x3_backward(const FeatureMap<T>& in, std::span<const T> weight, int out_channels,
                      int stride, const FeatureMap<T>& grad_out, FeatureMap<T>* grad_in,
                      std::span<T> grad_weight, std::span<T> grad_bias);

// ---------------------------------------------------------------------------
// Activations

/// x if x >= 0 else slope * x. The derivative at exactly 0 is 1.
template <typename T>
FeatureMap<T> leaky_relu(const FeatureMap<T>& in, T slope);

template <typename T>
void leaky_relu_backward(const FeatureMap<T>& in, T slope, const FeatureMap<T>& grad_out,
                         FeatureMap<T>& grad_in);

/// Softmax over the channel axis at every pixel, max-subtracted.
template <typename T>
FeatureMap<T> softmax_channel(const FeatureMap<T>& logits);

/// Backward given the softmax output and the gradient w.r.t. it.
template <typename T>
void softmax_channel_backward(const FeatureMap<T>& probs, const FeatureMap<T>& grad_probs,
                              FeatureMap<T>& grad_logits);

// ---------------------------------------------------------------------------
// Resampling and elementwise helpers

template <typename T>
FeatureMap<T> upsample_nearest2x(const FeatureMap<T>& in);

template <typename T>
void upsample_nearest2x_backward(const FeatureMap<T>& grad_out, FeatureMap<T>& grad_in);

/// a += b, shapes must match.
template <typename T>
void add_inplace(FeatureMap<T>& a, const FeatureMap<T>& b);

/// Zeroes every pixel where mask is false, across all channels.
template <typename T>
void apply_mask(FeatureMap<T>& f, const ValidMask& mask);

// ---------------------------------------------------------------------------
// Channel statistics and (de)normalization

/// Population mean/std per channel over valid pixels; std floored at
/// std_floor. Throws on an empty mask.
template <typename T>
ChannelStats<T> channel_stats(const FeatureMap<T>& f, const ValidMask& mask,
                              double std_floor = kStdFloor);

/// Accumulates d(loss)/df given d(loss)/d(mean) and d(loss)/d(std).
/// Channels whose std was clamped to the floor contribute no std gradient.
template <typename T>
void channel_stats_backward(const FeatureMap<T>& f, const ValidMask& mask,
                            const ChannelStats<T>& stats, std::span<const T> grad_mean,
                            std::span<const T> grad_std, FeatureMap<T>& grad_f,
                            double std_floor = kStdFloor);

/// (f - mean) / std on valid pixels, zero elsewhere.
template <typename T>
FeatureMap<T> normalize_channels(const FeatureMap<T>& f, const ChannelStats<T>& stats,
                                 const ValidMask& mask);

/// f * std + mean on valid pixels, zero elsewhere.
template <typename T>
FeatureMap<T> denormalize_channels(const FeatureMap<T>& f, const ChannelStats<T>& stats,
                                   const ValidMask& mask);

// ---------------------------------------------------------------------------
// Loss

template <typename T>
struct CrossEntropyResult {
  T loss = T(0);
  FeatureMap<T> grad;     // d(loss)/d(logits), zero on excluded pixels
  std::size_t counted = 0;
};

/// Mean negative log-likelihood of targets over pixels where include is true.
/// Throws if a counted target is outside [0, K) or no pixel is counted.
template <typename T>
CrossEntropyResult<T> cross_entropy(const FeatureMap<T>& logits, std::span<const int> targets,
                                    const ValidMask& include);

/// Argmax over channels, skipping channel `excluded` (pass -1 for none).
template <typename T>
std::vector<int> argmax_channel(const FeatureMap<T>& logits, int excluded = -1);

/// Sum of a sequence in fixed chunks, chunk partials combined in order.
double ordered_sum(std::span<const double> values);

}  // namespace rvseg::kernels
