// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Reflectance distortion calibration.
//
// A learnable bank of T style vectors is queried by cosine similarity from
// every valid reflectance-stem pixel. The channel statistics of the
// retrieved style map replace the scan's own statistics, so every scan is
// re-expressed in a source-like reflectance style. Training perturbs the
// scan statistics first and asks the calibrated output to match the
// unperturbed features.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rvseg/rng.hpp"
#include "rvseg/tensor.hpp"

namespace rvseg::rdc {

/// Norm guard for cosine similarity. A query below it counts as zero-norm.
inline constexpr double kNormEps = 1e-6;
/// Rows of the initial memory bank are redrawn while their norm is below this.
inline constexpr double kMinInitRowNorm = 1e-3;

struct RdcConfig {
  int slots = 64;
  double temperature = 1.0;
  double loss_weight = 1.0;

  void validate() const;
};

/// Memory bank parameter of shape slots x channels.
struct StyleMemory {
  std::size_t param = 0;
  int slots = 0;
  int channels = 0;

  template <typename T>
  static StyleMemory create(ParamList<T>& params, const std::string& name, int slots, int channels);

  /// N(0, 1) entries; rows with near-zero norm are redrawn.
  template <typename T>
  void init(ParamList<T>& params, Rng& rng) const;
};

template <typename T>
struct Retrieval {
  FeatureMap<T> attention;   // slots x H x W, zero on invalid pixels
  FeatureMap<T> style;       // V = M^T A, channels x H x W, zero on invalid pixels
  ChannelStats<T> stats;     // of `style` over valid pixels
  std::size_t zero_norm_pixels = 0;
};

/// Cosine-softmax retrieval from `memory` (slots x C, row-major).
template <typename T>
Retrieval<T> retrieve_style(const FeatureMap<T>& f, std::span<const T> memory, int slots,
                            const ValidMask& mask, double temperature = 1.0);

/// Accumulates the gradients of retrieve_style given d/d(stats.mean) and
/// d/d(stats.std). Either output pointer may be null/empty.
template <typename T>
void retrieve_style_backward(const FeatureMap<T>& f, std::span<const T> memory, int slots,
                             const ValidMask& mask, double temperature, const Retrieval<T>& fwd,
                             std::span<const T> grad_mean, std::span<const T> grad_std,
                             FeatureMap<T>* grad_f, std::span<T> grad_memory);

/// Per-channel augmentation factors alpha, beta in [0, 1).
struct AugmentDraw {
  std::vector<double> alpha;
  std::vector<double> beta;
};

AugmentDraw draw_augment(int channels, Rng& rng);

/// sigma_aug * (F - mu) / sigma + mu_aug with mu_aug = (alpha + 0.5) mu and
/// sigma_aug = (beta + 0.5) sigma; zero on invalid pixels.
template <typename T>
FeatureMap<T> augment(const FeatureMap<T>& f, const ValidMask& mask, const AugmentDraw& draw);

/// Re-express f with the given target statistics: std * N(f) + mean.
template <typename T>
FeatureMap<T> calibrate(const FeatureMap<T>& f, const ChannelStats<T>& target, const ValidMask& mask);

template <typename T>
struct RdcTrainResult {
  FeatureMap<T> output;  // calibrated augmented features
  T l_sc = T(0);
  T l_sa = T(0);
  T loss = T(0);  // l_sc + l_sa
  ChannelStats<T> ref_stats;
  FeatureMap<T> normalized;
  FeatureMap<T> augmented;
  Retrieval<T> retrieval;
  AugmentDraw draw;
};

/// Training-mode forward: augment, retrieve from the augmented map,
/// calibrate, and score against the unaugmented features.
template <typename T>
RdcTrainResult<T> rdc_train_forward(const FeatureMap<T>& f_ref, std::span<const T> memory, int slots,
                                    const ValidMask& mask, const AugmentDraw& draw,
                                    double temperature = 1.0);

/// Accumulates gradients of  <grad_output, output> + loss_scale * loss
/// into grad_ref and grad_memory. grad_output may be null.
template <typename T>
void rdc_train_backward(const FeatureMap<T>& f_ref, std::span<const T> memory, int slots,
                        const ValidMask& mask, double temperature, const RdcTrainResult<T>& fwd,
                        const FeatureMap<T>* grad_output, T loss_scale, FeatureMap<T>& grad_ref,
                        std::span<T> grad_memory);

template <typename T>
struct RdcInference {
  FeatureMap<T> output;
  Retrieval<T> retrieval;
};

/// Eval-mode path: retrieve from the unaugmented map and calibrate.
template <typename T>
RdcInference<T> rdc_inference(const FeatureMap<T>& f_ref, std::span<const T> memory, int slots,
                              const ValidMask& mask, double temperature = 1.0);

}  // namespace rvseg::rdc
