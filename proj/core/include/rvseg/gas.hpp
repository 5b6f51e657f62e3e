// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Geometric abnormality suppression.
//
// A pixelwise classifier f(theta) learns, without any weather data, to tell
// slightly perturbed geometric stem features (positives, F + gamma * eps)
// from Gaussian noise maps (negatives). Its "normal" probability then
// re-weights the geometric features so that pixels off the clean-feature
// manifold are suppressed.
//
// Output channel 0 of the classifier is "normal", channel 1 "abnormal".

#pragma once

#include <string>
#include <vector>

#include "rvseg/layers.hpp"
#include "rvseg/rng.hpp"
#include "rvseg/tensor.hpp"

namespace rvseg::gas {

inline constexpr int kNormal = 0;
inline constexpr int kAbnormal = 1;

struct GasConfig {
  int hidden_blocks = 2;
  double gamma = 0.02;
  double negative_mean = 0.0;
  double negative_std = 1.0;
  int negatives = 1;               // negative maps per positive map
  bool stop_gradient = false;      // keep L_GAS from reaching the geometric stem
  bool weight_in_training = true;  // apply the weighting during training too
  double loss_weight = 1.0;
  double slope = 0.1;

  void validate() const;
};

/// Hidden 1x1 blocks (C -> C, leaky ReLU) followed by a C -> 2 head.
struct AbnormalityNet {
  std::vector<nn::LinearSpec> hidden;
  nn::LinearSpec head;
  int channels = 0;
  double slope = 0.1;

  template <typename T>
  static AbnormalityNet create(ParamList<T>& params, const std::string& prefix, int channels,
                               const GasConfig& cfg);

  /// He-initialized hidden blocks and a zero head, so every pixel starts at
  /// probability (0.5, 0.5).
  template <typename T>
  void init(ParamList<T>& params, Rng& rng) const;

  std::size_t parameter_count() const;
};

template <typename T>
struct AbnormalityTrace {
  std::vector<FeatureMap<T>> inputs;  // input to each hidden block, then to the head
  std::vector<FeatureMap<T>> pre;     // hidden pre-activations
  FeatureMap<T> logits;               // 2 x H x W
  FeatureMap<T> probs;                // softmax of logits
};

template <typename T>
AbnormalityTrace<T> abnormality_forward(const AbnormalityNet& net, const ParamList<T>& params,
                                        const FeatureMap<T>& f);

template <typename T>
void abnormality_backward(const AbnormalityNet& net, const ParamList<T>& params,
                          const AbnormalityTrace<T>& trace, const FeatureMap<T>& grad_logits,
                          FeatureMap<T>* grad_in, GradBuffer<T>& grads);

/// F + gamma * eps, eps ~ N(0, I).
template <typename T>
FeatureMap<T> make_positive(const FeatureMap<T>& f_geo, double gamma, Rng& rng);

/// I.i.d. N(mean, std^2) map of the requested shape.
template <typename T>
FeatureMap<T> sample_negative(int channels, int height, int width, double mean, double std,
                              Rng& rng);

template <typename T>
struct GasLossResult {
  T loss = T(0);         // ce_positive + ce_negative
  T ce_positive = T(0);
  T ce_negative = T(0);  // averaged over the negative maps
  FeatureMap<T> grad_geo;  // d(scale * loss)/d(F_geo); zero with stop_gradient
};

/// Self-supervised loss on one feature map, restricted to valid pixels.
/// Positive and negative noise come from separate streams. When `grads` is
/// non-null, scale * d(loss)/d(theta) is accumulated into it and grad_geo is
/// filled.
template <typename T>
GasLossResult<T> gas_loss(const AbnormalityNet& net, const ParamList<T>& params,
                          const FeatureMap<T>& f_geo, const GasConfig& cfg, Rng& positive_rng,
                          Rng& negative_rng, const ValidMask& mask, GradBuffer<T>* grads,
                          T scale = T(1));

template <typename T>
struct GasWeightResult {
  FeatureMap<T> weight;    // 1 x H x W normal-class probability, 0 on invalid pixels
  FeatureMap<T> weighted;  // weight (broadcast) * F_geo
  AbnormalityTrace<T> trace;
};

/// Broadcast multiply of a 1 x H x W weight over every channel.
template <typename T>
FeatureMap<T> weight_features(const FeatureMap<T>& f, const FeatureMap<T>& weight);

template <typename T>
GasWeightResult<T> gas_weight(const AbnormalityNet& net, const ParamList<T>& params,
                              const FeatureMap<T>& f_geo, const ValidMask& mask);

/// Backward of gas_weight given d(loss)/d(weighted).
template <typename T>
void gas_weight_backward(const AbnormalityNet& net, const ParamList<T>& params,
                         const FeatureMap<T>& f_geo, const ValidMask& mask,
                         const GasWeightResult<T>& fwd, const FeatureMap<T>& grad_weighted,
                         FeatureMap<T>& grad_geo, GradBuffer<T>& grads);

}  // namespace rvseg::gas
