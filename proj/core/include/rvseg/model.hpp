// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Range-view segmentation network.
//
//   geometry (x, y, z, depth) -> Stem_G -> [GAS weighting]   --+
//                                                              sum -> backbone -> logits
//   reflectance (intensity)   -> Stem_R -> [RDC calibration] --+
//
// The baseline variant replaces both stems with one stem over all five
// input channels. The backbone is a small encoder-decoder with two stride-2
// stages and additive skips, so H and W must be multiples of 4.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rvseg/gas.hpp"
#include "rvseg/layers.hpp"
#include "rvseg/projection.hpp"
#include "rvseg/rdc.hpp"
#include "rvseg/tensor.hpp"

namespace rvseg {

/// Rows of the ablation table.
enum class Variant : std::uint8_t {
  baseline = 0,     // merged stem
  geo = 1,          // Stem_G only
  geo_gas = 2,      // Stem_G + GAS
  geo_ref = 3,      // Stem_G + Stem_R
  geo_ref_rdc = 4,  // Stem_G + Stem_R + RDC
  full = 5,         // Stem_G + GAS + Stem_R + RDC
};

inline constexpr std::array<Variant, 6> kAllVariants{Variant::baseline, Variant::geo,
                                                     Variant::geo_gas,  Variant::geo_ref,
                                                     Variant::geo_ref_rdc, Variant::full};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct ModelConfig {
  int stem_channels = 32;
  std::array<int, 3> widths{32, 48, 64};
  int num_classes = 5;
  int ignore_label = kIgnoreLabel;
  double slope = 0.1;
  bool split_stems = true;
  bool use_ref = true;
  bool use_gas = true;
  bool use_rdc = true;
  gas::GasConfig gas;
  rdc::RdcConfig rdc;

  void validate() const;
  /// Copy of this config with the toggles of the given ablation row.
  ModelConfig with_variant(Variant v) const;
  friend bool operator==(const ModelConfig&, const ModelConfig&);
};

template <typename T>
struct Sample {
  InputPlanes<T> planes;
  std::vector<int> labels;  // per pixel, ignore label where empty
};

struct LossBreakdown {
  double total = 0.0;
  double seg = 0.0;
  double gas = 0.0;
  double rdc = 0.0;
};

/// Intermediate maps of an eval-mode forward pass.
template <typename T>
struct Inference {
  FeatureMap<T> logits;
  FeatureMap<T> fused;
  std::optional<FeatureMap<T>> geo;           // Stem_G output
  std::optional<FeatureMap<T>> gas_weight;    // 1 x H x W
  std::optional<FeatureMap<T>> ref;           // Stem_R output
  std::optional<FeatureMap<T>> ref_calibrated;
  std::optional<rdc::Retrieval<T>> retrieval;
  std::vector<std::pair<std::string, FeatureMap<T>>> stages;  // backbone activations

  /// Per-pixel class ids, never the ignore label.
  std::vector<int> predict(int ignore_label) const;
};

template <typename T>
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t init_seed);
  /// Builds the layout for `config` without initializing values.
  static Model uninitialized(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  ParamList<T>& params() { return params_; }
  const ParamList<T>& params() const { return params_; }
  std::size_t parameter_count() const { return params_.element_count(); }

  /// Training-mode loss on one sample. `seed` drives the GAS and RDC noise.
  /// With non-null grads, d(total)/d(params) is accumulated into it.
  LossBreakdown loss(const Sample<T>& sample, std::uint64_t seed, GradBuffer<T>* grads) const;

  /// Eval-mode forward.
  Inference<T> infer(const InputPlanes<T>& planes, bool keep_stages = false) const;

  /// Copies parameter values from another precision.
  template <typename U>
  void copy_values_from(const Model<U>& other);

 private:
  struct Stem {
    nn::Conv3x3Spec first;
    nn::Conv3x3Spec second;
  };
  struct Backbone {
    nn::Conv3x3Spec enc0, down1, down2, bottleneck, up1, up2;
    nn::LinearSpec head;
  };
  struct StemTrace;
  struct BackboneTrace;

  explicit Model(const ModelConfig& config);
  void initialize(std::uint64_t seed);
  Stem add_stem(const std::string& name, int in, int hidden);
  StemTrace stem_forward(const Stem& s, const FeatureMap<T>& x, const ValidMask& mask) const;
  void stem_backward(const Stem& s, const FeatureMap<T>& x, const StemTrace& t, const ValidMask& mask,
                     const FeatureMap<T>& grad_out, GradBuffer<T>& grads) const;
  BackboneTrace backbone_forward(const FeatureMap<T>& x) const;
  void backbone_backward(const FeatureMap<T>& x, const BackboneTrace& t, const FeatureMap<T>& grad_logits,
                         FeatureMap<T>& grad_x, GradBuffer<T>& grads) const;

  ModelConfig config_;
  ParamList<T> params_;
  std::optional<Stem> stem_merged_;
  std::optional<Stem> stem_geo_;
  std::optional<Stem> stem_ref_;
  std::optional<gas::AbnormalityNet> gas_;
  std::optional<rdc::StyleMemory> memory_;
  Backbone backbone_;
};

template <typename T>
template <typename U>
void Model<T>::copy_values_from(const Model<U>& other) {
  const auto& src = other.params();
  if (src.size() != params_.size()) throw std::invalid_argument("copy_values_from: layout mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].shape != params_[i].shape) throw std::invalid_argument("copy_values_from: shape mismatch");
    for (std::size_t k = 0; k < src[i].size(); ++k) params_[i].value[k] = static_cast<T>(src[i].value[k]);
  }
}

/// Hidden width of the merged stem. It is sized so the merged-stem
/// variant carries as many parameters as the split variant with every
/// module enabled, which keeps the ablation capacity-fair.
int merged_stem_hidden(const ModelConfig& config);

/// Parameter count of a config without allocating it.
std::size_t parameter_count(const ModelConfig& config);

/// Five-channel input (geometry then reflectance) for the merged stem.
template <typename T>
FeatureMap<T> concat_channels(const FeatureMap<T>& a, const FeatureMap<T>& b);

}  // namespace rvseg
