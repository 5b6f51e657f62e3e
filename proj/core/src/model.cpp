// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "rvseg/errors.hpp"
#include "rvseg/kernels.hpp"
#include "rvseg/rng.hpp"

namespace rvseg {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::geo: return "geo";
    case Variant::geo_gas: return "geo+gas";
    case Variant::geo_ref: return "geo+ref";
    case Variant::geo_ref_rdc: return "geo+ref+rdc";
    case Variant::full: return "full";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (stem_channels < 1) throw ConfigError("model.stem_channels must be >= 1");
  for (int w : widths) {
    if (w < 1) throw ConfigError("model.widths entries must be >= 1");
  }
  if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
  if (ignore_label < 0 || ignore_label >= num_classes) {
    throw ConfigError("model.ignore_label must be a class id in [0, num_classes)");
  }
  if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("model.slope must be in [0, 1)");
  if (!split_stems && (use_ref || use_gas || use_rdc)) {
    throw ConfigError("model: gas, rdc and the reflectance stem require split_stems");
  }
  if (use_rdc && !use_ref) throw ConfigError("model.use_rdc requires model.use_ref");
  gas.validate();
  rdc.validate();
}

ModelConfig ModelConfig::with_variant(Variant v) const {
  ModelConfig c = *this;
  c.split_stems = v != Variant::baseline;
  c.use_ref = v == Variant::geo_ref || v == Variant::geo_ref_rdc || v == Variant::full;
  c.use_gas = v == Variant::geo_gas || v == Variant::full;
  c.use_rdc = v == Variant::geo_ref_rdc || v == Variant::full;
  return c;
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.stem_channels == b.stem_channels && a.widths == b.widths &&
         a.num_classes == b.num_classes && a.ignore_label == b.ignore_label && a.slope == b.slope &&
         a.split_stems == b.split_stems && a.use_ref == b.use_ref && a.use_gas == b.use_gas &&
         a.use_rdc == b.use_rdc && a.gas.hidden_blocks == b.gas.hidden_blocks &&
         a.gas.gamma == b.gas.gamma && a.gas.negative_mean == b.gas.negative_mean &&
         a.gas.negative_std == b.gas.negative_std && a.gas.negatives == b.gas.negatives &&
         a.gas.stop_gradient == b.gas.stop_gradient &&
         a.gas.weight_in_training == b.gas.weight_in_training &&
         a.gas.loss_weight == b.gas.loss_weight && a.gas.slope == b.gas.slope &&
         a.rdc.slots == b.rdc.slots && a.rdc.temperature == b.rdc.temperature &&
         a.rdc.loss_weight == b.rdc.loss_weight;
}

template <typename T>
std::vector<int> Inference<T>::predict(int ignore_label) const {
  return kernels::argmax_channel(logits, ignore_label);
}

template <typename T>
FeatureMap<T> concat_channels(const FeatureMap<T>& a, const FeatureMap<T>& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("concat_channels: spatial shape mismatch");
  }
  FeatureMap<T> out(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.values().begin(), a.values().end(), out.data());
  std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
struct Model<T>::StemTrace {
  FeatureMap<T> z1, a1, z2, out;
};

template <typename T>
struct Model<T>::BackboneTrace {
  FeatureMap<T> z_e0, e0, z_d1, d1, z_d2, d2, z_b, b, ub, z_u1, u1, uu1, z_u2, u2, logits;
};

template <typename T>
Model<T>::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int s = config_.stem_channels;
  if (config_.split_stems) {
    stem_geo_ = add_stem("stem_geo", 4, s);
    if (config_.use_gas) gas_ = gas::AbnormalityNet::create(params_, "gas", s, config_.gas);
    if (config_.use_ref) stem_ref_ = add_stem("stem_ref", 1, s);
    if (config_.use_rdc) memory_ = rdc::StyleMemory::create(params_, "rdc.memory", config_.rdc.slots, s);
  } else {
    stem_merged_ = add_stem("stem", 5, merged_stem_hidden(config_));
  }
  const auto [c1, c2, c3] = config_.widths;
  backbone_.enc0 = nn::add_conv3x3(params_, "backbone.enc0", s, c1);
  backbone_.down1 = nn::add_conv3x3(params_, "backbone.down1", c1, c2, 2);
  backbone_.down2 = nn::add_conv3x3(params_, "backbone.down2", c2, c3, 2);
  backbone_.bottleneck = nn::add_conv3x3(params_, "backbone.bottleneck", c3, c3);
  backbone_.up1 = nn::add_conv3x3(params_, "backbone.up1", c3, c2);
  backbone_.up2 = nn::add_conv3x3(params_, "backbone.up2", c2, c1);
  backbone_.head = nn::add_linear(params_, "backbone.head", c1, config_.num_classes);
}

template <typename T>
Model<T>::Model(const ModelConfig& config, std::uint64_t init_seed) : Model(config) {
  initialize(init_seed);
}

template <typename T>
Model<T> Model<T>::uninitialized(const ModelConfig& config) {
  return Model(config);
}

template <typename T>
typename Model<T>::Stem Model<T>::add_stem(const std::string& name, int in, int hidden) {
  Stem s;
  s.first = nn::add_conv3x3(params_, name + ".conv1", in, hidden);
  s.second = nn::add_conv3x3(params_, name + ".conv2", hidden, config_.stem_channels);
  return s;
}

template <typename T>
void Model<T>::initialize(std::uint64_t seed) {
  Rng rng(derive_seed(seed, SeedPurpose::init));
  for (const auto* stem : {&stem_merged_, &stem_geo_, &stem_ref_}) {
    if (stem->has_value()) {
      nn::init_he(params_, (*stem)->first, rng);
      nn::init_he(params_, (*stem)->second, rng);
    }
  }
  if (gas_) gas_->init(params_, rng);
  if (memory_) memory_->init(params_, rng);
  for (const auto* c : {&backbone_.enc0, &backbone_.down1, &backbone_.down2, &backbone_.bottleneck,
                        &backbone_.up1, &backbone_.up2}) {
    nn::init_he(params_, *c, rng);
  }
  nn::init_he(params_, backbone_.head, rng);
}

template <typename T>
typename Model<T>::StemTrace Model<T>::stem_forward(const Stem& s, const FeatureMap<T>& x,
                                                    const ValidMask& mask) const {
  const T slope = static_cast<T>(config_.slope);
  StemTrace t;
  t.z1 = nn::forward(s.first, params_, x);
  t.a1 = kernels::leaky_relu(t.z1, slope);
  t.z2 = nn::forward(s.second, params_, t.a1);
  t.out = kernels::leaky_relu(t.z2, slope);
  kernels::apply_mask(t.out, mask);
  return t;
}

template <typename T>
void Model<T>::stem_backward(const Stem& s, const FeatureMap<T>& x, const StemTrace& t,
                             const ValidMask& mask, const FeatureMap<T>& grad_out,
                             GradBuffer<T>& grads) const {
  const T slope = static_cast<T>(config_.slope);
  FeatureMap<T> g = grad_out;
  kernels::apply_mask(g, mask);
  FeatureMap<T> gz2(g.channels(), g.height(), g.width());
  kernels::leaky_relu_backward(t.z2, slope, g, gz2);
  FeatureMap<T> ga1(t.a1.channels(), g.height(), g.width());
  nn::backward(s.second, params_, t.a1, gz2, &ga1, grads);
  FeatureMap<T> gz1(t.z1.channels(), g.height(), g.width());
  kernels::leaky_relu_backward(t.z1, slope, ga1, gz1);
  nn::backward(s.first, params_, x, gz1, static_cast<FeatureMap<T>*>(nullptr), grads);
}

template <typename T>
typename Model<T>::BackboneTrace Model<T>::backbone_forward(const FeatureMap<T>& x) const {
  if (x.height() % 4 != 0 || x.width() % 4 != 0) {
    throw std::invalid_argument("backbone: height and width must be multiples of 4, got " +
                                x.shape_string());
  }
  const T slope = static_cast<T>(config_.slope);
  const auto& b = backbone_;
  BackboneTrace t;
  t.z_e0 = nn::forward(b.enc0, params_, x);
  t.e0 = kernels::leaky_relu(t.z_e0, slope);
  t.z_d1 = nn::forward(b.down1, params_, t.e0);
  t.d1 = kernels::leaky_relu(t.z_d1, slope);
  t.z_d2 = nn::forward(b.down2, params_, t.d1);
  t.d2 = kernels::leaky_relu(t.z_d2, slope);
  t.z_b = nn::forward(b.bottleneck, params_, t.d2);
  t.b = kernels::leaky_relu(t.z_b, slope);
  t.ub = kernels::upsample_nearest2x(t.b);
  t.z_u1 = nn::forward(b.up1, params_, t.ub);
  t.u1 = kernels::leaky_relu(t.z_u1, slope);
  kernels::add_inplace(t.u1, t.d1);
  t.uu1 = kernels::upsample_nearest2x(t.u1);
  t.z_u2 = nn::forward(b.up2, params_, t.uu1);
  t.u2 = kernels::leaky_relu(t.z_u2, slope);
  kernels::add_inplace(t.u2, t.e0);
  t.logits = nn::forward(b.head, params_, t.u2);
  return t;
}

template <typename T>
void Model<T>::backbone_backward(const FeatureMap<T>& x, const BackboneTrace& t,
                                 const FeatureMap<T>& grad_logits, FeatureMap<T>& grad_x,
                                 GradBuffer<T>& grads) const {
  const T slope = static_cast<T>(config_.slope);
  const auto& b = backbone_;
  auto zeros = [](const FeatureMap<T>& like) {
    return FeatureMap<T>(like.channels(), like.height(), like.width());
  };

  FeatureMap<T> g_u2 = zeros(t.u2);
  nn::backward(b.head, params_, t.u2, grad_logits, &g_u2, grads);
  FeatureMap<T> g_e0 = g_u2;  // skip
  FeatureMap<T> g_z = zeros(t.z_u2);
  kernels::leaky_relu_backward(t.z_u2, slope, g_u2, g_z);
  FeatureMap<T> g_uu1 = zeros(t.uu1);
  nn::backward(b.up2, params_, t.uu1, g_z, &g_uu1, grads);
  FeatureMap<T> g_u1 = zeros(t.u1);
  kernels::upsample_nearest2x_backward(g_uu1, g_u1);

  FeatureMap<T> g_d1 = g_u1;  // skip
  g_z = zeros(t.z_u1);
  kernels::leaky_relu_backward(t.z_u1, slope, g_u1, g_z);
  FeatureMap<T> g_ub = zeros(t.ub);
  nn::backward(b.up1, params_, t.ub, g_z, &g_ub, grads);
  FeatureMap<T> g_b = zeros(t.b);
  kernels::upsample_nearest2x_backward(g_ub, g_b);

  g_z = zeros(t.z_b);
  kernels::leaky_relu_backward(t.z_b, slope, g_b, g_z);
  FeatureMap<T> g_d2 = zeros(t.d2);
  nn::backward(b.bottleneck, params_, t.d2, g_z, &g_d2, grads);
  g_z = zeros(t.z_d2);
  kernels::leaky_relu_backward(t.z_d2, slope, g_d2, g_z);
  nn::backward(b.down2, params_, t.d1, g_z, &g_d1, grads);
  g_z = zeros(t.z_d1);
  kernels::leaky_relu_backward(t.z_d1, slope, g_d1, g_z);
  nn::backward(b.down1, params_, t.e0, g_z, &g_e0, grads);
  g_z = zeros(t.z_e0);
  kernels::leaky_relu_backward(t.z_e0, slope, g_e0, g_z);
  nn::backward(b.enc0, params_, x, g_z, &grad_x, grads);
}

template <typename T>
LossBreakdown Model<T>::loss(const Sample<T>& sample, std::uint64_t seed, GradBuffer<T>* grads) const {
  const auto& planes = sample.planes;
  const ValidMask& mask = planes.valid;
  if (sample.labels.size() != mask.pixels()) {
    throw std::invalid_argument("Model::loss: label count does not match the image");
  }
  if (grads && grads->size() != params_.size()) {
    throw std::invalid_argument("Model::loss: gradient buffer layout mismatch");
  }
  ValidMask include(mask.height(), mask.width(), false);
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    include.set(i, mask[i] && sample.labels[i] != config_.ignore_label);
  }

  LossBreakdown out;
  const T gas_w = static_cast<T>(config_.gas.loss_weight);
  const T rdc_w = static_cast<T>(config_.rdc.loss_weight);

  std::optional<StemTrace> geo_t, ref_t, merged_t;
  std::optional<gas::GasWeightResult<T>> weighted;
  std::optional<rdc::RdcTrainResult<T>> rdc_t;
  FeatureMap<T> g_geo;
  FeatureMap<T> fused;

  if (config_.split_stems) {
    geo_t = stem_forward(*stem_geo_, planes.geo, mask);
    g_geo = FeatureMap<T>(geo_t->out.channels(), mask.height(), mask.width());
    fused = geo_t->out;
    if (config_.use_gas) {
      Rng pos(derive_seed(seed, SeedPurpose::gas_positive));
      Rng neg(derive_seed(seed, SeedPurpose::gas_negative));
      auto gl = gas::gas_loss(*gas_, params_, geo_t->out, config_.gas, pos, neg, mask, grads, gas_w);
      out.gas = gl.loss;
      if (grads) kernels::add_inplace(g_geo, gl.grad_geo);
      if (config_.gas.weight_in_training) {
        weighted = gas::gas_weight(*gas_, params_, geo_t->out, mask);
        fused = weighted->weighted;
      }
    }
    if (config_.use_ref) {
      ref_t = stem_forward(*stem_ref_, planes.ref, mask);
      if (config_.use_rdc) {
        Rng aug(derive_seed(seed, SeedPurpose::rdc_augment));
        const auto draw = rdc::draw_augment(config_.stem_channels, aug);
        rdc_t = rdc::rdc_train_forward<T>(ref_t->out, params_[memory_->param].value, memory_->slots,
                                          mask, draw, config_.rdc.temperature);
        out.rdc = rdc_t->loss;
        kernels::add_inplace(fused, rdc_t->output);
      } else {
        kernels::add_inplace(fused, ref_t->out);
      }
    }
  } else {
    merged_t = stem_forward(*stem_merged_, concat_channels(planes.geo, planes.ref), mask);
    fused = merged_t->out;
  }

  const BackboneTrace bb = backbone_forward(fused);
  auto ce = kernels::cross_entropy<T>(bb.logits, sample.labels, include);
  out.seg = ce.loss;
  out.total = out.seg + static_cast<double>(gas_w) * out.gas + static_cast<double>(rdc_w) * out.rdc;
  if (!grads) return out;

  FeatureMap<T> g_fused(fused.channels(), fused.height(), fused.width());
  backbone_backward(fused, bb, ce.grad, g_fused, *grads);
  if (!config_.split_stems) {
    stem_backward(*stem_merged_, concat_channels(planes.geo, planes.ref), *merged_t, mask, g_fused, *grads);
    return out;
  }
  if (weighted) {
    gas::gas_weight_backward(*gas_, params_, geo_t->out, mask, *weighted, g_fused, g_geo, *grads);
  } else {
    kernels::add_inplace(g_geo, g_fused);
  }
  stem_backward(*stem_geo_, planes.geo, *geo_t, mask, g_geo, *grads);
  if (ref_t) {
    if (rdc_t) {
      FeatureMap<T> g_ref(ref_t->out.channels(), mask.height(), mask.width());
      rdc::rdc_train_backward<T>(ref_t->out, params_[memory_->param].value, memory_->slots, mask,
                                 config_.rdc.temperature, *rdc_t, &g_fused, rdc_w, g_ref,
                                 (*grads)[memory_->param]);
      stem_backward(*stem_ref_, planes.ref, *ref_t, mask, g_ref, *grads);
    } else {
      stem_backward(*stem_ref_, planes.ref, *ref_t, mask, g_fused, *grads);
    }
  }
  return out;
}

template <typename T>
Inference<T> Model<T>::infer(const InputPlanes<T>& planes, bool keep_stages) const {
  const ValidMask& mask = planes.valid;
  Inference<T> r;
  if (config_.split_stems) {
    r.geo = stem_forward(*stem_geo_, planes.geo, mask).out;
    r.fused = *r.geo;
    if (config_.use_gas) {
      auto w = gas::gas_weight(*gas_, params_, *r.geo, mask);
      r.gas_weight = std::move(w.weight);
      r.fused = std::move(w.weighted);
    }
    if (config_.use_ref) {
      r.ref = stem_forward(*stem_ref_, planes.ref, mask).out;
      if (config_.use_rdc) {
        auto cal = rdc::rdc_inference<T>(*r.ref, params_[memory_->param].value, memory_->slots, mask,
                                         config_.rdc.temperature);
        r.ref_calibrated = std::move(cal.output);
        r.retrieval = std::move(cal.retrieval);
        kernels::add_inplace(r.fused, *r.ref_calibrated);
      } else {
        kernels::add_inplace(r.fused, *r.ref);
      }
    }
  } else {
    r.fused = stem_forward(*stem_merged_, concat_channels(planes.geo, planes.ref), mask).out;
  }
  BackboneTrace bb = backbone_forward(r.fused);
  r.logits = std::move(bb.logits);
  if (keep_stages) {
    r.stages.emplace_back("enc0", std::move(bb.e0));
    r.stages.emplace_back("down1", std::move(bb.d1));
    r.stages.emplace_back("down2", std::move(bb.d2));
    r.stages.emplace_back("bottleneck", std::move(bb.b));
    r.stages.emplace_back("up1", std::move(bb.u1));
    r.stages.emplace_back("up2", std::move(bb.u2));
  }
  return r;
}

int merged_stem_hidden(const ModelConfig& config) {
  const long s = config.stem_channels;
  // Parameters the split variant spends before the backbone.
  const auto conv = [](long in, long out) { return 9 * in * out + out; };
  long split = conv(4, s) + conv(s, s) + conv(1, s) + conv(s, s) +
               static_cast<long>(config.rdc.slots) * s +
               config.gas.hidden_blocks * (s * s + s) + (2 * s + 2);
  // conv(5, h) + conv(h, s) = (46 + 9 s) h + s
  const double h = static_cast<double>(split - s) / static_cast<double>(46 + 9 * s);
  return std::max(static_cast<int>(std::lround(h)), 1);
}

std::size_t parameter_count(const ModelConfig& config) {
  return Model<float>::uninitialized(config).parameter_count();
}

template struct Inference<float>;
template struct Inference<double>;
template class Model<float>;
template class Model<double>;
template FeatureMap<float> concat_channels<float>(const FeatureMap<float>&, const FeatureMap<float>&);
template FeatureMap<double> concat_channels<double>(const FeatureMap<double>&, const FeatureMap<double>&);

}  // namespace rvseg
