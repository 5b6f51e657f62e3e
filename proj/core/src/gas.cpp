// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/gas.hpp"

#include <random>
#include <stdexcept>

#include "rvseg/errors.hpp"
#include "rvseg/kernels.hpp"

namespace rvseg::gas {

void GasConfig::validate() const {
  if (hidden_blocks < 0) throw ConfigError("gas.hidden_blocks must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("gas.gamma must be >= 0");
  if (!(negative_std > 0.0)) throw ConfigError("gas.negative_std must be > 0");
  if (negatives < 1) throw ConfigError("gas.negatives must be >= 1");
  if (loss_weight < 0.0) throw ConfigError("gas.loss_weight must be >= 0");
}

template <typename T>
AbnormalityNet AbnormalityNet::create(ParamList<T>& params, const std::string& prefix, int channels,
                                      const GasConfig& cfg) {
  AbnormalityNet net;
  net.channels = channels;
  net.slope = cfg.slope;
  for (int b = 0; b < cfg.hidden_blocks; ++b) {
    net.hidden.push_back(nn::add_linear(params, prefix + ".block" + std::to_string(b), channels, channels));
  }
  net.head = nn::add_linear(params, prefix + ".head", channels, 2);
  return net;
}

template <typename T>
void AbnormalityNet::init(ParamList<T>& params, Rng& rng) const {
  for (const auto& h : hidden) nn::init_he(params, h, rng);
  nn::init_zero(params, head);
}

std::size_t AbnormalityNet::parameter_count() const {
  std::size_t n = nn::parameter_count(head);
  for (const auto& h : hidden) n += nn::parameter_count(h);
  return n;
}

template <typename T>
AbnormalityTrace<T> abnormality_forward(const AbnormalityNet& net, const ParamList<T>& params,
                                        const FeatureMap<T>& f) {
  if (f.channels() != net.channels) {
    throw std::invalid_argument("abnormality_forward: expected " + std::to_string(net.channels) +
                                " channels, got " + f.shape_string());
  }
  AbnormalityTrace<T> t;
  t.inputs.push_back(f);
  for (const auto& h : net.hidden) {
    t.pre.push_back(nn::forward(h, params, t.inputs.back()));
    t.inputs.push_back(kernels::leaky_relu(t.pre.back(), static_cast<T>(net.slope)));
  }
  t.logits = nn::forward(net.head, params, t.inputs.back());
  t.probs = kernels::softmax_channel(t.logits);
  return t;
}

template <typename T>
void abnormality_backward(const AbnormalityNet& net, const ParamList<T>& params,
                          const AbnormalityTrace<T>& trace, const FeatureMap<T>& grad_logits,
                          FeatureMap<T>* grad_in, GradBuffer<T>& grads) {
  if (grad_in && !grad_in->same_shape(trace.inputs.front())) {
    throw std::invalid_argument("abnormality_backward: grad_in shape mismatch");
  }
  const auto& last = trace.inputs.back();
  if (net.hidden.empty()) {
    nn::backward(net.head, params, last, grad_logits, grad_in, grads);
    return;
  }
  FeatureMap<T> g(last.channels(), last.height(), last.width());
  nn::backward(net.head, params, last, grad_logits, &g, grads);
  for (std::size_t b = net.hidden.size(); b-- > 0;) {
    FeatureMap<T> gpre(g.channels(), g.height(), g.width());
    kernels::leaky_relu_backward(trace.pre[b], static_cast<T>(net.slope), g, gpre);
    if (b == 0) {
      nn::backward(net.hidden[b], params, trace.inputs[b], gpre, grad_in, grads);
    } else {
      FeatureMap<T> gin(trace.inputs[b].channels(), g.height(), g.width());
      nn::backward(net.hidden[b], params, trace.inputs[b], gpre, &gin, grads);
      g = std::move(gin);
    }
  }
}

template <typename T>
FeatureMap<T> make_positive(const FeatureMap<T>& f_geo, double gamma, Rng& rng) {
  if (gamma < 0.0) throw std::invalid_argument("make_positive: gamma must be >= 0");
  FeatureMap<T> out = f_geo;
  if (gamma == 0.0) return out;
  std::normal_distribution<double> eps(0.0, 1.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += static_cast<T>(gamma * eps(rng));
  return out;
}

template <typename T>
FeatureMap<T> sample_negative(int channels, int height, int width, double mean, double std,
                              Rng& rng) {
  if (std < 0.0) throw std::invalid_argument("sample_negative: std must be >= 0");
  FeatureMap<T> out(channels, height, width, static_cast<T>(mean));
  if (std == 0.0) return out;
  std::normal_distribution<double> dist(mean, std);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(dist(rng));
  return out;
}

template <typename T>
GasLossResult<T> gas_loss(const AbnormalityNet& net, const ParamList<T>& params,
                          const FeatureMap<T>& f_geo, const GasConfig& cfg, Rng& positive_rng,
                          Rng& negative_rng, const ValidMask& mask, GradBuffer<T>* grads, T scale) {
  if (!mask.matches(f_geo)) throw std::invalid_argument("gas_loss: mask does not match features");
  if (mask.count() == 0) throw std::invalid_argument("gas_loss: mask has no valid pixel");

  GasLossResult<T> r;
  r.grad_geo = FeatureMap<T>(f_geo.channels(), f_geo.height(), f_geo.width());
  const auto normal = std::vector<int>(f_geo.pixels(), kNormal);
  const auto abnormal = std::vector<int>(f_geo.pixels(), kAbnormal);

  const FeatureMap<T> positive = make_positive(f_geo, cfg.gamma, positive_rng);
  const auto pos_trace = abnormality_forward(net, params, positive);
  auto pos_ce = kernels::cross_entropy<T>(pos_trace.logits, normal, mask);
  r.ce_positive = pos_ce.loss;
  if (grads) {
    for (std::size_t i = 0; i < pos_ce.grad.size(); ++i) pos_ce.grad[i] *= scale;
    FeatureMap<T>* gin = cfg.stop_gradient ? nullptr : &r.grad_geo;
    abnormality_backward(net, params, pos_trace, pos_ce.grad, gin, *grads);
  }

  const T inv_neg = T(1) / static_cast<T>(cfg.negatives);
  T neg_sum = T(0);
  for (int k = 0; k < cfg.negatives; ++k) {
    const FeatureMap<T> negative = sample_negative<T>(f_geo.channels(), f_geo.height(), f_geo.width(),
                                                      cfg.negative_mean, cfg.negative_std, negative_rng);
    const auto neg_trace = abnormality_forward(net, params, negative);
    auto neg_ce = kernels::cross_entropy<T>(neg_trace.logits, abnormal, mask);
    neg_sum += neg_ce.loss;
    if (grads) {
      for (std::size_t i = 0; i < neg_ce.grad.size(); ++i) neg_ce.grad[i] *= scale * inv_neg;
      abnormality_backward<T>(net, params, neg_trace, neg_ce.grad, nullptr, *grads);
    }
  }
  r.ce_negative = neg_sum * inv_neg;
  r.loss = r.ce_positive + r.ce_negative;
  return r;
}

template <typename T>
FeatureMap<T> weight_features(const FeatureMap<T>& f, const FeatureMap<T>& weight) {
  if (weight.channels() != 1 || weight.height() != f.height() || weight.width() != f.width()) {
    throw std::invalid_argument("weight_features: weight must be 1 x H x W");
  }
  FeatureMap<T> out(f.channels(), f.height(), f.width());
  const std::size_t p = f.pixels();
  for (int c = 0; c < f.channels(); ++c) {
    const T* x = f.data() + c * p;
    T* y = out.data() + c * p;
    for (std::size_t i = 0; i < p; ++i) y[i] = weight[i] * x[i];
  }
  return out;
}

template <typename T>
GasWeightResult<T> gas_weight(const AbnormalityNet& net, const ParamList<T>& params,
                              const FeatureMap<T>& f_geo, const ValidMask& mask) {
  if (!mask.matches(f_geo)) throw std::invalid_argument("gas_weight: mask does not match features");
  GasWeightResult<T> r;
  r.trace = abnormality_forward(net, params, f_geo);
  r.weight = FeatureMap<T>(1, f_geo.height(), f_geo.width());
  auto normal = r.trace.probs.channel(kNormal);
  for (std::size_t i = 0; i < f_geo.pixels(); ++i) r.weight[i] = mask[i] ? normal[i] : T(0);
  r.weighted = weight_features(f_geo, r.weight);
  return r;
}

template <typename T>
void gas_weight_backward(const AbnormalityNet& net, const ParamList<T>& params,
                         const FeatureMap<T>& f_geo, const ValidMask& mask,
                         const GasWeightResult<T>& fwd, const FeatureMap<T>& grad_weighted,
                         FeatureMap<T>& grad_geo, GradBuffer<T>& grads) {
  if (!grad_weighted.same_shape(f_geo) || !grad_geo.same_shape(f_geo)) {
    throw std::invalid_argument("gas_weight_backward: shape mismatch");
  }
  const std::size_t p = f_geo.pixels();
  FeatureMap<T> grad_probs(2, f_geo.height(), f_geo.width());
  auto gw = grad_probs.channel(kNormal);
  for (int c = 0; c < f_geo.channels(); ++c) {
    const T* x = f_geo.data() + c * p;
    const T* g = grad_weighted.data() + c * p;
    T* gx = grad_geo.data() + c * p;
    for (std::size_t i = 0; i < p; ++i) {
      gx[i] += fwd.weight[i] * g[i];
      if (mask[i]) gw[i] += g[i] * x[i];
    }
  }
  FeatureMap<T> grad_logits(2, f_geo.height(), f_geo.width());
  kernels::softmax_channel_backward(fwd.trace.probs, grad_probs, grad_logits);
  abnormality_backward(net, params, fwd.trace, grad_logits, &grad_geo, grads);
}

#define RVSEG_INSTANTIATE_GAS(T)                                                                   \
  template AbnormalityNet AbnormalityNet::create<T>(ParamList<T>&, const std::string&, int,        \
                                                    const GasConfig&);                            \
  template void AbnormalityNet::init<T>(ParamList<T>&, Rng&) const;                                \
  template AbnormalityTrace<T> abnormality_forward<T>(const AbnormalityNet&, const ParamList<T>&,  \
                                                      const FeatureMap<T>&);                      \
  template void abnormality_backward<T>(const AbnormalityNet&, const ParamList<T>&,                \
                                        const AbnormalityTrace<T>&, const FeatureMap<T>&,          \
                                        FeatureMap<T>*, GradBuffer<T>&);                           \
  template FeatureMap<T> make_positive<T>(const FeatureMap<T>&, double, Rng&);                     \
  template FeatureMap<T> sample_negative<T>(int, int, int, double, double, Rng&);                  \
  template GasLossResult<T> gas_loss<T>(const AbnormalityNet&, const ParamList<T>&,                \
                                        const FeatureMap<T>&, const GasConfig&, Rng&, Rng&,        \
                                        const ValidMask&, GradBuffer<T>*, T);                      \
  template FeatureMap<T> weight_features<T>(const FeatureMap<T>&, const FeatureMap<T>&);           \
  template GasWeightResult<T> gas_weight<T>(const AbnormalityNet&, const ParamList<T>&,            \
                                            const FeatureMap<T>&, const ValidMask&);               \
  template void gas_weight_backward<T>(const AbnormalityNet&, const ParamList<T>&,                 \
                                       const FeatureMap<T>&, const ValidMask&,                     \
                                       const GasWeightResult<T>&, const FeatureMap<T>&,            \
                                       FeatureMap<T>&, GradBuffer<T>&);

RVSEG_INSTANTIATE_GAS(float)
RVSEG_INSTANTIATE_GAS(double)

#undef RVSEG_INSTANTIATE_GAS

}  // namespace rvseg::gas
