// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rvseg {

template <typename T>
AdamW<T>::AdamW(const ParamList<T>& params, AdamWConfig config) : config_(config) {
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw std::invalid_argument("AdamW: betas must be in [0, 1)");
  }
  if (!(config.eps > 0.0) || config.weight_decay < 0.0) {
    throw std::invalid_argument("AdamW: eps must be > 0 and weight_decay >= 0");
  }
  for (const auto& p : params) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

template <typename T>
void AdamW<T>::step(ParamList<T>& params, double lr) {
  if (params.size() != m_.size()) throw std::invalid_argument("AdamW::step: parameter layout changed");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    const double decay = p.role == ParamRole::bias ? 0.0 : lr * config_.weight_decay;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      double w = p.value[i];
      w -= decay * w;
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      w -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      p.value[i] = static_cast<T>(w);
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

OneCycleSchedule::OneCycleSchedule(double peak, std::size_t total_steps, double pct_start,
                                   double div_factor, double final_div_factor)
    : peak_(peak), initial_(peak / div_factor), final_(peak / final_div_factor), total_(total_steps) {
  if (!(peak > 0.0) || total_steps == 0 || !(pct_start >= 0.0 && pct_start <= 1.0) ||
      !(div_factor > 0.0) || !(final_div_factor > 0.0)) {
    throw std::invalid_argument("OneCycleSchedule: invalid arguments");
  }
  warmup_ = static_cast<std::size_t>(std::lround(pct_start * static_cast<double>(total_steps)));
  warmup_ = std::min(warmup_, total_steps - 1);
}

double OneCycleSchedule::lr(std::size_t step) const {
  if (step >= total_) step = total_ - 1;
  if (step < warmup_) {
    return initial_ + (peak_ - initial_) * static_cast<double>(step) / static_cast<double>(warmup_);
  }
  const std::size_t span = total_ - 1 - warmup_;
  if (span == 0) return warmup_ > 0 ? final_ : peak_;
  const double x = static_cast<double>(step - warmup_) / static_cast<double>(span);
  return final_ + 0.5 * (peak_ - final_) * (1.0 + std::cos(std::numbers::pi * x));
}

}  // namespace rvseg
