// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "rvseg/tensor.hpp"

namespace rvseg {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay. Decay is scaled by the learning rate and
/// skipped for bias parameters.
template <typename T>
class AdamW {
 public:
  AdamW(const ParamList<T>& params, AdamWConfig config);

  /// One update from the gradients stored in params.
  void step(ParamList<T>& params, double lr);
  std::size_t steps() const { return t_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

/// One-cycle schedule: linear warmup from peak/div to peak over the first
/// pct_start of the steps, then cosine annealing to peak/final_div.
class OneCycleSchedule {
 public:
  OneCycleSchedule(double peak, std::size_t total_steps, double pct_start = 0.3,
                   double div_factor = 25.0, double final_div_factor = 100.0);

  double lr(std::size_t step) const;
  std::size_t total_steps() const { return total_; }
  std::size_t warmup_steps() const { return warmup_; }

 private:
  double peak_;
  double initial_;
  double final_;
  std::size_t total_;
  std::size_t warmup_;
};

}  // namespace rvseg
