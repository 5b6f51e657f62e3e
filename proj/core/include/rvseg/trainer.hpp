// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rvseg/model.hpp"
#include "rvseg/optimizer.hpp"

namespace rvseg {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 4;
  double learning_rate = 0.0025;
  double weight_decay = 1e-4;
  std::string schedule = "onecycle";  // "onecycle" or "constant"
  bool track_initial_loss = true;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  LossBreakdown mean;
  double lr_last = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  LossBreakdown initial;  // mean over the data before the first step
  std::vector<EpochLog> epochs;
};

/// Number of worker threads: `requested` if positive, else RVSEG_THREADS,
/// else 1.
int resolve_threads(int requested = 0);

/// Mini-batch training. Samples are shuffled per epoch from `seed`; the
/// per-sample gradients of a batch are computed in parallel and summed in
/// sample order, so results do not depend on the thread count.
/// Throws NumericError on a non-finite loss.
TrainHistory train(Model<float>& model, std::span<const Sample<float>> data, const TrainConfig& config,
                   std::uint64_t seed, int threads = 0,
                   const std::function<void(const EpochLog&)>& on_epoch = {});

/// Mean forward-only training-mode loss over the data.
LossBreakdown evaluate_loss(const Model<float>& model, std::span<const Sample<float>> data,
                            std::uint64_t seed, int threads = 0);

}  // namespace rvseg
