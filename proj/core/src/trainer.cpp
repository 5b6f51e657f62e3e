// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#ifdef RVSEG_HAVE_OPENMP
#include <omp.h>
#endif

#include "rvseg/errors.hpp"
#include "rvseg/rng.hpp"

namespace rvseg {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (schedule != "onecycle" && schedule != "constant") {
    throw ConfigError("train.schedule must be 'onecycle' or 'constant', got '" + schedule + "'");
  }
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RVSEG_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

namespace {

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.total) && std::isfinite(l.seg) && std::isfinite(l.gas) && std::isfinite(l.rdc);
}

void add(LossBreakdown& a, const LossBreakdown& b) {
  a.total += b.total;
  a.seg += b.seg;
  a.gas += b.gas;
  a.rdc += b.rdc;
}

void scale(LossBreakdown& a, double s) {
  a.total *= s;
  a.seg *= s;
  a.gas *= s;
  a.rdc *= s;
}

}  // namespace

LossBreakdown evaluate_loss(const Model<float>& model, std::span<const Sample<float>> data,
                            std::uint64_t seed, int threads) {
  const int n = static_cast<int>(data.size());
  std::vector<LossBreakdown> per(data.size());
  const int nt = resolve_threads(threads);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
  for (int i = 0; i < n; ++i) {
    per[i] = model.loss(data[i], derive_seed(seed, SeedPurpose::sample, {0xffffffffULL, static_cast<std::uint64_t>(i)}), nullptr);
  }
  LossBreakdown mean;
  for (const auto& l : per) add(mean, l);
  if (n > 0) scale(mean, 1.0 / n);
  return mean;
}

TrainHistory train(Model<float>& model, std::span<const Sample<float>> data, const TrainConfig& config,
                   std::uint64_t seed, int threads, const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (data.empty()) throw DataError("train: no training samples");
  const int nt = resolve_threads(threads);
  TrainHistory history;
  if (config.track_initial_loss) history.initial = evaluate_loss(model, data, seed, nt);

  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t batches = (n + bs - 1) / bs;
  const std::size_t total_steps = batches * static_cast<std::size_t>(config.epochs);
  AdamWConfig opt_cfg;
  opt_cfg.weight_decay = config.weight_decay;
  AdamW<float> opt(model.params(), opt_cfg);
  const bool onecycle = config.schedule == "onecycle" && config.learning_rate > 0.0;
  const OneCycleSchedule sched(onecycle ? config.learning_rate : 1.0, total_steps);

  std::vector<std::size_t> order(n);
  std::vector<GradBuffer<float>> grads(bs);
  for (auto& g : grads) g = make_grad_buffer(model.params());
  std::vector<LossBreakdown> losses(bs);
  std::size_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(seed, SeedPurpose::shuffle, {static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochLog log;
    log.epoch = epoch + 1;
    for (std::size_t b = 0; b < batches; ++b, ++step) {
      const std::size_t begin = b * bs;
      const int count = static_cast<int>(std::min(bs, n - begin));
      const Model<float>& cmodel = model;
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
      for (int k = 0; k < count; ++k) {
        for (auto& v : grads[k]) std::fill(v.begin(), v.end(), 0.0f);
        const std::uint64_t s = derive_seed(seed, SeedPurpose::sample,
                                            {static_cast<std::uint64_t>(epoch), b, static_cast<std::uint64_t>(k)});
        losses[k] = cmodel.loss(data[order[begin + k]], s, &grads[k]);
      }

      LossBreakdown batch_loss;
      for (int k = 0; k < count; ++k) {
        if (!finite(losses[k])) {
          std::ostringstream os;
          os << "non-finite loss at epoch " << epoch + 1 << ", batch " << b << " (sample "
             << order[begin + k] << "): total=" << losses[k].total << " seg=" << losses[k].seg
             << " gas=" << losses[k].gas << " rdc=" << losses[k].rdc;
          throw NumericError(os.str());
        }
        add(batch_loss, losses[k]);
      }
      add(log.mean, batch_loss);

      const float inv = 1.0f / static_cast<float>(count);
      auto& params = model.params();
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& g = params[p].grad;
        std::fill(g.begin(), g.end(), 0.0f);
        for (int k = 0; k < count; ++k) {
          const auto& src = grads[k][p];
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
        }
        for (auto& v : g) v *= inv;
      }
      const double lr = onecycle ? sched.lr(step) : config.learning_rate;
      opt.step(params, lr);
      log.lr_last = lr;
    }
    scale(log.mean, 1.0 / static_cast<double>(n));
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return history;
}

}  // namespace rvseg
