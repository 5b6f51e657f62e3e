// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end stages: projection of scans into samples, training, per-condition
// evaluation on the original points, the ablation harness and the resolution
// sweep, plus the file-level commands behind the CLI.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rvseg/checkpoint.hpp"
#include "rvseg/config.hpp"
#include "rvseg/dataset.hpp"
#include "rvseg/metrics.hpp"
#include "rvseg/model.hpp"
#include "rvseg/trainer.hpp"

namespace rvseg {

using LogFn = std::function<void(const std::string&)>;

InputStats compute_input_stats(std::span<const PointCloud> clouds, const ProjectionConfig& projection);

Sample<float> make_sample(const PointCloud& pc, const ProjectionConfig& projection, const InputStats& stats,
                          int ignore_label = kIgnoreLabel);

struct PreparedData {
  InputStats stats;
  std::vector<Sample<float>> samples;
};

PreparedData prepare_training(std::span<const PointCloud> clouds, const ProjectionConfig& projection,
                              int ignore_label = kIgnoreLabel, int threads = 0);

struct TrainedModel {
  Checkpoint checkpoint;
  TrainHistory history;
  double seconds = 0.0;
};

/// Initializes a model from `seed` and trains it on prepared data with the
/// same seed driving shuffling and module noise.
TrainedModel train_model(const ModelConfig& model, const TrainConfig& train, const ProjectionConfig& projection,
                         const PreparedData& data, std::uint64_t seed, int threads = 0, const LogFn& log = {});

/// Point-level confusion matrix of a model over scans.
ConfusionMatrix evaluate_scans(const Model<float>& model, const InputStats& stats, const ProjectionConfig& projection,
                               std::span<const PointCloud> scans, int threads = 0);

struct ConditionRow {
  Condition condition = Condition::clean;
  std::size_t scans = 0;
  ConfusionMatrix matrix;
  double miou() const { return matrix.mean_iou(); }
};

struct ConditionReport {
  std::vector<ConditionRow> rows;

  const ConditionRow* find(Condition c) const;
  /// Mean mIoU over the non-clean rows; NaN if there are none.
  double corrupted_average() const;
};

ConditionReport condition_report(const Model<float>& model, const InputStats& stats,
                                 const ProjectionConfig& projection, std::span<const EvalSet> sets, int threads = 0);
ConditionReport condition_report(const Checkpoint& ckpt, std::span<const EvalSet> sets, int threads = 0);

/// Long format, header `condition,class,iou`. Each condition lists its
/// classes and a `mean` row; undefined IoUs are left empty.
std::string report_csv(const ConditionReport& report);
std::string report_json(const ConditionReport& report);

struct AblationRun {
  Variant variant = Variant::full;
  std::uint64_t seed = 0;
  std::size_t parameters = 0;
  double train_seconds = 0.0;
  double initial_seg_loss = 0.0;
  double final_seg_loss = 0.0;
  ConditionReport report;
};

struct AblationTable {
  std::vector<Condition> conditions;
  std::vector<AblationRun> runs;

  std::vector<Variant> variants() const;
  /// Seed-mean mIoU of a variant under a condition.
  double mean_miou(Variant v, Condition c) const;
  double mean_corrupted(Variant v) const;
  /// One line per monotonicity expectation (full >= each single-module
  /// variant on the corrupted average), prefixed OK or FLAG.
  std::vector<std::string> monotonic_checks() const;
};

AblationTable run_ablation(const RunConfig& config, const Dataset& data, std::span<const Variant> variants,
                           std::span<const std::uint64_t> seeds, int threads = 0, const LogFn& log = {});

/// Seed-mean table: one row per variant with toggle columns, a column per
/// condition and the corrupted average (mIoU in percent).
std::string ablation_csv(const AblationTable& table);
/// Every (variant, seed) run with per-condition mIoU.
std::string ablation_runs_csv(const AblationTable& table);

struct SweepRow {
  int width = 0;
  double clean_miou = 0.0;
  double corrupted_miou = 0.0;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

std::vector<SweepRow> resolution_sweep(const RunConfig& config, const Dataset& data, std::span<const int> widths,
                                       int threads = 0, const LogFn& log = {});
std::string sweep_csv(std::span<const SweepRow> rows);

// ---------------------------------------------------------------------------
// File-level commands

void cmd_gen_data(const RunConfig& config, const std::filesystem::path& out_dir, int threads = 0,
                  const LogFn& log = {});
void cmd_train(const RunConfig& config, const std::filesystem::path& data_dir, const std::filesystem::path& out_dir,
               int threads = 0, const LogFn& log = {});
ConditionReport cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir,
                         const std::filesystem::path& out_dir, int threads = 0, const LogFn& log = {});
void cmd_project(const std::filesystem::path& scan, const std::optional<std::filesystem::path>& labels,
                 const ProjectionConfig& projection, const std::filesystem::path& out_dir, const LogFn& log = {});
void cmd_inspect(const std::filesystem::path& checkpoint, const std::filesystem::path& scan,
                 const std::filesystem::path& out_dir, const LogFn& log = {});
AblationTable cmd_ablate(const RunConfig& config, const std::filesystem::path& data_dir,
                         const std::filesystem::path& out_dir, int threads = 0, const LogFn& log = {});
std::vector<SweepRow> cmd_sweep(const RunConfig& config, const std::filesystem::path& data_dir,
                                const std::filesystem::path& out_dir, int threads = 0, const LogFn& log = {});

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace rvseg
