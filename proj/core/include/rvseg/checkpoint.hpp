// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Versioned binary checkpoint. The byte layout is documented in
// docs/checkpoint.md; all integers and floats are little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rvseg/errors.hpp"
#include "rvseg/model.hpp"
#include "rvseg/projection.hpp"

namespace rvseg {

inline constexpr char kCheckpointMagic[8] = {'R', 'V', 'S', 'E', 'G', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public DataError {
 public:
  enum class Kind { bad_magic, version_mismatch, checksum_mismatch, shape_mismatch, truncated, malformed };
  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TrainingMetadata {
  int epochs_completed = 0;
  std::uint64_t seed = 0;
  std::vector<double> loss_history;  // mean total loss per epoch
  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct Checkpoint {
  ModelConfig model_config;
  ProjectionConfig projection;
  InputStats input_stats;
  TrainingMetadata metadata;
  ParamList<float> params;

  /// Model with these parameter values.
  Model<float> make_model() const;
};

Checkpoint make_checkpoint(const Model<float>& model, const ProjectionConfig& projection,
                           const InputStats& stats, const TrainingMetadata& metadata);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rvseg
