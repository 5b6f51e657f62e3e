// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Run configuration. Files are JSON documents; every field is optional and
// falls back to its default, unknown keys are rejected. Angles are given in
// degrees in files and held in radians in memory. See docs/config.md.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rvseg/model.hpp"
#include "rvseg/projection.hpp"
#include "rvseg/trainer.hpp"
#include "rvseg/weather.hpp"

namespace rvseg {

struct DataConfig {
  SceneConfig scene;  // `seed` is overridden per generated scene
  int train_scenes = 64;
  int eval_scenes = 8;  // base scenes, each evaluated under every condition

  void validate() const;
};

struct EvalConfig {
  std::vector<Condition> conditions{Condition::clean, Condition::fog, Condition::rain, Condition::snow};
  std::vector<int> sweep_widths{128, 256, 512};

  void validate() const;
};

struct SeedConfig {
  std::uint64_t data = 1;
  std::uint64_t train = 1;
  std::vector<std::uint64_t> ablation{1, 2, 3};
};

struct RunConfig {
  ProjectionConfig projection;
  DataConfig scene;
  std::map<Condition, WeatherConfig> weather;  // fog, rain, snow; defaults to the presets
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  SeedConfig seeds;
  std::string output_dir = "runs";

  RunConfig();
  /// Cross-section checks on top of each section's own validation.
  void validate() const;
  /// Weather parameters for a condition; identity for clean.
  WeatherConfig weather_for(Condition c) const;
};

/// Parses and validates a config document. Throws ConfigError naming the
/// offending key.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Full document with every field spelled out.
std::string run_config_to_json(const RunConfig& config, int indent = 2);

/// Canonical compact JSON of the model and projection sections, used inside
/// checkpoints. Angles stay in radians so the round trip is exact.
std::string model_section_to_json(const ModelConfig& model, const ProjectionConfig& projection);
void model_section_from_json(std::string_view json_text, ModelConfig& model, ProjectionConfig& projection);

}  // namespace rvseg
