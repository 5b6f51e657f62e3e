// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Scene containers. A dataset directory holds one KITTI-style .bin/.label
// pair per scan and a manifest.json describing every scan (docs/formats.md).

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rvseg/config.hpp"
#include "rvseg/projection.hpp"

namespace rvseg {

struct ManifestEntry {
  std::string split;   // "train" or "eval"
  std::string points;  // path relative to the dataset directory
  std::string labels;
  std::uint64_t seed = 0;       // scene seed
  std::uint64_t weather_seed = 0;
  int base_scene = 0;
  Condition condition = Condition::clean;
  std::size_t num_points = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  int format_version = 1;
  std::vector<ManifestEntry> entries;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct EvalSet {
  Condition condition = Condition::clean;
  std::vector<PointCloud> scans;
};

struct Dataset {
  std::vector<PointCloud> train;
  std::vector<EvalSet> eval;  // one per condition, same base scenes in each
  Manifest manifest;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

/// Throws DataError if any training entry is not clean.
void check_training_protocol(const Manifest& m);

/// Generates clean training scenes and corrupted evaluation copies of the
/// evaluation scenes, deterministically from config.seeds.data.
Dataset generate_dataset(const RunConfig& config, int threads = 0);

void write_dataset(const std::filesystem::path& dir, const Dataset& data);

enum class Splits { train, eval, all };
Dataset load_dataset(const std::filesystem::path& dir, Splits splits = Splits::all);

}  // namespace rvseg
