// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// KITTI velodyne interchange: *.bin holds little-endian float32 (x, y, z, r)
// quadruples; *.label holds one little-endian uint32 per point whose low 16
// bits are the class id.

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "rvseg/projection.hpp"

namespace rvseg {

PointCloud read_kitti_points(const std::filesystem::path& path);
std::vector<int> read_kitti_labels(const std::filesystem::path& path);

/// Reads a scan and, when `label_path` is non-empty, its labels.
PointCloud read_kitti_scan(const std::filesystem::path& bin_path,
                           const std::filesystem::path& label_path = {});

void write_kitti_points(const std::filesystem::path& path, const PointCloud& pc);
void write_kitti_labels(const std::filesystem::path& path, std::span<const int> labels);

}  // namespace rvseg
