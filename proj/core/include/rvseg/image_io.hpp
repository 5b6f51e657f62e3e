// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal binary Netpbm writers for diagnostic images.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rvseg {

/// 8-bit grayscale (P5).
void write_pgm(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> pixels);

/// 8-bit RGB (P6), pixels interleaved.
void write_ppm(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> rgb);

/// Linear map of values in [lo, hi] to [0, 255]; masked-out pixels become 0.
std::vector<std::uint8_t> to_gray(std::span<const float> values, double lo, double hi,
                                  std::span<const std::uint8_t> valid = {});

/// Distinct color for each index; index < 0 is black.
std::array<std::uint8_t, 3> palette_color(int index);

}  // namespace rvseg
