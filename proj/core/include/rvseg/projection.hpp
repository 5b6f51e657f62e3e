// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Spherical range-view projection with a nearest-depth z-buffer.
//
//   u = floor(0.5 * (1 - atan2(x, y) / pi) * W)              clamped to [0, W-1]
//   v = floor((1 - (asin(z / d) + fov_down) / fov_total) * H) clamped to [0, H-1]
//
// fov_down is the magnitude of the downward limit, so retained points have
// elevation in the closed interval [-fov_down, fov_up]. The azimuth uses
// atan2(x, y) (x first); swapping the arguments only rotates the image.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvseg/tensor.hpp"

namespace rvseg {

/// Class id used for unlabeled points, empty pixels and injected noise.
inline constexpr int kIgnoreLabel = 0;

enum class Condition : std::uint8_t { clean = 0, fog = 1, rain = 2, snow = 3 };

std::string_view to_string(Condition c);
Condition parse_condition(std::string_view name);

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct PointCloud {
  std::vector<float> x;
  std::vector<float> y;
  std::vector<float> z;
  std::vector<float> r;
  std::vector<int> labels;  // empty when the cloud is unlabeled
  Condition condition = Condition::clean;

  std::size_t size() const { return x.size(); }
  bool empty() const { return x.empty(); }
  bool has_labels() const { return !labels.empty(); }

  void reserve(std::size_t n);
  void push_back(float px, float py, float pz, float pr, int label);
  /// Throws DataError on mismatched arrays, non-finite coordinates or
  /// reflectance outside [0, 1].
  void validate() const;
};

enum class TieBreak : std::uint8_t { nearest_depth };

struct ProjectionConfig {
  int width = 512;
  int height = 32;
  double fov_up = deg_to_rad(10.0);
  double fov_down = deg_to_rad(20.0);
  TieBreak tie_break = TieBreak::nearest_depth;

  double total_fov() const { return fov_up + fov_down; }
  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

struct PixelCoord {
  int u = -1;
  int v = -1;
  bool valid() const { return u >= 0 && v >= 0; }
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct ProjectionDiagnostics {
  std::size_t zero_range = 0;
  std::size_t out_of_fov = 0;
  std::size_t non_finite = 0;
  std::size_t dropped() const { return zero_range + out_of_fov + non_finite; }
};

struct RangeImage {
  enum Channel : int { kX = 0, kY = 1, kZ = 2, kDepth = 3, kIntensity = 4 };
  static constexpr int kChannels = 5;

  FeatureMap<float> channels;           // 5 x H x W, zero on empty pixels
  ValidMask valid;                      // H x W
  std::vector<std::int32_t> winner;     // point index per pixel, -1 when empty
  std::vector<PixelCoord> point_pixel;  // per input point, invalid when dropped
  ProjectionDiagnostics diagnostics;

  int height() const { return channels.height(); }
  int width() const { return channels.width(); }
  std::size_t retained() const;
};

/// Pixel of a single point; invalid PixelCoord when the point has zero
/// range, is non-finite, or lies outside the vertical field of view.
PixelCoord project_point(double x, double y, double z, const ProjectionConfig& cfg);

/// Projects a cloud; pixel collisions keep the smallest depth, exact depth
/// ties keep the lower point index.
RangeImage project(const PointCloud& pc, const ProjectionConfig& cfg);

/// Label of each point's pixel; dropped points get `ignore`.
std::vector<int> backproject_labels(const RangeImage& img, std::span<const int> pixel_labels,
                                    int ignore = kIgnoreLabel);

/// Ground-truth label of every pixel's winning point; `ignore` when empty.
std::vector<int> pixel_labels(const RangeImage& img, const PointCloud& pc,
                              int ignore = kIgnoreLabel);

/// Frozen per-channel standardization of the 5 range-image channels.
struct InputStats {
  std::array<float, RangeImage::kChannels> mean{};
  std::array<float, RangeImage::kChannels> std{1.f, 1.f, 1.f, 1.f, 1.f};

  static InputStats identity() { return {}; }
  friend bool operator==(const InputStats&, const InputStats&) = default;
};

/// Streams valid pixels of training images into population mean/std.
class InputStatsAccumulator {
 public:
  void add(const RangeImage& img);
  std::size_t count() const { return count_; }
  InputStats finish() const;

 private:
  std::array<double, RangeImage::kChannels> sum_{};
  std::array<double, RangeImage::kChannels> sum_sq_{};
  std::size_t count_ = 0;
};

template <typename T>
struct InputPlanes {
  FeatureMap<T> geo;  // x, y, z, depth
  FeatureMap<T> ref;  // intensity
  ValidMask valid;

  int height() const { return geo.height(); }
  int width() const { return geo.width(); }
};

/// Standardizes the channels with frozen statistics; empty pixels stay 0.
template <typename T>
InputPlanes<T> make_input_planes(const RangeImage& img, const InputStats& stats);

}  // namespace rvseg
