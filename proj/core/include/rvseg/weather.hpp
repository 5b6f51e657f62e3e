// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural labeled scenes and simplified adverse-weather corruption.
//
// Scenes are ray-cast from the origin over a ring x azimuth lattice against a
// ground plane, oriented boxes (vehicles, building walls) and vertical
// cylinders (poles). Weather corruption injects near-sensor scatter points,
// attenuates intensities, truncates range and drops points. The corruption
// models are directional stand-ins, not physical optics.

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "rvseg/projection.hpp"
#include "rvseg/rng.hpp"

namespace rvseg {

enum SceneClass : int { kUnlabeled = 0, kGround = 1, kVehicle = 2, kPole = 3, kBuilding = 4 };
inline constexpr int kDefaultNumClasses = 5;

std::string_view class_name(int id);

struct IntRange {
  int min = 0;
  int max = 0;
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct RealRange {
  double min = 0.0;
  double max = 0.0;
  friend bool operator==(const RealRange&, const RealRange&) = default;
};

struct SceneConfig {
  std::uint64_t seed = 0;
  int rings = 32;
  int azimuth_steps = 1024;
  double fov_up = deg_to_rad(10.0);
  double fov_down = deg_to_rad(20.0);
  double max_range = 60.0;
  bool ground = true;
  double ground_height = -1.73;
  IntRange vehicles{4, 10};
  IntRange poles{6, 14};
  IntRange buildings{3, 6};
  RealRange vehicle_distance{5.0, 30.0};
  RealRange pole_distance{4.0, 30.0};
  RealRange building_distance{14.0, 45.0};
  int num_classes = kDefaultNumClasses;
  double reflectance_jitter = 0.03;

  /// Throws ConfigError for K < 2, negative counts, a missing ground plane or
  /// a lattice without rays.
  void validate() const;
};

struct OrientedBox {
  double cx = 0, cy = 0, yaw = 0;
  double half_length = 1, half_width = 1;
  double z_min = 0, z_max = 1;
  int label = kVehicle;
  float reflectance = 0.5f;
};

struct VerticalCylinder {
  double cx = 0, cy = 0, radius = 0.2;
  double z_min = 0, z_max = 1;
  int label = kPole;
  float reflectance = 0.5f;
};

struct SceneLayout {
  bool has_ground = true;
  double ground_height = -1.73;
  float ground_reflectance = 0.12f;
  std::vector<OrientedBox> boxes;
  std::vector<VerticalCylinder> cylinders;
};

struct RayHit {
  double t = 0;
  int label = kUnlabeled;
  float reflectance = 0;
};

/// Samples primitive placement for a config.
SceneLayout build_layout(const SceneConfig& cfg, Rng& rng);

/// Nearest intersection along origin + t * dir with 0 < t <= max_range.
std::optional<RayHit> cast_ray(const SceneLayout& layout, double dx, double dy, double dz,
                               double max_range);

/// Unit direction of lattice ray (ring, step); ring 0 is the top ring.
void lattice_direction(const SceneConfig& cfg, int ring, int step, double& dx, double& dy,
                       double& dz);

/// Ray-casts a layout over the sensor lattice.
PointCloud render_layout(const SceneLayout& layout, const SceneConfig& cfg, Rng& rng);

/// Clean labeled scan; identical seeds give bit-identical clouds.
PointCloud generate_scene(const SceneConfig& cfg);

// ---------------------------------------------------------------------------

struct WeatherConfig {
  Condition condition = Condition::clean;
  double scatter_rate = 0.0;           // expected injected points per scan
  double scatter_scale = 4.0;          // exponential mean range, meters
  RealRange scatter_range{0.5, 15.0};  // truncation of the exponential
  double scatter_reflectance_max = 0.1;
  RealRange attenuation{1.0, 1.0};     // uniform multiplicative intensity factor
  double max_range = 0.0;              // <= 0 disables truncation
  double dropout_prob = 0.0;
  double fov_up = deg_to_rad(10.0);    // elevation band of injected points
  double fov_down = deg_to_rad(20.0);
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const WeatherConfig&, const WeatherConfig&) = default;
};

/// Documented presets. Fog truncates range hardest and attenuates most;
/// snow has the densest scatter; rain has sparse scatter and mild attenuation.
WeatherConfig weather_preset(Condition condition);
WeatherConfig weather_preset(std::string_view name);

/// Applies injection, attenuation, truncation and dropout in that order.
/// Coordinates and labels of surviving input points are never altered.
PointCloud corrupt(const PointCloud& pc, const WeatherConfig& w);

}  // namespace rvseg
