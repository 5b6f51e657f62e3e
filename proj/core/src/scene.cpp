// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rvseg/errors.hpp"
#include "rvseg/weather.hpp"

namespace rvseg {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kPlacementAttempts = 40;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, IntRange r) {
  return std::uniform_int_distribution<int>(r.min, r.max)(rng);
}

struct Footprint {
  double x, y, radius;
};

bool overlaps(const std::vector<Footprint>& placed, const Footprint& f) {
  for (const auto& p : placed) {
    const double dx = p.x - f.x, dy = p.y - f.y;
    if (std::sqrt(dx * dx + dy * dy) < p.radius + f.radius + 0.5) return true;
  }
  return false;
}

// Slab test in the box frame; returns the entry distance when the ray
// starts outside the box.
std::optional<double> intersect_box(const OrientedBox& b, double dx, double dy, double dz) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  // Ray origin (0,0,0) and direction expressed in the box frame.
  const double ox = c * (-b.cx) + s * (-b.cy);
  const double oy = -s * (-b.cx) + c * (-b.cy);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  const double o[3] = {ox, oy, 0.0};
  const double d[3] = {lx, ly, dz};
  const double lo[3] = {-b.half_length, -b.half_width, b.z_min};
  const double hi[3] = {b.half_length, b.half_width, b.z_max};
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < lo[k] || o[k] > hi[k]) return std::nullopt;
      continue;
    }
    double t0 = (lo[k] - o[k]) / d[k];
    double t1 = (hi[k] - o[k]) / d[k];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit || t_enter <= 0.0) return std::nullopt;
  return t_enter;
}

std::optional<double> intersect_cylinder(const VerticalCylinder& cyl, double dx, double dy,
                                         double dz) {
  std::optional<double> best;
  auto consider = [&best](double t) {
    if (t > 0.0 && (!best || t < *best)) best = t;
  };
  const double ox = -cyl.cx, oy = -cyl.cy;
  const double a = dx * dx + dy * dy;
  if (a > 1e-15) {
    const double b = 2.0 * (ox * dx + oy * dy);
    const double c = ox * ox + oy * oy - cyl.radius * cyl.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        const double z = t * dz;
        if (z >= cyl.z_min && z <= cyl.z_max) {
          consider(t);
          break;
        }
      }
    }
  }
  if (std::abs(dz) > 1e-15) {
    for (double zc : {cyl.z_min, cyl.z_max}) {
      const double t = zc / dz;
      const double px = t * dx - cyl.cx, py = t * dy - cyl.cy;
      if (px * px + py * py <= cyl.radius * cyl.radius) consider(t);
    }
  }
  return best;
}

}  // namespace

std::string_view class_name(int id) {
  switch (id) {
    case kUnlabeled: return "unlabeled";
    case kGround: return "ground";
    case kVehicle: return "vehicle";
    case kPole: return "pole";
    case kBuilding: return "building";
    default: return "class";
  }
}

void SceneConfig::validate() const {
  if (num_classes < 2) throw ConfigError("scene.num_classes must be >= 2");
  if (num_classes < kBuilding + 1) {
    throw ConfigError("scene.num_classes must cover ground, vehicle, pole and building (>= 5)");
  }
  if (!ground) throw ConfigError("scene must contain a ground plane");
  for (const IntRange* r : {&vehicles, &poles, &buildings}) {
    if (r->min < 0 || r->max < r->min) throw ConfigError("scene primitive counts must be 0 <= min <= max");
  }
  if (rings < 1 || azimuth_steps < 1) throw ConfigError("scene lattice needs rings >= 1 and azimuth_steps >= 1");
  if (!(fov_up > 0.0) || !(fov_down > 0.0)) throw ConfigError("scene field of view must be positive");
  if (!(max_range > 0.0)) throw ConfigError("scene.max_range must be positive");
  if (!(ground_height < 0.0)) throw ConfigError("scene.ground_height must be below the sensor");
  if (reflectance_jitter < 0.0) throw ConfigError("scene.reflectance_jitter must be >= 0");
}

SceneLayout build_layout(const SceneConfig& cfg, Rng& rng) {
  SceneLayout layout;
  layout.has_ground = cfg.ground;
  layout.ground_height = cfg.ground_height;
  layout.ground_reflectance = static_cast<float>(uniform(rng, 0.08, 0.18));
  std::vector<Footprint> placed;

  auto place = [&](RealRange dist, double radius, double& x, double& y) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const double r = uniform(rng, dist.min, dist.max);
      const double a = uniform(rng, -kPi, kPi);
      const Footprint f{r * std::sin(a), r * std::cos(a), radius};
      if (!overlaps(placed, f)) {
        placed.push_back(f);
        x = f.x;
        y = f.y;
        return true;
      }
    }
    return false;
  };

  const int n_buildings = uniform_int(rng, cfg.buildings);
  for (int i = 0; i < n_buildings; ++i) {
    OrientedBox b;
    b.label = kBuilding;
    b.half_length = uniform(rng, 4.0, 12.0);
    b.half_width = 0.3;
    b.z_min = cfg.ground_height;
    b.z_max = cfg.ground_height + uniform(rng, 4.0, 10.0);
    b.reflectance = static_cast<float>(uniform(rng, 0.22, 0.35));
    if (!place(cfg.building_distance, b.half_length, b.cx, b.cy)) continue;
    // Walls roughly face the sensor.
    b.yaw = std::atan2(b.cy, b.cx) + kPi / 2 + uniform(rng, -0.3, 0.3);
    layout.boxes.push_back(b);
  }
  const int n_vehicles = uniform_int(rng, cfg.vehicles);
  for (int i = 0; i < n_vehicles; ++i) {
    OrientedBox b;
    b.label = kVehicle;
    b.half_length = uniform(rng, 1.8, 2.4);
    b.half_width = uniform(rng, 0.8, 1.0);
    b.z_min = cfg.ground_height;
    b.z_max = cfg.ground_height + uniform(rng, 1.4, 1.9);
    b.yaw = uniform(rng, -kPi, kPi);
    b.reflectance = static_cast<float>(uniform(rng, 0.6, 0.9));
    if (!place(cfg.vehicle_distance, b.half_length, b.cx, b.cy)) continue;
    layout.boxes.push_back(b);
  }
  const int n_poles = uniform_int(rng, cfg.poles);
  for (int i = 0; i < n_poles; ++i) {
    VerticalCylinder c;
    c.radius = uniform(rng, 0.1, 0.25);
    c.z_min = cfg.ground_height;
    c.z_max = cfg.ground_height + uniform(rng, 3.0, 7.0);
    c.reflectance = static_cast<float>(uniform(rng, 0.4, 0.55));
    if (!place(cfg.pole_distance, c.radius, c.cx, c.cy)) continue;
    layout.cylinders.push_back(c);
  }
  return layout;
}

std::optional<RayHit> cast_ray(const SceneLayout& layout, double dx, double dy, double dz,
                               double max_range) {
  std::optional<RayHit> best;
  auto consider = [&](double t, int label, float refl) {
    if (t > 0.0 && t <= max_range && (!best || t < best->t)) best = RayHit{t, label, refl};
  };
  if (layout.has_ground && dz < 0.0) {
    consider(layout.ground_height / dz, kGround, layout.ground_reflectance);
  }
  for (const auto& b : layout.boxes) {
    if (auto t = intersect_box(b, dx, dy, dz)) consider(*t, b.label, b.reflectance);
  }
  for (const auto& c : layout.cylinders) {
    if (auto t = intersect_cylinder(c, dx, dy, dz)) consider(*t, c.label, c.reflectance);
  }
  return best;
}

void lattice_direction(const SceneConfig& cfg, int ring, int step, double& dx, double& dy,
                       double& dz) {
  const double total = cfg.fov_up + cfg.fov_down;
  const double elevation = cfg.fov_up - (ring + 0.5) * total / cfg.rings;
  // Chosen so that atan2(x, y) lands at the centre of azimuth column `step`.
  const double azimuth = kPi * (1.0 - 2.0 * (step + 0.5) / cfg.azimuth_steps);
  const double ce = std::cos(elevation);
  dx = std::sin(azimuth) * ce;
  dy = std::cos(azimuth) * ce;
  dz = std::sin(elevation);
}

PointCloud render_layout(const SceneLayout& layout, const SceneConfig& cfg, Rng& rng) {
  PointCloud pc;
  pc.condition = Condition::clean;
  pc.reserve(static_cast<std::size_t>(cfg.rings) * cfg.azimuth_steps);
  std::normal_distribution<double> jitter(0.0, 1.0);
  for (int ring = 0; ring < cfg.rings; ++ring) {
    for (int step = 0; step < cfg.azimuth_steps; ++step) {
      double dx, dy, dz;
      lattice_direction(cfg, ring, step, dx, dy, dz);
      const auto hit = cast_ray(layout, dx, dy, dz, cfg.max_range);
      if (!hit) continue;
      const double refl = std::clamp(hit->reflectance + cfg.reflectance_jitter * jitter(rng), 0.0, 1.0);
      pc.push_back(static_cast<float>(hit->t * dx), static_cast<float>(hit->t * dy),
                   static_cast<float>(hit->t * dz), static_cast<float>(refl), hit->label);
    }
  }
  return pc;
}

PointCloud generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng layout_rng(derive_seed(cfg.seed, SeedPurpose::scene, {0}));
  Rng jitter_rng(derive_seed(cfg.seed, SeedPurpose::scene, {1}));
  const SceneLayout layout = build_layout(cfg, layout_rng);
  return render_layout(layout, cfg, jitter_rng);
}

}  // namespace rvseg
