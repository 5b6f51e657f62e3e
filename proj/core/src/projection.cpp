// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/projection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rvseg/errors.hpp"
#include "rvseg/kernels.hpp"

namespace rvseg {

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::clean: return "clean";
    case Condition::fog: return "fog";
    case Condition::rain: return "rain";
    case Condition::snow: return "snow";
  }
  return "unknown";
}

Condition parse_condition(std::string_view name) {
  if (name == "clean") return Condition::clean;
  if (name == "fog") return Condition::fog;
  if (name == "rain") return Condition::rain;
  if (name == "snow") return Condition::snow;
  throw ConfigError("unknown condition '" + std::string(name) + "'");
}

void PointCloud::reserve(std::size_t n) {
  x.reserve(n);
  y.reserve(n);
  z.reserve(n);
  r.reserve(n);
  labels.reserve(n);
}

void PointCloud::push_back(float px, float py, float pz, float pr, int label) {
  x.push_back(px);
  y.push_back(py);
  z.push_back(pz);
  r.push_back(pr);
  labels.push_back(label);
}

void PointCloud::validate() const {
  const std::size_t n = x.size();
  if (y.size() != n || z.size() != n || r.size() != n) {
    throw DataError("point cloud coordinate arrays differ in length");
  }
  if (!labels.empty() && labels.size() != n) {
    throw DataError("point cloud has " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(n) + " points");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]) || !std::isfinite(z[i])) {
      throw DataError("point " + std::to_string(i) + " has a non-finite coordinate");
    }
    if (!(r[i] >= 0.f && r[i] <= 1.f)) {
      throw DataError("point " + std::to_string(i) + " reflectance outside [0, 1]");
    }
  }
}

void ProjectionConfig::validate() const {
  if (width < 1 || height < 1) throw ConfigError("projection width and height must be >= 1");
  if (!(fov_up > 0.0) || !(fov_down > 0.0)) {
    throw ConfigError("projection fov_up and fov_down must be positive");
  }
  if (fov_up > std::numbers::pi / 2 || fov_down > std::numbers::pi / 2) {
    throw ConfigError("projection field-of-view limits must not exceed 90 degrees");
  }
}

std::size_t RangeImage::retained() const {
  return static_cast<std::size_t>(
      std::count_if(point_pixel.begin(), point_pixel.end(), [](const PixelCoord& p) { return p.valid(); }));
}

PixelCoord project_point(double x, double y, double z, const ProjectionConfig& cfg) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) return {};
  const double d = std::sqrt(x * x + y * y + z * z);
  if (d == 0.0) return {};
  const double elevation = std::asin(std::clamp(z / d, -1.0, 1.0));
  if (elevation < -cfg.fov_down || elevation > cfg.fov_up) return {};
  const double u = 0.5 * (1.0 - std::atan2(x, y) / std::numbers::pi) * cfg.width;
  const double v = (1.0 - (elevation + cfg.fov_down) / cfg.total_fov()) * cfg.height;
  PixelCoord p;
  p.u = std::clamp(static_cast<int>(std::floor(u)), 0, cfg.width - 1);
  p.v = std::clamp(static_cast<int>(std::floor(v)), 0, cfg.height - 1);
  return p;
}

RangeImage project(const PointCloud& pc, const ProjectionConfig& cfg) {
  cfg.validate();
  if (pc.empty()) throw DataError("project: point cloud is empty");
  const std::size_t n = pc.size();
  const int h = cfg.height;
  const int w = cfg.width;

  RangeImage img;
  img.channels = FeatureMap<float>(RangeImage::kChannels, h, w);
  img.valid = ValidMask(h, w, false);
  img.winner.assign(static_cast<std::size_t>(h) * w, -1);
  img.point_pixel.assign(n, PixelCoord{});
  std::vector<double> depth(n, 0.0);

  // Per-point work is independent; the z-buffer merge below is serial in
  // point order so the result does not depend on the thread count.
#ifdef RVSEG_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const double x = pc.x[i], y = pc.y[i], z = pc.z[i];
    img.point_pixel[i] = project_point(x, y, z, cfg);
    depth[i] = std::sqrt(x * x + y * y + z * z);
  }

  std::vector<double> best(static_cast<std::size_t>(h) * w, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const PixelCoord p = img.point_pixel[i];
    if (!p.valid()) {
      if (!std::isfinite(pc.x[i]) || !std::isfinite(pc.y[i]) || !std::isfinite(pc.z[i])) {
        ++img.diagnostics.non_finite;
      } else if (depth[i] == 0.0) {
        ++img.diagnostics.zero_range;
      } else {
        ++img.diagnostics.out_of_fov;
      }
      continue;
    }
    const std::size_t pix = static_cast<std::size_t>(p.v) * w + p.u;
    if (img.winner[pix] < 0 || depth[i] < best[pix]) {
      img.winner[pix] = static_cast<std::int32_t>(i);
      best[pix] = depth[i];
    }
  }

  const std::size_t plane = img.channels.pixels();
  float* ch = img.channels.data();
  for (std::size_t pix = 0; pix < plane; ++pix) {
    const std::int32_t i = img.winner[pix];
    if (i < 0) continue;
    img.valid.set(pix, true);
    ch[RangeImage::kX * plane + pix] = pc.x[i];
    ch[RangeImage::kY * plane + pix] = pc.y[i];
    ch[RangeImage::kZ * plane + pix] = pc.z[i];
    ch[RangeImage::kDepth * plane + pix] = static_cast<float>(best[pix]);
    ch[RangeImage::kIntensity * plane + pix] = pc.r[i];
  }
  return img;
}

std::vector<int> backproject_labels(const RangeImage& img, std::span<const int> pixel_labels,
                                    int ignore) {
  if (pixel_labels.size() != img.channels.pixels()) {
    throw std::invalid_argument("backproject_labels: label grid has " +
                                std::to_string(pixel_labels.size()) + " entries, image has " +
                                std::to_string(img.channels.pixels()) + " pixels");
  }
  std::vector<int> out(img.point_pixel.size(), ignore);
  const int w = img.width();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const PixelCoord p = img.point_pixel[i];
    if (p.valid()) out[i] = pixel_labels[static_cast<std::size_t>(p.v) * w + p.u];
  }
  return out;
}

std::vector<int> pixel_labels(const RangeImage& img, const PointCloud& pc, int ignore) {
  std::vector<int> out(img.winner.size(), ignore);
  if (!pc.has_labels()) return out;
  for (std::size_t pix = 0; pix < out.size(); ++pix) {
    if (img.winner[pix] >= 0) out[pix] = pc.labels[img.winner[pix]];
  }
  return out;
}

void InputStatsAccumulator::add(const RangeImage& img) {
  const std::size_t plane = img.channels.pixels();
  const float* ch = img.channels.data();
  for (int c = 0; c < RangeImage::kChannels; ++c) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t pix = 0; pix < plane; ++pix) {
      if (!img.valid[pix]) continue;
      const double v = ch[c * plane + pix];
      s += v;
      s2 += v * v;
    }
    sum_[c] += s;
    sum_sq_[c] += s2;
  }
  count_ += img.valid.count();
}

InputStats InputStatsAccumulator::finish() const {
  if (count_ == 0) throw DataError("input statistics: no valid pixels in training split");
  InputStats s;
  const double n = static_cast<double>(count_);
  for (int c = 0; c < RangeImage::kChannels; ++c) {
    const double mean = sum_[c] / n;
    const double var = std::max(0.0, sum_sq_[c] / n - mean * mean);
    s.mean[c] = static_cast<float>(mean);
    s.std[c] = static_cast<float>(std::max(std::sqrt(var), kernels::kStdFloor));
  }
  return s;
}

template <typename T>
InputPlanes<T> make_input_planes(const RangeImage& img, const InputStats& stats) {
  const int h = img.height();
  const int w = img.width();
  InputPlanes<T> planes;
  planes.geo = FeatureMap<T>(4, h, w);
  planes.ref = FeatureMap<T>(1, h, w);
  planes.valid = img.valid;
  const std::size_t plane = img.channels.pixels();
  const float* ch = img.channels.data();
  for (std::size_t pix = 0; pix < plane; ++pix) {
    if (!img.valid[pix]) continue;
    for (int c = 0; c < 4; ++c) {
      planes.geo.data()[c * plane + pix] =
          static_cast<T>((ch[c * plane + pix] - stats.mean[c]) / stats.std[c]);
    }
    planes.ref.data()[pix] = static_cast<T>(
        (ch[RangeImage::kIntensity * plane + pix] - stats.mean[RangeImage::kIntensity]) /
        stats.std[RangeImage::kIntensity]);
  }
  return planes;
}

template InputPlanes<float> make_input_planes<float>(const RangeImage&, const InputStats&);
template InputPlanes<double> make_input_planes<double>(const RangeImage&, const InputStats&);

}  // namespace rvseg
