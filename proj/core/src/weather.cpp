// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rvseg/errors.hpp"
#include "rvseg/weather.hpp"

namespace rvseg {

void WeatherConfig::validate() const {
  if (scatter_rate < 0.0) throw ConfigError("weather.scatter_rate must be >= 0");
  if (!(scatter_scale > 0.0)) throw ConfigError("weather.scatter_scale must be positive");
  if (!(scatter_range.min > 0.0) || scatter_range.max < scatter_range.min) {
    throw ConfigError("weather.scatter_range must satisfy 0 < min <= max");
  }
  if (scatter_reflectance_max < 0.0 || scatter_reflectance_max > 1.0) {
    throw ConfigError("weather.scatter_reflectance_max must lie in [0, 1]");
  }
  if (attenuation.min < 0.0 || attenuation.max < attenuation.min) {
    throw ConfigError("weather.attenuation must satisfy 0 <= min <= max");
  }
  if (dropout_prob < 0.0 || dropout_prob > 1.0) {
    throw ConfigError("weather.dropout_prob must lie in [0, 1]");
  }
  if (!(fov_up > 0.0) || !(fov_down > 0.0)) throw ConfigError("weather field of view must be positive");
}

WeatherConfig weather_preset(Condition condition) {
  WeatherConfig w;
  w.condition = condition;
  switch (condition) {
    case Condition::clean:
      break;
    case Condition::fog:
      w.scatter_rate = 250.0;
      w.scatter_scale = 3.0;
      w.attenuation = {0.30, 0.50};
      w.max_range = 30.0;
      w.dropout_prob = 0.10;
      break;
    case Condition::rain:
      w.scatter_rate = 400.0;
      w.scatter_scale = 5.0;
      w.attenuation = {0.65, 0.85};
      w.max_range = 50.0;
      w.dropout_prob = 0.05;
      break;
    case Condition::snow:
      w.scatter_rate = 1500.0;
      w.scatter_scale = 4.0;
      w.attenuation = {0.50, 0.75};
      w.max_range = 40.0;
      w.dropout_prob = 0.10;
      break;
  }
  return w;
}

WeatherConfig weather_preset(std::string_view name) { return weather_preset(parse_condition(name)); }

PointCloud corrupt(const PointCloud& pc, const WeatherConfig& w) {
  w.validate();
  Rng rng(w.seed);
  const std::size_t n_in = pc.size();

  std::poisson_distribution<long> count_dist(w.scatter_rate);
  const long injected = w.scatter_rate > 0.0 ? count_dist(rng) : 0;

  PointCloud staged;
  staged.reserve(n_in + static_cast<std::size_t>(injected));
  for (std::size_t i = 0; i < n_in; ++i) {
    staged.push_back(pc.x[i], pc.y[i], pc.z[i], pc.r[i], pc.has_labels() ? pc.labels[i] : kIgnoreLabel);
  }

  // (i) scatter: truncated exponential range, uniform azimuth, elevation
  // uniform inside the sensor band.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double span = w.scatter_range.max - w.scatter_range.min;
  const double tail = 1.0 - std::exp(-span / w.scatter_scale);
  for (long k = 0; k < injected; ++k) {
    const double range = w.scatter_range.min - w.scatter_scale * std::log(1.0 - unit(rng) * tail);
    const double azimuth = std::numbers::pi * (2.0 * unit(rng) - 1.0);
    const double elevation = -w.fov_down + unit(rng) * (w.fov_up + w.fov_down);
    const double refl = unit(rng) * w.scatter_reflectance_max;
    const double ce = std::cos(elevation);
    staged.push_back(static_cast<float>(range * std::sin(azimuth) * ce),
                     static_cast<float>(range * std::cos(azimuth) * ce),
                     static_cast<float>(range * std::sin(elevation)), static_cast<float>(refl),
                     kIgnoreLabel);
  }

  // (ii) attenuation of the original returns.
  const bool attenuate = !(w.attenuation.min == 1.0 && w.attenuation.max == 1.0);
  if (attenuate) {
    std::uniform_real_distribution<double> factor(w.attenuation.min, w.attenuation.max);
    for (std::size_t i = 0; i < n_in; ++i) {
      const double f = w.attenuation.min == w.attenuation.max ? w.attenuation.min : factor(rng);
      staged.r[i] = static_cast<float>(std::clamp(staged.r[i] * f, 0.0, 1.0));
    }
  }

  // (iii) range truncation and (iv) dropout.
  std::bernoulli_distribution drop(w.dropout_prob);
  PointCloud out;
  out.condition = w.condition;
  out.reserve(staged.size());
  for (std::size_t i = 0; i < staged.size(); ++i) {
    if (w.max_range > 0.0) {
      const double d = std::sqrt(static_cast<double>(staged.x[i]) * staged.x[i] +
                                 static_cast<double>(staged.y[i]) * staged.y[i] +
                                 static_cast<double>(staged.z[i]) * staged.z[i]);
      if (d > w.max_range) continue;
    }
    if (w.dropout_prob > 0.0 && drop(rng)) continue;
    out.push_back(staged.x[i], staged.y[i], staged.z[i], staged.r[i], staged.labels[i]);
  }
  return out;
}

}  // namespace rvseg
