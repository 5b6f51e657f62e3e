// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "rvseg/errors.hpp"

namespace rvseg {

namespace {

void write_netpbm(const std::filesystem::path& path, const char* magic, int width, int height,
                  std::span<const std::uint8_t> data, std::size_t channels) {
  if (width <= 0 || height <= 0 || data.size() != static_cast<std::size_t>(width) * height * channels) {
    throw std::invalid_argument("netpbm: pixel buffer does not match " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write image '" + path.string() + "'");
  out << magic << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

}  // namespace

void write_pgm(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> pixels) {
  write_netpbm(path, "P5", width, height, pixels, 1);
}

void write_ppm(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> rgb) {
  write_netpbm(path, "P6", width, height, rgb, 3);
}

std::vector<std::uint8_t> to_gray(std::span<const float> values, double lo, double hi,
                                  std::span<const std::uint8_t> valid) {
  std::vector<std::uint8_t> out(values.size(), 0);
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    const double t = std::clamp((values[i] - lo) / span, 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::lround(t * 255.0));
  }
  return out;
}

std::array<std::uint8_t, 3> palette_color(int index) {
  if (index < 0) return {0, 0, 0};
  // Golden-angle hue walk, full saturation and value.
  const double h = std::fmod(index * 137.50776405, 360.0) / 60.0;
  const double x = 1.0 - std::fabs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = 1, g = x; break;
    case 1: r = x, g = 1; break;
    case 2: g = 1, b = x; break;
    case 3: g = x, b = 1; break;
    case 4: r = x, b = 1; break;
    default: r = 1, b = x; break;
  }
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(55.0 + 200.0 * v)); };
  return {q(r), q(g), q(b)};
}

}  // namespace rvseg
