// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/projection.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "rvseg/errors.hpp"
#include "rvseg/rng.hpp"

namespace rvseg {
namespace {

ProjectionConfig small_config() {
  ProjectionConfig c;
  c.width = 64;
  c.height = 16;
  return c;
}

TEST(ProjectPoint, HandComputedPixels) {
  const auto c = small_config();  // fov +10 / -20 degrees
  // Straight ahead: azimuth 0 -> u = W/2; elevation 0 -> v = floor(H * 10/30).
  EXPECT_EQ(project_point(0, 5, 0, c), (PixelCoord{32, 5}));
  // +x is a quarter turn: atan2(1, 0) = pi/2 -> u = W/4.
  EXPECT_EQ(project_point(5, 0, 0, c).u, 16);
  EXPECT_EQ(project_point(-5, 0, 0, c).u, 48);
  // Directly behind: atan2(+0, -1) = pi -> u = 0; atan2(-0, -1) = -pi -> u = W, clamped.
  EXPECT_EQ(project_point(0.0, -5, 0, c).u, 0);
  EXPECT_EQ(project_point(-0.0, -5, 0, c).u, 63);
}

TEST(ProjectPoint, ElevationBandEdges) {
  const auto c = small_config();
  const double up = c.fov_up - 1e-9;
  const double down = c.fov_down - 1e-9;
  // Just inside the upper edge: v = 0.
  const auto top = project_point(0, std::cos(up), std::sin(up), c);
  ASSERT_TRUE(top.valid());
  EXPECT_EQ(top.v, 0);
  // Just inside the lower edge: v rounds down to H - 1.
  const auto bottom = project_point(0, std::cos(-down), std::sin(-down), c);
  ASSERT_TRUE(bottom.valid());
  EXPECT_EQ(bottom.v, 15);
  EXPECT_FALSE(project_point(0, std::cos(up + 1e-6), std::sin(up + 1e-6), c).valid());
  EXPECT_FALSE(project_point(0, std::cos(-down - 1e-6), std::sin(-down - 1e-6), c).valid());
}

TEST(ProjectPoint, DegenerateInputs) {
  const auto c = small_config();
  EXPECT_FALSE(project_point(0, 0, 0, c).valid());
  EXPECT_FALSE(project_point(std::numeric_limits<double>::quiet_NaN(), 1, 0, c).valid());
  EXPECT_FALSE(project_point(std::numeric_limits<double>::infinity(), 1, 0, c).valid());
}

TEST(Project, NearestDepthWinsAndTiesKeepLowerIndex) {
  const auto c = small_config();
  PointCloud pc;
  pc.push_back(0, 10, 0, 0.1f, 1);
  pc.push_back(0, 5, 0, 0.2f, 2);   // same ray, nearer
  pc.push_back(0, 5, 0, 0.3f, 3);   // exact tie with index 1
  pc.push_back(0, 20, 0, 0.4f, 4);
  const auto img = project(pc, c);
  const std::size_t pix = 5 * 64 + 32;
  EXPECT_EQ(img.winner[pix], 1);
  EXPECT_FLOAT_EQ(img.channels.at(RangeImage::kDepth, 5, 32), 5.0f);
  EXPECT_FLOAT_EQ(img.channels.at(RangeImage::kIntensity, 5, 32), 0.2f);
  // Occluded points are retained: each still knows its pixel, so
  // back-projection reaches all of them.
  EXPECT_EQ(img.retained(), 4u);
  EXPECT_EQ(img.valid.count(), 1u);
  for (const auto& p : img.point_pixel) EXPECT_TRUE(p.valid());
}

TEST(Project, CountsEveryDropReason) {
  const auto c = small_config();
  PointCloud pc;
  pc.push_back(0, 0, 0, 0.f, 1);                  // zero range
  pc.push_back(0, 1, 5, 0.f, 1);                  // far above the band
  pc.push_back(0, 1, -5, 0.f, 1);                 // far below
  pc.x.push_back(std::numeric_limits<float>::quiet_NaN());  // non-finite, bypassing push_back checks
  pc.y.push_back(1);
  pc.z.push_back(0);
  pc.r.push_back(0);
  pc.labels.push_back(1);
  pc.push_back(0, 3, 0, 0.5f, 2);
  const auto img = project(pc, c);
  EXPECT_EQ(img.diagnostics.zero_range, 1u);
  EXPECT_EQ(img.diagnostics.out_of_fov, 2u);
  EXPECT_EQ(img.diagnostics.non_finite, 1u);
  EXPECT_EQ(img.retained(), 1u);
}

TEST(Project, EmptyCloudIsRejected) {
  PointCloud pc;
  EXPECT_THROW(project(pc, small_config()), DataError);
}

// Independent oracle: the per-point formula written out again, then a
// brute-force grouping by pixel that keeps the minimum depth.
struct OracleResult {
  std::map<std::pair<int, int>, std::size_t> winner;
  std::size_t zero = 0, fov = 0;
};

OracleResult oracle(const PointCloud& pc, const ProjectionConfig& c) {
  OracleResult r;
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const double x = pc.x[i], y = pc.y[i], z = pc.z[i];
    const double d = std::sqrt(x * x + y * y + z * z);
    if (d == 0.0) {
      ++r.zero;
      continue;
    }
    const double pitch = std::asin(z / d);
    if (pitch > c.fov_up || pitch < -c.fov_down) {
      ++r.fov;
      continue;
    }
    double u = 0.5 * (1.0 - std::atan2(x, y) / std::numbers::pi) * c.width;
    double v = (1.0 - (pitch + c.fov_down) / (c.fov_up + c.fov_down)) * c.height;
    const int ui = std::min(std::max(static_cast<int>(std::floor(u)), 0), c.width - 1);
    const int vi = std::min(std::max(static_cast<int>(std::floor(v)), 0), c.height - 1);
    groups[{vi, ui}].push_back(i);
  }
  for (const auto& [pix, idx] : groups) {
    std::size_t best = idx[0];
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i : idx) {
      const double d = std::sqrt(static_cast<double>(pc.x[i]) * pc.x[i] + static_cast<double>(pc.y[i]) * pc.y[i] +
                                 static_cast<double>(pc.z[i]) * pc.z[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    r.winner[pix] = best;
  }
  return r;
}

TEST(Project, MatchesBruteForceOracleOnRandomPoints) {
  const auto c = small_config();
  Rng rng(2026);
  std::uniform_real_distribution<double> az(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> el(-c.fov_down, c.fov_up);
  std::uniform_real_distribution<double> range(1.0, 50.0);
  PointCloud pc;
  for (int i = 0; i < 10000; ++i) {
    const double a = az(rng), e = el(rng), d = range(rng);
    pc.push_back(static_cast<float>(d * std::cos(e) * std::sin(a)), static_cast<float>(d * std::cos(e) * std::cos(a)),
                 static_cast<float>(d * std::sin(e)), static_cast<float>(i % 100) / 100.f, 1 + i % 4);
  }
  // Exact duplicates exercise the tie rule; zero-range and out-of-band
  // points exercise the drop accounting.
  for (int i = 0; i < 50; ++i) pc.push_back(pc.x[i], pc.y[i], pc.z[i], 0.99f, 1);
  for (int i = 0; i < 7; ++i) pc.push_back(0, 0, 0, 0, 1);
  for (int i = 0; i < 11; ++i) pc.push_back(0, 1, 2.0f + i, 0, 1);

  const auto img = project(pc, c);
  const auto want = oracle(pc, c);
  EXPECT_EQ(img.diagnostics.zero_range, want.zero);
  EXPECT_EQ(img.diagnostics.out_of_fov, want.fov);
  EXPECT_EQ(img.valid.count(), want.winner.size());
  std::size_t checked = 0;
  for (int v = 0; v < c.height; ++v) {
    for (int u = 0; u < c.width; ++u) {
      const std::size_t pix = static_cast<std::size_t>(v) * c.width + u;
      auto it = want.winner.find({v, u});
      if (it == want.winner.end()) {
        EXPECT_FALSE(img.valid[pix]);
        EXPECT_EQ(img.winner[pix], -1);
        for (int ch = 0; ch < RangeImage::kChannels; ++ch) EXPECT_EQ(img.channels.at(ch, v, u), 0.f);
        continue;
      }
      const std::size_t i = it->second;
      ASSERT_TRUE(img.valid[pix]);
      ASSERT_EQ(img.winner[pix], static_cast<std::int32_t>(i)) << "pixel " << v << "," << u;
      EXPECT_EQ(img.channels.at(RangeImage::kX, v, u), pc.x[i]);
      EXPECT_EQ(img.channels.at(RangeImage::kY, v, u), pc.y[i]);
      EXPECT_EQ(img.channels.at(RangeImage::kZ, v, u), pc.z[i]);
      EXPECT_EQ(img.channels.at(RangeImage::kIntensity, v, u), pc.r[i]);
      ++checked;
    }
  }
  EXPECT_GT(checked, 500u);
}

TEST(Backproject, EveryPointGetsItsPixelLabel) {
  const auto c = small_config();
  PointCloud pc;
  pc.push_back(0, 5, 0, 0.f, 2);
  pc.push_back(0, 9, 0, 0.f, 3);  // hidden behind point 0
  pc.push_back(5, 0, 0, 0.f, 4);
  pc.push_back(0, 0, 0, 0.f, 1);  // dropped
  const auto img = project(pc, c);
  const auto gt = pixel_labels(img, pc);
  EXPECT_EQ(gt[5 * 64 + 32], 2);
  const auto back = backproject_labels(img, gt);
  EXPECT_EQ(back, (std::vector<int>{2, 2, 4, kIgnoreLabel}));
}

TEST(InputStats, StandardizesValidPixelsOnly) {
  const auto c = small_config();
  PointCloud pc;
  pc.push_back(0, 2, 0, 0.2f, 1);
  pc.push_back(4, 0, 0, 0.6f, 1);
  const auto img = project(pc, c);
  InputStatsAccumulator acc;
  acc.add(img);
  const auto s = acc.finish();
  EXPECT_FLOAT_EQ(s.mean[RangeImage::kDepth], 3.0f);
  EXPECT_FLOAT_EQ(s.std[RangeImage::kDepth], 1.0f);
  EXPECT_FLOAT_EQ(s.mean[RangeImage::kIntensity], 0.4f);
  const auto planes = make_input_planes<double>(img, s);
  double sum = 0.0;
  for (std::size_t i = 0; i < img.valid.pixels(); ++i) {
    if (!img.valid[i]) {
      EXPECT_EQ(planes.ref[i], 0.0);
    } else {
      sum += planes.geo.channel(3)[i];
    }
  }
  EXPECT_NEAR(sum, 0.0, 1e-6);
}

TEST(ProjectionConfig, RejectsBadValues) {
  ProjectionConfig c;
  c.width = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.fov_up = -c.fov_down - 0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace rvseg
