// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rvseg/grad_check.hpp"
#include "test_util.hpp"

namespace rvseg {
namespace {

using testing::dot;
using testing::random_map;
using testing::random_mask;
using testing::random_vector;

template <typename T>
FeatureMap<T> naive_conv(const FeatureMap<T>& in, const std::vector<T>& w, const std::vector<T>& b, int out_c,
                         int stride) {
  const int oh = (in.height() + stride - 1) / stride;
  const int ow = (in.width() + stride - 1) / stride;
  FeatureMap<T> out(out_c, oh, ow);
  for (int o = 0; o < out_c; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = b[o];
        for (int i = 0; i < in.channels(); ++i) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int sy = y * stride + ky - 1;
              const int sx = x * stride + kx - 1;
              if (sy < 0 || sx < 0 || sy >= in.height() || sx >= in.width()) continue;
              acc += static_cast<double>(w[((o * in.channels() + i) * 3 + ky) * 3 + kx]) * in.at(i, sy, sx);
            }
          }
        }
        out.at(o, y, x) = static_cast<T>(acc);
      }
    }
  }
  return out;
}

TEST(Conv3x3, MatchesDirectLoopStride1) {
  Rng rng(1);
  const auto in = random_map<double>(3, 5, 7, rng);
  const auto w = random_vector<double>(4 * 3 * 9, rng);
  const auto b = random_vector<double>(4, rng);
  const auto got = kernels::conv3x3<double>(in, w, b, 4, 1);
  const auto want = naive_conv(in, w, b, 4, 1);
  ASSERT_TRUE(got.same_shape(want));
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Conv3x3, MatchesDirectLoopStride2OddSize) {
  Rng rng(2);
  const auto in = random_map<float>(2, 7, 9, rng);
  const auto w = random_vector<float>(3 * 2 * 9, rng);
  const auto b = random_vector<float>(3, rng);
  const auto got = kernels::conv3x3<float>(in, w, b, 3, 2);
  const auto want = naive_conv(in, w, b, 3, 2);
  EXPECT_EQ(got.height(), 4);
  EXPECT_EQ(got.width(), 5);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-5);
}

TEST(Conv3x3, RejectsBadWeightSize) {
  FeatureMap<float> in(2, 4, 4);
  std::vector<float> w(10), b(3);
  EXPECT_THROW(kernels::conv3x3<float>(in, w, b, 3, 1), std::invalid_argument);
  std::vector<float> w_ok(3 * 2 * 9);
  EXPECT_THROW(kernels::conv3x3<float>(in, w_ok, b, 3, 3), std::invalid_argument);
}

TEST(LinearPixelwise, MatchesDirectLoop) {
  Rng rng(3);
  const auto in = random_map<double>(3, 2, 3, rng);
  const auto w = random_vector<double>(2 * 3, rng);
  const auto b = random_vector<double>(2, rng);
  const auto out = kernels::linear_pixelwise<double>(in, w, b, 2);
  for (int o = 0; o < 2; ++o) {
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 3; ++x) {
        double acc = b[o];
        for (int i = 0; i < 3; ++i) acc += w[o * 3 + i] * in.at(i, y, x);
        EXPECT_NEAR(out.at(o, y, x), acc, 1e-14);
      }
    }
  }
}

TEST(LeakyRelu, SlopeAndSubgradientAtZero) {
  FeatureMap<double> in(1, 1, 3);
  in[0] = -2.0;
  in[1] = 0.0;
  in[2] = 3.0;
  const auto out = kernels::leaky_relu(in, 0.1);
  EXPECT_DOUBLE_EQ(out[0], -0.2);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
  EXPECT_DOUBLE_EQ(out[2], 3.0);
  FeatureMap<double> g(1, 1, 3, 1.0), gin(1, 1, 3);
  kernels::leaky_relu_backward(in, 0.1, g, gin);
  EXPECT_DOUBLE_EQ(gin[0], 0.1);
  EXPECT_DOUBLE_EQ(gin[1], 1.0);
  EXPECT_DOUBLE_EQ(gin[2], 1.0);
}

TEST(Softmax, SumsToOneAndIsShiftStable) {
  Rng rng(4);
  auto logits = random_map<double>(5, 3, 4, rng, -3, 3);
  logits[0] = 800.0;  // would overflow without max subtraction
  const auto p = kernels::softmax_channel(logits);
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    double s = 0.0;
    for (int c = 0; c < 5; ++c) s += p[c * p.pixels() + i];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_NEAR(p[0], 1.0, 1e-12);
}

TEST(Upsample, RepeatsEachPixelTwice) {
  FeatureMap<float> in(1, 1, 2);
  in[0] = 1.f;
  in[1] = 2.f;
  const auto out = kernels::upsample_nearest2x(in);
  ASSERT_EQ(out.height(), 2);
  ASSERT_EQ(out.width(), 4);
  const float want[] = {1, 1, 2, 2, 1, 1, 2, 2};
  for (int i = 0; i < 8; ++i) EXPECT_EQ(out[i], want[i]);
}

TEST(ChannelStats, HandComputedValues) {
  FeatureMap<double> f(2, 1, 5);
  const double a[] = {1, 2, 3, 4, 100};
  for (int i = 0; i < 5; ++i) {
    f.at(0, 0, i) = a[i];
    f.at(1, 0, i) = 7.0;
  }
  ValidMask m(1, 5, true);
  m.set(4, false);
  const auto s = kernels::channel_stats(f, m);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.5);
  EXPECT_NEAR(s.std[0], std::sqrt(1.25), 1e-15);
  EXPECT_DOUBLE_EQ(s.mean[1], 7.0);
  EXPECT_DOUBLE_EQ(s.std[1], kernels::kStdFloor);
}

TEST(ChannelStats, EmptyMaskThrows) {
  FeatureMap<float> f(1, 2, 2);
  ValidMask m(2, 2, false);
  EXPECT_THROW(kernels::channel_stats(f, m), std::invalid_argument);
}

TEST(Normalize, RoundTripsThroughDenormalize) {
  Rng rng(5);
  const auto f = random_map<double>(3, 4, 4, rng, -5, 5);
  const auto m = random_mask(4, 4, rng);
  const auto s = kernels::channel_stats(f, m);
  const auto n = kernels::normalize_channels(f, s, m);
  const auto back = kernels::denormalize_channels(n, s, m);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < f.pixels(); ++i) {
      if (m[i]) {
        EXPECT_NEAR(back[c * f.pixels() + i], f[c * f.pixels() + i], 1e-12);
      } else {
        EXPECT_EQ(n[c * f.pixels() + i], 0.0);
      }
    }
  }
  const auto ns = kernels::channel_stats(n, m);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(ns.mean[c], 0.0, 1e-12);
    EXPECT_NEAR(ns.std[c], 1.0, 1e-12);
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  FeatureMap<double> logits(2, 2, 2);
  std::vector<int> targets{0, 1, 1, 0};
  ValidMask include(2, 2, true);
  const auto r = kernels::cross_entropy<double>(logits, targets, include);
  EXPECT_NEAR(r.loss, std::numbers::ln2, 1e-15);
  EXPECT_EQ(r.counted, 4u);
  // d/dz = (p - onehot) / N
  EXPECT_NEAR(r.grad.at(0, 0, 0), (0.5 - 1.0) / 4, 1e-15);
  EXPECT_NEAR(r.grad.at(1, 0, 0), 0.5 / 4, 1e-15);
}

TEST(CrossEntropy, ExcludedPixelsAndErrors) {
  FeatureMap<double> logits(3, 1, 3);
  ValidMask include(1, 3, true);
  include.set(2, false);
  std::vector<int> targets{0, 2, 99};
  const auto r = kernels::cross_entropy<double>(logits, targets, include);
  EXPECT_EQ(r.counted, 2u);
  EXPECT_EQ(r.grad.at(0, 0, 2), 0.0);
  std::vector<int> bad{0, 5, 0};
  EXPECT_THROW(kernels::cross_entropy<double>(logits, bad, include), std::invalid_argument);
  ValidMask none(1, 3, false);
  EXPECT_THROW(kernels::cross_entropy<double>(logits, targets, none), std::invalid_argument);
}

TEST(Argmax, SkipsExcludedChannel) {
  FeatureMap<float> logits(3, 1, 1);
  logits[0] = 5.f;
  logits[1] = 1.f;
  logits[2] = 2.f;
  EXPECT_EQ(kernels::argmax_channel(logits)[0], 0);
  EXPECT_EQ(kernels::argmax_channel(logits, 0)[0], 2);
}

TEST(OrderedSum, MatchesNaiveSumOnIntegers) {
  std::vector<double> v(10000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 17);
  double s = 0.0;
  for (double x : v) s += x;
  EXPECT_EQ(kernels::ordered_sum(v), s);
}

// ---------------------------------------------------------------------------
// Finite-difference checks at double precision.

constexpr double kTol = 1e-4;

TEST(KernelGradients, Linear) {
  Rng rng(10);
  auto in = random_map<double>(3, 4, 4, rng);
  auto w = random_vector<double>(2 * 3, rng);
  auto b = random_vector<double>(2, rng);
  const auto gout = random_map<double>(2, 4, 4, rng);
  FeatureMap<double> gin(3, 4, 4);
  std::vector<double> gw(w.size()), gb(b.size());
  kernels::linear_pixelwise_backward<double>(in, w, 2, gout, &gin, gw, gb);
  auto loss = [&] { return dot(gout, kernels::linear_pixelwise<double>(in, w, b, 2)); };
  std::vector<GradCheckTarget> t{{"in", in.values(), gin.values()}, {"w", w, gw}, {"b", b, gb}};
  const auto r = grad_check(loss, t);
  EXPECT_TRUE(r.passed(kTol)) << r.summary();
}

TEST(KernelGradients, ConvStride1And2) {
  for (int stride : {1, 2}) {
    Rng rng(11 + stride);
    auto in = random_map<double>(2, 5, 6, rng);
    auto w = random_vector<double>(3 * 2 * 9, rng);
    auto b = random_vector<double>(3, rng);
    const auto out = kernels::conv3x3<double>(in, w, b, 3, stride);
    const auto gout = random_map<double>(3, out.height(), out.width(), rng);
    FeatureMap<double> gin(2, 5, 6);
    std::vector<double> gw(w.size()), gb(b.size());
    kernels::conv3x3_backward<double>(in, w, 3, stride, gout, &gin, gw, gb);
    auto loss = [&] { return dot(gout, kernels::conv3x3<double>(in, w, b, 3, stride)); };
    std::vector<GradCheckTarget> t{{"in", in.values(), gin.values()}, {"w", w, gw}, {"b", b, gb}};
    const auto r = grad_check(loss, t);
    EXPECT_TRUE(r.passed(kTol)) << "stride " << stride << ": " << r.summary();
  }
}

TEST(KernelGradients, LeakyAwayFromKink) {
  Rng rng(12);
  auto in = random_map<double>(2, 3, 3, rng);
  for (auto& v : in.values()) v += v >= 0 ? 0.1 : -0.1;
  const auto gout = random_map<double>(2, 3, 3, rng);
  FeatureMap<double> gin(2, 3, 3);
  kernels::leaky_relu_backward(in, 0.1, gout, gin);
  auto loss = [&] { return dot(gout, kernels::leaky_relu(in, 0.1)); };
  std::vector<GradCheckTarget> t{{"in", in.values(), gin.values()}};
  EXPECT_TRUE(grad_check(loss, t).passed(kTol));
}

TEST(KernelGradients, Softmax) {
  Rng rng(13);
  auto logits = random_map<double>(4, 3, 3, rng, -2, 2);
  const auto gout = random_map<double>(4, 3, 3, rng);
  FeatureMap<double> glog(4, 3, 3);
  kernels::softmax_channel_backward(kernels::softmax_channel(logits), gout, glog);
  auto loss = [&] { return dot(gout, kernels::softmax_channel(logits)); };
  std::vector<GradCheckTarget> t{{"logits", logits.values(), glog.values()}};
  EXPECT_TRUE(grad_check(loss, t).passed(kTol));
}

TEST(KernelGradients, Upsample) {
  Rng rng(14);
  auto in = random_map<double>(2, 2, 3, rng);
  const auto gout = random_map<double>(2, 4, 6, rng);
  FeatureMap<double> gin(2, 2, 3);
  kernels::upsample_nearest2x_backward(gout, gin);
  auto loss = [&] { return dot(gout, kernels::upsample_nearest2x(in)); };
  std::vector<GradCheckTarget> t{{"in", in.values(), gin.values()}};
  EXPECT_TRUE(grad_check(loss, t).passed(kTol));
}

TEST(KernelGradients, ChannelStats) {
  Rng rng(15);
  auto f = random_map<double>(3, 4, 4, rng, -2, 2);
  const auto m = random_mask(4, 4, rng);
  const auto wm = random_vector<double>(3, rng);
  const auto ws = random_vector<double>(3, rng);
  const auto s = kernels::channel_stats(f, m);
  FeatureMap<double> gf(3, 4, 4);
  kernels::channel_stats_backward<double>(f, m, s, wm, ws, gf);
  auto loss = [&] {
    const auto st = kernels::channel_stats(f, m);
    double l = 0.0;
    for (int c = 0; c < 3; ++c) l += wm[c] * st.mean[c] + ws[c] * st.std[c];
    return l;
  };
  std::vector<GradCheckTarget> t{{"f", f.values(), gf.values()}};
  const auto r = grad_check(loss, t);
  EXPECT_TRUE(r.passed(kTol)) << r.summary();
}

TEST(KernelGradients, CrossEntropy) {
  Rng rng(16);
  auto logits = random_map<double>(3, 4, 4, rng, -2, 2);
  std::vector<int> targets(16);
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<int>(i % 3);
  const auto m = random_mask(4, 4, rng);
  const auto r0 = kernels::cross_entropy<double>(logits, targets, m);
  auto loss = [&] { return static_cast<double>(kernels::cross_entropy<double>(logits, targets, m).loss); };
  std::vector<GradCheckTarget> t{{"logits", logits.values(), r0.grad.values()}};
  EXPECT_TRUE(grad_check(loss, t).passed(kTol));
}

}  // namespace
}  // namespace rvseg
