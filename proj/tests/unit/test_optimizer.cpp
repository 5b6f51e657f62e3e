// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace rvseg {
namespace {

ParamList<double> two_params() {
  ParamList<double> p;
  p.add("w", ParamRole::weight, {2});
  p.add("b", ParamRole::bias, {1});
  p[0].value = {1.0, -2.0};
  p[1].value = {0.5};
  p[0].grad = {0.1, -0.3};
  p[1].grad = {2.0};
  return p;
}

TEST(AdamW, ZeroLearningRateLeavesParametersUnchanged) {
  auto p = two_params();
  const auto before = p;
  AdamW<double> opt(p, {});
  for (int i = 0; i < 5; ++i) opt.step(p, 0.0);
  EXPECT_EQ(p[0].value, before[0].value);
  EXPECT_EQ(p[1].value, before[1].value);
  EXPECT_EQ(opt.steps(), 5u);
}

TEST(AdamW, FirstStepMatchesHandComputation) {
  auto p = two_params();
  AdamWConfig cfg;
  cfg.weight_decay = 0.01;
  AdamW<double> opt(p, cfg);
  const double lr = 0.1;
  opt.step(p, lr);
  // Step 1: bias-corrected m = g and v = g^2, so the update is lr * g / (|g| + eps).
  auto expect = [&](double w, double g, bool decay) {
    if (decay) w -= lr * 0.01 * w;
    return w - lr * g / (std::abs(g) + 1e-8);
  };
  EXPECT_NEAR(p[0].value[0], expect(1.0, 0.1, true), 1e-15);
  EXPECT_NEAR(p[0].value[1], expect(-2.0, -0.3, true), 1e-15);
  EXPECT_NEAR(p[1].value[0], expect(0.5, 2.0, false), 1e-15);
}

TEST(AdamW, SecondStepMatchesHandComputation) {
  auto p = two_params();
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW<double> opt(p, cfg);
  opt.step(p, 0.01);
  const double w1 = p[0].value[0];
  p[0].grad[0] = -0.2;
  opt.step(p, 0.01);
  const double m = 0.9 * 0.1 * 0.1 + 0.1 * -0.2;  // m1 = 0.1 * 0.1
  const double v = 0.999 * (0.001 * 0.01) + 0.001 * 0.04;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0].value[0], w1 - 0.01 * mh / (std::sqrt(vh) + 1e-8), 1e-15);
}

TEST(AdamW, BiasesAreNotDecayed) {
  auto p = two_params();
  p[0].grad = {0.0, 0.0};
  p[1].grad = {0.0};
  AdamWConfig cfg;
  cfg.weight_decay = 0.5;
  AdamW<double> opt(p, cfg);
  opt.step(p, 0.1);
  EXPECT_DOUBLE_EQ(p[0].value[0], 1.0 * (1 - 0.05));
  EXPECT_DOUBLE_EQ(p[0].value[1], -2.0 * (1 - 0.05));
  EXPECT_EQ(p[1].value[0], 0.5);
}

TEST(OneCycle, HandComputedPoints) {
  OneCycleSchedule s(0.01, 101, 0.3, 25.0, 100.0);
  EXPECT_EQ(s.warmup_steps(), 30u);
  EXPECT_DOUBLE_EQ(s.lr(0), 0.01 / 25);
  EXPECT_DOUBLE_EQ(s.lr(15), 0.01 / 25 + (0.01 - 0.01 / 25) * 0.5);
  EXPECT_DOUBLE_EQ(s.lr(30), 0.01);
  // Halfway through the cosine phase the rate sits midway between peak and floor.
  EXPECT_NEAR(s.lr(65), 0.5 * (0.01 + 0.01 / 100), 1e-15);
  EXPECT_NEAR(s.lr(100), 0.01 / 100, 1e-15);
  EXPECT_NEAR(s.lr(1000), 0.01 / 100, 1e-15);
}

TEST(OneCycle, MonotoneUpThenDown) {
  OneCycleSchedule s(1.0, 50);
  for (std::size_t i = 1; i <= s.warmup_steps(); ++i) EXPECT_GT(s.lr(i), s.lr(i - 1));
  for (std::size_t i = s.warmup_steps() + 1; i < 50; ++i) EXPECT_LT(s.lr(i), s.lr(i - 1));
}

TEST(OneCycle, RejectsBadArguments) {
  EXPECT_THROW(OneCycleSchedule(0.0, 10), std::invalid_argument);
  EXPECT_THROW(OneCycleSchedule(1.0, 0), std::invalid_argument);
  EXPECT_THROW(OneCycleSchedule(1.0, 10, 1.5), std::invalid_argument);
  EXPECT_NO_THROW(OneCycleSchedule(1.0, 1).lr(0));
}

}  // namespace
}  // namespace rvseg
