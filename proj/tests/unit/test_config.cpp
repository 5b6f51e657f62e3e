// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/config.hpp"

#include <gtest/gtest.h>

#include "rvseg/errors.hpp"

namespace rvseg {
namespace {

std::string error_of(std::string_view text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(RunConfig, DefaultsAreValidAndEmptyDocumentGivesDefaults) {
  RunConfig d;
  EXPECT_NO_THROW(d.validate());
  const auto parsed = parse_run_config("{}");
  EXPECT_EQ(run_config_to_json(parsed), run_config_to_json(d));
  EXPECT_EQ(parsed.model.stem_channels, 32);
  EXPECT_EQ(parsed.model.widths, (std::array<int, 3>{32, 48, 64}));
  EXPECT_EQ(parsed.model.rdc.slots, 64);
  EXPECT_EQ(parsed.train.epochs, 30);
  EXPECT_EQ(parsed.train.batch_size, 4);
  EXPECT_DOUBLE_EQ(parsed.train.learning_rate, 0.0025);
  EXPECT_EQ(parsed.weather.size(), 3u);
  EXPECT_EQ(parsed.weather.at(Condition::fog), weather_preset(Condition::fog));
}

TEST(RunConfig, JsonRoundTripIsStable) {
  auto text = std::string(R"({"projection": {"width": 256, "fov_up_deg": 12.5},
    "model": {"stem_channels": 8, "use_gas": false, "rdc": {"slots": 7, "temperature": 0.25}},
    "train": {"epochs": 2, "schedule": "constant"},
    "weather": {"fog": {"max_range": 25.0}},
    "eval": {"conditions": ["clean", "snow"], "sweep_widths": [64]},
    "seeds": {"ablation": [4, 5]}, "output_dir": "out"})");
  const auto a = parse_run_config(text);
  EXPECT_EQ(a.projection.width, 256);
  EXPECT_DOUBLE_EQ(a.projection.fov_up, deg_to_rad(12.5));
  EXPECT_EQ(a.model.stem_channels, 8);
  EXPECT_FALSE(a.model.use_gas);
  EXPECT_EQ(a.model.rdc.slots, 7);
  EXPECT_EQ(a.train.schedule, "constant");
  EXPECT_EQ(a.weather.at(Condition::fog).max_range, 25.0);
  EXPECT_EQ(a.weather.at(Condition::fog).scatter_rate, weather_preset(Condition::fog).scatter_rate);
  EXPECT_EQ(a.eval.conditions, (std::vector<Condition>{Condition::clean, Condition::snow}));
  EXPECT_EQ(a.seeds.ablation, (std::vector<std::uint64_t>{4, 5}));
  const auto dumped = run_config_to_json(a);
  const auto b = parse_run_config(dumped);
  EXPECT_EQ(run_config_to_json(b), dumped);
  EXPECT_EQ(b.model, a.model);
}

TEST(RunConfig, UnknownKeysAreRejectedWithTheirPath) {
  EXPECT_NE(error_of(R"({"modle": {}})").find("modle"), std::string::npos);
  const auto nested = error_of(R"({"model": {"gas": {"gama": 0.1}}})");
  EXPECT_NE(nested.find("model.gas.gama"), std::string::npos) << nested;
  EXPECT_NE(error_of(R"({"weather": {"hail": {}}})").find("weather.hail"), std::string::npos);
}

TEST(RunConfig, TypeAndRangeErrorsNameTheKey) {
  EXPECT_NE(error_of(R"({"projection": {"width": "wide"}})").find("projection.width"), std::string::npos);
  EXPECT_NE(error_of(R"({"model": {"widths": [1, 2]}})").find("model.widths"), std::string::npos);
  EXPECT_NE(error_of(R"({"train": {"epochs": 1.5}})").find("train.epochs"), std::string::npos);
  EXPECT_FALSE(error_of(R"({"projection": {"width": 130}})").empty());
  EXPECT_FALSE(error_of(R"({"model": {"num_classes": 4}})").empty());
  EXPECT_FALSE(error_of(R"({"eval": {"conditions": ["clean", "clean"]}})").empty());
  EXPECT_FALSE(error_of(R"({"eval": {"conditions": ["drizzle"]}})").empty());
  EXPECT_FALSE(error_of(R"({"model": {"use_ref_branch": false}})").empty());
  EXPECT_FALSE(error_of("{not json").empty());
  EXPECT_FALSE(error_of("[]").empty());
}

TEST(RunConfig, WeatherForCarriesTheSensorBand) {
  RunConfig c;
  c.scene.scene.fov_up = deg_to_rad(5.0);
  const auto clean = c.weather_for(Condition::clean);
  EXPECT_EQ(clean.scatter_rate, 0.0);
  EXPECT_EQ(clean.dropout_prob, 0.0);
  EXPECT_DOUBLE_EQ(c.weather_for(Condition::snow).fov_up, deg_to_rad(5.0));
}

TEST(ModelSection, RoundTripIsExactInRadians) {
  ModelConfig m;
  m.gas.gamma = 0.1 + 0.2;  // not representable as a short decimal
  m.rdc.temperature = 1.0 / 3.0;
  ProjectionConfig p;
  p.fov_up = deg_to_rad(7.3);
  const auto text = model_section_to_json(m, p);
  ModelConfig m2;
  ProjectionConfig p2;
  model_section_from_json(text, m2, p2);
  EXPECT_EQ(m2, m);
  EXPECT_EQ(p2.fov_up, p.fov_up);
  EXPECT_EQ(p2.fov_down, p.fov_down);
  EXPECT_EQ(model_section_to_json(m2, p2), text);
  EXPECT_THROW(model_section_from_json(R"({"model": {}})", m2, p2), ConfigError);
}

}  // namespace
}  // namespace rvseg
