// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rvseg/errors.hpp"
#include "rvseg/kitti_io.hpp"
#include "rvseg/rng.hpp"
#include "rvseg/trainer.hpp"
#include "rvseg/weather.hpp"

namespace rvseg {

using nlohmann::json;

std::string manifest_to_json(const Manifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"split", e.split},
                       {"points", e.points},
                       {"labels", e.labels},
                       {"seed", e.seed},
                       {"weather_seed", e.weather_seed},
                       {"base_scene", e.base_scene},
                       {"condition", std::string(to_string(e.condition))},
                       {"num_points", e.num_points}});
  }
  return json{{"format_version", m.format_version}, {"entries", entries}}.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    Manifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != 1) throw DataError("unsupported manifest format_version " + std::to_string(m.format_version));
    for (const auto& e : j.at("entries")) {
      ManifestEntry x;
      x.split = e.at("split").get<std::string>();
      if (x.split != "train" && x.split != "eval") throw DataError("manifest entry has unknown split '" + x.split + "'");
      x.points = e.at("points").get<std::string>();
      x.labels = e.at("labels").get<std::string>();
      x.seed = e.at("seed").get<std::uint64_t>();
      x.weather_seed = e.at("weather_seed").get<std::uint64_t>();
      x.base_scene = e.at("base_scene").get<int>();
      x.condition = parse_condition(e.at("condition").get<std::string>());
      x.num_points = e.at("num_points").get<std::size_t>();
      m.entries.push_back(std::move(x));
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

void check_training_protocol(const Manifest& m) {
  for (const auto& e : m.entries) {
    if (e.split == "train" && e.condition != Condition::clean) {
      throw DataError("training data must be clean-weather only; '" + e.points + "' is tagged '" +
                      std::string(to_string(e.condition)) + "'");
    }
  }
}

namespace {

std::string scan_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", i);
  return buf;
}

}  // namespace

Dataset generate_dataset(const RunConfig& config, int threads) {
  config.validate();
  const int nt = resolve_threads(threads);
  const int n_train = config.scene.train_scenes;
  const int n_eval = config.scene.eval_scenes;
  const auto& conds = config.eval.conditions;
  const int n_cond = static_cast<int>(conds.size());
  const std::uint64_t base = config.seeds.data;

  Dataset d;
  d.train.resize(n_train);
  std::vector<std::uint64_t> train_seeds(n_train);
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
  for (int i = 0; i < n_train; ++i) {
    SceneConfig sc = config.scene.scene;
    sc.seed = derive_seed(base, SeedPurpose::scene, {0, static_cast<std::uint64_t>(i)});
    train_seeds[i] = sc.seed;
    d.train[i] = generate_scene(sc);
  }

  d.eval.resize(n_cond);
  for (int c = 0; c < n_cond; ++c) {
    d.eval[c].condition = conds[c];
    d.eval[c].scans.resize(n_eval);
  }
  std::vector<std::uint64_t> eval_seeds(n_eval);
  std::vector<std::vector<std::uint64_t>> weather_seeds(n_eval, std::vector<std::uint64_t>(n_cond));
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
  for (int j = 0; j < n_eval; ++j) {
    SceneConfig sc = config.scene.scene;
    sc.seed = derive_seed(base, SeedPurpose::scene, {1, static_cast<std::uint64_t>(j)});
    eval_seeds[j] = sc.seed;
    const PointCloud clean = generate_scene(sc);
    for (int c = 0; c < n_cond; ++c) {
      WeatherConfig w = config.weather_for(conds[c]);
      w.seed = derive_seed(base, SeedPurpose::weather,
                           {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(conds[c])});
      weather_seeds[j][c] = w.seed;
      d.eval[c].scans[j] = conds[c] == Condition::clean ? clean : corrupt(clean, w);
    }
  }

  for (int i = 0; i < n_train; ++i) {
    const std::string stem = "train/" + scan_name(i);
    d.manifest.entries.push_back({"train", stem + ".bin", stem + ".label", train_seeds[i], 0, i,
                                  Condition::clean, d.train[i].size()});
  }
  for (int c = 0; c < n_cond; ++c) {
    for (int j = 0; j < n_eval; ++j) {
      const std::string stem = "eval/" + std::string(to_string(conds[c])) + "/" + scan_name(j);
      const std::uint64_t ws = conds[c] == Condition::clean ? 0 : weather_seeds[j][c];
      d.manifest.entries.push_back({"eval", stem + ".bin", stem + ".label", eval_seeds[j], ws, j, conds[c],
                                    d.eval[c].scans[j].size()});
    }
  }
  return d;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  namespace fs = std::filesystem;
  std::size_t k = 0;
  auto write_one = [&](const PointCloud& pc) {
    const auto& e = data.manifest.entries.at(k++);
    const fs::path bin = dir / e.points;
    fs::create_directories(bin.parent_path());
    write_kitti_points(bin, pc);
    write_kitti_labels(dir / e.labels, pc.labels);
  };
  for (const auto& pc : data.train) write_one(pc);
  for (const auto& set : data.eval) {
    for (const auto& pc : set.scans) write_one(pc);
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest in '" + dir.string() + "'");
  out << manifest_to_json(data.manifest);
}

Dataset load_dataset(const std::filesystem::path& dir, Splits splits) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw DataError("no manifest.json in '" + dir.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  Dataset d;
  d.manifest = manifest_from_json(ss.str());
  for (const auto& e : d.manifest.entries) {
    const bool want = splits == Splits::all || (splits == Splits::train) == (e.split == "train");
    if (!want) continue;
    PointCloud pc = read_kitti_scan(dir / e.points, dir / e.labels);
    pc.condition = e.condition;
    if (pc.size() != e.num_points) {
      throw DataError("'" + e.points + "' has " + std::to_string(pc.size()) + " points, manifest says " +
                      std::to_string(e.num_points));
    }
    if (e.split == "train") {
      d.train.push_back(std::move(pc));
      continue;
    }
    auto it = std::find_if(d.eval.begin(), d.eval.end(), [&](const EvalSet& s) { return s.condition == e.condition; });
    if (it == d.eval.end()) {
      d.eval.push_back({e.condition, {}});
      it = std::prev(d.eval.end());
    }
    it->scans.push_back(std::move(pc));
  }
  return d;
}

}  // namespace rvseg
