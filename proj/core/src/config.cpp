// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rvseg/errors.hpp"

namespace rvseg {

using nlohmann::json;

namespace {

double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }

// Typed, strict view of one JSON object. Every key read is recorded so that
// finish() can reject the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    auto it = j_.find(key);
    return Section(it == j_.end() ? empty : *it, join(key));
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void get(const std::string& key, int& out) { read(key, out, [](const json& v) { return v.is_number_integer(); }, "an integer"); }
  void get(const std::string& key, double& out) { read(key, out, [](const json& v) { return v.is_number(); }, "a number"); }
  void get(const std::string& key, bool& out) { read(key, out, [](const json& v) { return v.is_boolean(); }, "a boolean"); }
  void get(const std::string& key, std::string& out) { read(key, out, [](const json& v) { return v.is_string(); }, "a string"); }
  void get(const std::string& key, std::uint64_t& out) {
    read(key, out, [](const json& v) { return v.is_number_unsigned(); }, "a non-negative integer");
  }
  void get(const std::string& key, IntRange& out) {
    std::vector<int> v{out.min, out.max};
    get_pair(key, v, [](const json& x) { return x.is_number_integer(); });
    out = {v[0], v[1]};
  }
  void get(const std::string& key, RealRange& out) {
    std::vector<double> v{out.min, out.max};
    get_pair(key, v, [](const json& x) { return x.is_number(); });
    out = {v[0], v[1]};
  }
  void get_degrees(const std::string& key, double& radians) {
    double deg = rad_to_deg(radians);
    if (!has(key)) {
      seen_.insert(key);
      return;
    }
    get(key, deg);
    radians = deg_to_rad(deg);
  }
  template <typename V, typename Pred>
  void get_list(const std::string& key, std::vector<V>& out, Pred pred, const char* what) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_array()) throw ConfigError(join(key) + " must be an array of " + what);
    std::vector<V> v;
    for (const auto& e : *it) {
      if (!pred(e)) throw ConfigError(join(key) + " must be an array of " + what);
      v.push_back(e.template get<V>());
    }
    out = std::move(v);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + join(it.key()) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename V, typename Pred>
  void read(const std::string& key, V& out, Pred pred, const char* what) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!pred(*it)) throw ConfigError("'" + join(key) + "' must be " + what);
    out = it->template get<V>();
  }

  template <typename V, typename Pred>
  void get_pair(const std::string& key, std::vector<V>& v, Pred pred) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_array() || it->size() != 2 || !pred((*it)[0]) || !pred((*it)[1])) {
      throw ConfigError("'" + join(key) + "' must be a [min, max] pair");
    }
    v = {(*it)[0].template get<V>(), (*it)[1].template get<V>()};
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_projection(Section s, ProjectionConfig& p) {
  s.get("width", p.width);
  s.get("height", p.height);
  s.get_degrees("fov_up_deg", p.fov_up);
  s.get_degrees("fov_down_deg", p.fov_down);
  std::string tb = "nearest_depth";
  s.get("tie_break", tb);
  if (tb != "nearest_depth") throw ConfigError("'projection.tie_break' must be 'nearest_depth'");
  s.finish();
}

void read_scene(Section s, DataConfig& d) {
  auto& c = d.scene;
  s.get("train_scenes", d.train_scenes);
  s.get("eval_scenes", d.eval_scenes);
  s.get("rings", c.rings);
  s.get("azimuth_steps", c.azimuth_steps);
  s.get_degrees("fov_up_deg", c.fov_up);
  s.get_degrees("fov_down_deg", c.fov_down);
  s.get("max_range", c.max_range);
  s.get("ground_height", c.ground_height);
  s.get("vehicles", c.vehicles);
  s.get("poles", c.poles);
  s.get("buildings", c.buildings);
  s.get("vehicle_distance", c.vehicle_distance);
  s.get("pole_distance", c.pole_distance);
  s.get("building_distance", c.building_distance);
  s.get("reflectance_jitter", c.reflectance_jitter);
  s.finish();
}

void read_weather(Section s, WeatherConfig& w) {
  s.get("scatter_rate", w.scatter_rate);
  s.get("scatter_scale", w.scatter_scale);
  s.get("scatter_range", w.scatter_range);
  s.get("scatter_reflectance_max", w.scatter_reflectance_max);
  s.get("attenuation", w.attenuation);
  s.get("max_range", w.max_range);
  s.get("dropout_prob", w.dropout_prob);
  s.finish();
}

void read_model(Section s, ModelConfig& m) {
  s.get("stem_channels", m.stem_channels);
  std::vector<int> widths(m.widths.begin(), m.widths.end());
  s.get_list("widths", widths, [](const json& v) { return v.is_number_integer(); }, "integers");
  if (widths.size() != 3) throw ConfigError("'model.widths' must have exactly 3 entries");
  std::copy(widths.begin(), widths.end(), m.widths.begin());
  s.get("num_classes", m.num_classes);
  s.get("ignore_label", m.ignore_label);
  s.get("slope", m.slope);
  s.get("split_stems", m.split_stems);
  s.get("use_ref_branch", m.use_ref);
  s.get("use_gas", m.use_gas);
  s.get("use_rdc", m.use_rdc);
  {
    Section g = s.sub("gas");
    g.get("hidden_blocks", m.gas.hidden_blocks);
    g.get("gamma", m.gas.gamma);
    g.get("negative_mean", m.gas.negative_mean);
    g.get("negative_std", m.gas.negative_std);
    g.get("negatives", m.gas.negatives);
    g.get("stop_gradient", m.gas.stop_gradient);
    g.get("apply_weight_in_training", m.gas.weight_in_training);
    g.get("loss_weight", m.gas.loss_weight);
    g.get("slope", m.gas.slope);
    g.finish();
  }
  {
    Section r = s.sub("rdc");
    r.get("slots", m.rdc.slots);
    r.get("temperature", m.rdc.temperature);
    r.get("loss_weight", m.rdc.loss_weight);
    r.finish();
  }
  s.finish();
}

void read_train(Section s, TrainConfig& t) {
  s.get("epochs", t.epochs);
  s.get("batch_size", t.batch_size);
  s.get("learning_rate", t.learning_rate);
  s.get("weight_decay", t.weight_decay);
  s.get("schedule", t.schedule);
  s.get("track_initial_loss", t.track_initial_loss);
  s.finish();
}

void read_eval(Section s, EvalConfig& e) {
  std::vector<std::string> names;
  for (Condition c : e.conditions) names.emplace_back(to_string(c));
  s.get_list("conditions", names, [](const json& v) { return v.is_string(); }, "strings");
  e.conditions.clear();
  for (const auto& n : names) e.conditions.push_back(parse_condition(n));
  s.get_list("sweep_widths", e.sweep_widths, [](const json& v) { return v.is_number_integer(); }, "integers");
  s.finish();
}

void read_seeds(Section s, SeedConfig& seeds) {
  s.get("data", seeds.data);
  s.get("train", seeds.train);
  s.get_list("ablation", seeds.ablation, [](const json& v) { return v.is_number_unsigned(); },
             "non-negative integers");
  s.finish();
}

json pair(const IntRange& r) { return json::array({r.min, r.max}); }
json pair(const RealRange& r) { return json::array({r.min, r.max}); }

json model_json(const ModelConfig& m) {
  return json{{"stem_channels", m.stem_channels},
              {"widths", json::array({m.widths[0], m.widths[1], m.widths[2]})},
              {"num_classes", m.num_classes},
              {"ignore_label", m.ignore_label},
              {"slope", m.slope},
              {"split_stems", m.split_stems},
              {"use_ref_branch", m.use_ref},
              {"use_gas", m.use_gas},
              {"use_rdc", m.use_rdc},
              {"gas",
               {{"hidden_blocks", m.gas.hidden_blocks},
                {"gamma", m.gas.gamma},
                {"negative_mean", m.gas.negative_mean},
                {"negative_std", m.gas.negative_std},
                {"negatives", m.gas.negatives},
                {"stop_gradient", m.gas.stop_gradient},
                {"apply_weight_in_training", m.gas.weight_in_training},
                {"loss_weight", m.gas.loss_weight},
                {"slope", m.gas.slope}}},
              {"rdc",
               {{"slots", m.rdc.slots},
                {"temperature", m.rdc.temperature},
                {"loss_weight", m.rdc.loss_weight}}}};
}

json weather_json(const WeatherConfig& w) {
  return json{{"scatter_rate", w.scatter_rate},
              {"scatter_scale", w.scatter_scale},
              {"scatter_range", pair(w.scatter_range)},
              {"scatter_reflectance_max", w.scatter_reflectance_max},
              {"attenuation", pair(w.attenuation)},
              {"max_range", w.max_range},
              {"dropout_prob", w.dropout_prob}};
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

void DataConfig::validate() const {
  if (train_scenes < 1) throw ConfigError("scene.train_scenes must be >= 1");
  if (eval_scenes < 1) throw ConfigError("scene.eval_scenes must be >= 1");
  scene.validate();
}

void EvalConfig::validate() const {
  if (conditions.empty()) throw ConfigError("eval.conditions must not be empty");
  std::set<Condition> unique(conditions.begin(), conditions.end());
  if (unique.size() != conditions.size()) throw ConfigError("eval.conditions has duplicates");
  for (int w : sweep_widths) {
    if (w < 4 || w % 4 != 0) throw ConfigError("eval.sweep_widths entries must be positive multiples of 4");
  }
}

RunConfig::RunConfig() {
  for (Condition c : {Condition::fog, Condition::rain, Condition::snow}) weather[c] = weather_preset(c);
}

void RunConfig::validate() const {
  projection.validate();
  if (projection.height % 4 != 0 || projection.width % 4 != 0) {
    throw ConfigError("projection.width and projection.height must be multiples of 4 (backbone has two stride-2 stages)");
  }
  scene.validate();
  for (const auto& [c, w] : weather) w.validate();
  model.validate();
  if (scene.scene.num_classes != model.num_classes) {
    throw ConfigError("model.num_classes must match the scene generator's class count (" +
                      std::to_string(scene.scene.num_classes) + ")");
  }
  train.validate();
  eval.validate();
  if (seeds.ablation.empty()) throw ConfigError("seeds.ablation must not be empty");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

WeatherConfig RunConfig::weather_for(Condition c) const {
  WeatherConfig w;
  if (c != Condition::clean) {
    auto it = weather.find(c);
    w = it != weather.end() ? it->second : weather_preset(c);
  }
  w.fov_up = scene.scene.fov_up;
  w.fov_down = scene.scene.fov_down;
  return w;
}

RunConfig parse_run_config(std::string_view json_text) {
  const json doc = parse_document(json_text);
  RunConfig cfg;
  try {
    Section root(doc, "");
    read_projection(root.sub("projection"), cfg.projection);
    read_scene(root.sub("scene"), cfg.scene);
    {
      Section w = root.sub("weather");
      for (Condition c : {Condition::fog, Condition::rain, Condition::snow}) {
        read_weather(w.sub(std::string(to_string(c))), cfg.weather[c]);
      }
      w.finish();
    }
    read_model(root.sub("model"), cfg.model);
    read_train(root.sub("train"), cfg.train);
    read_eval(root.sub("eval"), cfg.eval);
    read_seeds(root.sub("seeds"), cfg.seeds);
    root.get("output_dir", cfg.output_dir);
    root.finish();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (auto& [c, w] : cfg.weather) w.condition = c;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& c, int indent) {
  json weather = json::object();
  for (const auto& [cond, w] : c.weather) weather[std::string(to_string(cond))] = weather_json(w);
  std::vector<std::string> conditions;
  for (Condition cond : c.eval.conditions) conditions.emplace_back(to_string(cond));
  const auto& s = c.scene.scene;
  json doc{
      {"projection",
       {{"width", c.projection.width},
        {"height", c.projection.height},
        {"fov_up_deg", rad_to_deg(c.projection.fov_up)},
        {"fov_down_deg", rad_to_deg(c.projection.fov_down)},
        {"tie_break", "nearest_depth"}}},
      {"scene",
       {{"train_scenes", c.scene.train_scenes},
        {"eval_scenes", c.scene.eval_scenes},
        {"rings", s.rings},
        {"azimuth_steps", s.azimuth_steps},
        {"fov_up_deg", rad_to_deg(s.fov_up)},
        {"fov_down_deg", rad_to_deg(s.fov_down)},
        {"max_range", s.max_range},
        {"ground_height", s.ground_height},
        {"vehicles", pair(s.vehicles)},
        {"poles", pair(s.poles)},
        {"buildings", pair(s.buildings)},
        {"vehicle_distance", pair(s.vehicle_distance)},
        {"pole_distance", pair(s.pole_distance)},
        {"building_distance", pair(s.building_distance)},
        {"reflectance_jitter", s.reflectance_jitter}}},
      {"weather", weather},
      {"model", model_json(c.model)},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"weight_decay", c.train.weight_decay},
        {"schedule", c.train.schedule},
        {"track_initial_loss", c.train.track_initial_loss}}},
      {"eval", {{"conditions", conditions}, {"sweep_widths", c.eval.sweep_widths}}},
      {"seeds", {{"data", c.seeds.data}, {"train", c.seeds.train}, {"ablation", c.seeds.ablation}}},
      {"output_dir", c.output_dir}};
  return doc.dump(indent);
}

std::string model_section_to_json(const ModelConfig& model, const ProjectionConfig& projection) {
  json doc{{"model", model_json(model)},
           {"projection",
            {{"width", projection.width},
             {"height", projection.height},
             {"fov_up_rad", projection.fov_up},
             {"fov_down_rad", projection.fov_down}}}};
  return doc.dump();
}

void model_section_from_json(std::string_view json_text, ModelConfig& model, ProjectionConfig& projection) {
  const json doc = parse_document(json_text);
  try {
    Section root(doc, "");
    ModelConfig m;
    read_model(root.sub("model"), m);
    ProjectionConfig p;
    Section ps = root.sub("projection");
    ps.get("width", p.width);
    ps.get("height", p.height);
    ps.get("fov_up_rad", p.fov_up);
    ps.get("fov_down_rad", p.fov_down);
    ps.finish();
    root.finish();
    m.validate();
    p.validate();
    // Checkpoints carry every field; a missing one would silently fall back
    // to a default that may have changed since the file was written.
    if (json::parse(model_section_to_json(m, p)) != doc) {
      throw ConfigError("model section: incomplete, expected every model and projection field");
    }
    model = m;
    projection = p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model section: ") + e.what());
  }
}

}  // namespace rvseg
