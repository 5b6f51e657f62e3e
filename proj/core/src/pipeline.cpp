// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "rvseg/errors.hpp"
#include "rvseg/image_io.hpp"
#include "rvseg/kernels.hpp"
#include "rvseg/kitti_io.hpp"

namespace rvseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void emit(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// Shortest round-trip representation, so reports compare exactly.
std::string exact(double v) { return json(v).dump(); }

}  // namespace

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

InputStats compute_input_stats(std::span<const PointCloud> clouds, const ProjectionConfig& projection) {
  InputStatsAccumulator acc;
  for (const auto& pc : clouds) acc.add(project(pc, projection));
  return acc.finish();
}

Sample<float> make_sample(const PointCloud& pc, const ProjectionConfig& projection, const InputStats& stats,
                          int ignore_label) {
  const RangeImage img = project(pc, projection);
  Sample<float> s;
  s.planes = make_input_planes<float>(img, stats);
  s.labels = pixel_labels(img, pc, ignore_label);
  return s;
}

PreparedData prepare_training(std::span<const PointCloud> clouds, const ProjectionConfig& projection,
                              int ignore_label, int threads) {
  if (clouds.empty()) throw DataError("no training scans");
  const int nt = resolve_threads(threads);
  const int n = static_cast<int>(clouds.size());
  std::vector<RangeImage> images(n);
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
  for (int i = 0; i < n; ++i) images[i] = project(clouds[i], projection);

  InputStatsAccumulator acc;
  for (const auto& img : images) acc.add(img);
  PreparedData d;
  d.stats = acc.finish();
  d.samples.resize(n);
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
  for (int i = 0; i < n; ++i) {
    d.samples[i].planes = make_input_planes<float>(images[i], d.stats);
    d.samples[i].labels = pixel_labels(images[i], clouds[i], ignore_label);
  }
  return d;
}

TrainedModel train_model(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                         const ProjectionConfig& projection, const PreparedData& data, std::uint64_t seed,
                         int threads, const LogFn& log) {
  const auto t0 = std::chrono::steady_clock::now();
  Model<float> model(model_cfg, seed);
  TrainedModel out;
  out.history = train(model, data.samples, train_cfg, seed, threads, [&](const EpochLog& e) {
    emit(log, "epoch " + std::to_string(e.epoch) + "/" + std::to_string(train_cfg.epochs) +
                  " loss " + fixed(e.mean.total, 4) + " seg " + fixed(e.mean.seg, 4) + " gas " +
                  fixed(e.mean.gas, 4) + " rdc " + fixed(e.mean.rdc, 4) + " lr " + fixed(e.lr_last, 6) + " (" +
                  fixed(e.seconds, 1) + " s)");
  });
  TrainingMetadata meta;
  meta.epochs_completed = static_cast<int>(out.history.epochs.size());
  meta.seed = seed;
  for (const auto& e : out.history.epochs) meta.loss_history.push_back(e.mean.total);
  out.checkpoint = make_checkpoint(model, projection, data.stats, meta);
  out.seconds = seconds_since(t0);
  return out;
}

ConfusionMatrix evaluate_scans(const Model<float>& model, const InputStats& stats, const ProjectionConfig& projection,
                               std::span<const PointCloud> scans, int threads) {
  const int ignore = model.config().ignore_label;
  const int k = model.config().num_classes;
  const int nt = resolve_threads(threads);
  const int n = static_cast<int>(scans.size());
  std::vector<ConfusionMatrix> per(n, ConfusionMatrix(k, ignore));
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (nt > 1)
  for (int i = 0; i < n; ++i) {
    const PointCloud& pc = scans[i];
    if (pc.empty()) continue;
    if (!pc.has_labels()) throw DataError("evaluation scan " + std::to_string(i) + " has no labels");
    const RangeImage img = project(pc, projection);
    std::vector<int> pred(pc.size(), ignore);
    if (img.valid.count() > 0) {
      const auto planes = make_input_planes<float>(img, stats);
      const auto inf = model.infer(planes);
      pred = backproject_labels(img, inf.predict(ignore), ignore);
    }
    per[i].accumulate(pc.labels, pred);
  }
  ConfusionMatrix total(k, ignore);
  for (const auto& m : per) total.merge(m);
  return total;
}

const ConditionRow* ConditionReport::find(Condition c) const {
  for (const auto& r : rows) {
    if (r.condition == c) return &r;
  }
  return nullptr;
}

double ConditionReport::corrupted_average() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.condition == Condition::clean) continue;
    sum += r.miou();
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

ConditionReport condition_report(const Model<float>& model, const InputStats& stats,
                                 const ProjectionConfig& projection, std::span<const EvalSet> sets, int threads) {
  ConditionReport report;
  for (const auto& set : sets) {
    ConditionRow row;
    row.condition = set.condition;
    row.scans = set.scans.size();
    row.matrix = evaluate_scans(model, stats, projection, set.scans, threads);
    report.rows.push_back(std::move(row));
  }
  return report;
}

ConditionReport condition_report(const Checkpoint& ckpt, std::span<const EvalSet> sets, int threads) {
  const auto model = ckpt.make_model();
  return condition_report(model, ckpt.input_stats, ckpt.projection, sets, threads);
}

std::string report_csv(const ConditionReport& report) {
  std::ostringstream os;
  os << "condition,class,iou\n";
  for (const auto& r : report.rows) {
    const auto iou = r.matrix.iou();
    for (int c = 0; c < r.matrix.num_classes(); ++c) {
      if (c == r.matrix.ignore_label()) continue;
      os << to_string(r.condition) << ',' << class_name(static_cast<SceneClass>(c)) << ',';
      if (iou[c]) os << exact(*iou[c]);
      os << '\n';
    }
    os << to_string(r.condition) << ",mean," << exact(r.miou()) << '\n';
  }
  return os.str();
}

std::string report_json(const ConditionReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json classes = json::object();
    const auto iou = r.matrix.iou();
    for (int c = 0; c < r.matrix.num_classes(); ++c) {
      if (c == r.matrix.ignore_label()) continue;
      classes[std::string(class_name(static_cast<SceneClass>(c)))] = iou[c] ? json(*iou[c]) : json(nullptr);
    }
    json confusion = json::array();
    for (int g = 0; g < r.matrix.num_classes(); ++g) {
      json row = json::array();
      for (int p = 0; p < r.matrix.num_classes(); ++p) row.push_back(r.matrix.at(g, p));
      confusion.push_back(row);
    }
    const double miou = r.miou();
    rows.push_back({{"condition", std::string(to_string(r.condition))},
                    {"scans", r.scans},
                    {"miou", std::isfinite(miou) ? json(miou) : json(nullptr)},
                    {"class_iou", classes},
                    {"points_counted", r.matrix.counted()},
                    {"points_ignored", r.matrix.ignored()},
                    {"confusion", confusion}});
  }
  const double avg = report.corrupted_average();
  return json{{"conditions", rows}, {"corrupted_average_miou", std::isfinite(avg) ? json(avg) : json(nullptr)}}.dump(2) +
         "\n";
}

// ---------------------------------------------------------------------------

std::vector<Variant> AblationTable::variants() const {
  std::vector<Variant> out;
  for (const auto& r : runs) {
    if (std::find(out.begin(), out.end(), r.variant) == out.end()) out.push_back(r.variant);
  }
  return out;
}

double AblationTable::mean_miou(Variant v, Condition c) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : runs) {
    if (r.variant != v) continue;
    if (const auto* row = r.report.find(c)) {
      sum += row->miou();
      ++n;
    }
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double AblationTable::mean_corrupted(Variant v) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : runs) {
    if (r.variant != v) continue;
    sum += r.report.corrupted_average();
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

std::vector<std::string> AblationTable::monotonic_checks() const {
  std::vector<std::string> out;
  const auto vs = variants();
  auto has = [&](Variant v) { return std::find(vs.begin(), vs.end(), v) != vs.end(); };
  if (!has(Variant::full)) return out;
  const double full = mean_corrupted(Variant::full);
  for (Variant single : {Variant::geo_gas, Variant::geo_ref_rdc}) {
    if (!has(single)) continue;
    const double other = mean_corrupted(single);
    const bool ok = full >= other;
    out.push_back(std::string(ok ? "OK" : "FLAG") + " full (" + fixed(100.0 * full, 2) + ") >= " +
                  std::string(to_string(single)) + " (" + fixed(100.0 * other, 2) + ") on corrupted average");
  }
  return out;
}

AblationTable run_ablation(const RunConfig& config, const Dataset& data, std::span<const Variant> variants,
                           std::span<const std::uint64_t> seeds, int threads, const LogFn& log) {
  if (data.train.empty() || data.eval.empty()) throw DataError("ablation needs both training and evaluation scans");
  const PreparedData prepared = prepare_training(data.train, config.projection, config.model.ignore_label, threads);
  AblationTable table;
  for (const auto& set : data.eval) table.conditions.push_back(set.condition);
  for (Variant v : variants) {
    const ModelConfig mc = config.model.with_variant(v);
    for (std::uint64_t seed : seeds) {
      emit(log, "ablation: training " + std::string(to_string(v)) + " seed " + std::to_string(seed));
      TrainedModel tm = train_model(mc, config.train, config.projection, prepared, seed, threads);
      AblationRun run;
      run.variant = v;
      run.seed = seed;
      run.parameters = tm.checkpoint.params.element_count();
      run.train_seconds = tm.seconds;
      run.initial_seg_loss = tm.history.initial.seg;
      run.final_seg_loss = tm.history.epochs.back().mean.seg;
      run.report = condition_report(tm.checkpoint, data.eval, threads);
      std::string line = "ablation: " + std::string(to_string(v)) + " seed " + std::to_string(seed) + " (" +
                         fixed(tm.seconds, 1) + " s)";
      for (const auto& row : run.report.rows) {
        line += " " + std::string(to_string(row.condition)) + " " + fixed(100.0 * row.miou(), 2);
      }
      emit(log, line);
      table.runs.push_back(std::move(run));
    }
  }
  return table;
}

std::string ablation_csv(const AblationTable& table) {
  std::ostringstream os;
  os << "variant,split_stems,gas,ref_branch,rdc,seeds,parameters";
  for (Condition c : table.conditions) os << ',' << to_string(c);
  os << ",corrupted_avg\n";
  for (Variant v : table.variants()) {
    ModelConfig mc = ModelConfig{}.with_variant(v);
    std::size_t params = 0;
    int n = 0;
    for (const auto& r : table.runs) {
      if (r.variant == v) {
        params = r.parameters;
        ++n;
      }
    }
    os << to_string(v) << ',' << mc.split_stems << ',' << mc.use_gas << ',' << mc.use_ref << ',' << mc.use_rdc << ','
       << n << ',' << params;
    for (Condition c : table.conditions) os << ',' << fixed(100.0 * table.mean_miou(v, c), 2);
    os << ',' << fixed(100.0 * table.mean_corrupted(v), 2) << '\n';
  }
  return os.str();
}

std::string ablation_runs_csv(const AblationTable& table) {
  std::ostringstream os;
  os << "variant,seed,parameters,train_seconds,initial_seg_loss,final_seg_loss";
  for (Condition c : table.conditions) os << ',' << to_string(c);
  os << ",corrupted_avg\n";
  for (const auto& r : table.runs) {
    os << to_string(r.variant) << ',' << r.seed << ',' << r.parameters << ',' << fixed(r.train_seconds, 2) << ','
       << fixed(r.initial_seg_loss, 6) << ',' << fixed(r.final_seg_loss, 6);
    for (Condition c : table.conditions) {
      const auto* row = r.report.find(c);
      os << ',' << (row ? fixed(100.0 * row->miou(), 4) : std::string());
    }
    os << ',' << fixed(100.0 * r.report.corrupted_average(), 4) << '\n';
  }
  return os.str();
}

std::vector<SweepRow> resolution_sweep(const RunConfig& config, const Dataset& data, std::span<const int> widths,
                                       int threads, const LogFn& log) {
  std::vector<SweepRow> rows;
  for (int w : widths) {
    RunConfig cfg = config;
    cfg.projection.width = w;
    cfg.validate();
    emit(log, "sweep: width " + std::to_string(w));
    const auto t0 = std::chrono::steady_clock::now();
    const PreparedData prepared = prepare_training(data.train, cfg.projection, cfg.model.ignore_label, threads);
    TrainedModel tm = train_model(cfg.model, cfg.train, cfg.projection, prepared, cfg.seeds.train, threads);
    SweepRow row;
    row.width = w;
    row.train_seconds = seconds_since(t0);
    const auto t1 = std::chrono::steady_clock::now();
    const ConditionReport report = condition_report(tm.checkpoint, data.eval, threads);
    row.eval_seconds = seconds_since(t1);
    const auto* clean = report.find(Condition::clean);
    row.clean_miou = clean ? clean->miou() : std::numeric_limits<double>::quiet_NaN();
    row.corrupted_miou = report.corrupted_average();
    emit(log, "sweep: width " + std::to_string(w) + " clean " + fixed(100.0 * row.clean_miou, 2) + " corrupted " +
                  fixed(100.0 * row.corrupted_miou, 2) + " (" + fixed(row.train_seconds + row.eval_seconds, 1) +
                  " s)");
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << "width,clean_miou,corrupted_miou,train_seconds,eval_seconds\n";
  for (const auto& r : rows) {
    os << r.width << ',' << fixed(100.0 * r.clean_miou, 2) << ',' << fixed(100.0 * r.corrupted_miou, 2) << ','
       << fixed(r.train_seconds, 2) << ',' << fixed(r.eval_seconds, 2) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

void cmd_gen_data(const RunConfig& config, const fs::path& out_dir, int threads, const LogFn& log) {
  const Dataset d = generate_dataset(config, threads);
  fs::create_directories(out_dir);
  write_dataset(out_dir, d);
  write_text_file(out_dir / "config.json", run_config_to_json(config) + "\n");
  std::size_t eval_scans = 0;
  for (const auto& s : d.eval) eval_scans += s.scans.size();
  emit(log, "wrote " + std::to_string(d.train.size()) + " training and " + std::to_string(eval_scans) +
                " evaluation scans to " + out_dir.string());
}

void cmd_train(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir, int threads,
               const LogFn& log) {
  config.validate();
  const Dataset d = load_dataset(data_dir, Splits::train);
  check_training_protocol(d.manifest);
  emit(log, "training on " + std::to_string(d.train.size()) + " clean scans");
  const PreparedData prepared = prepare_training(d.train, config.projection, config.model.ignore_label, threads);
  TrainedModel tm = train_model(config.model, config.train, config.projection, prepared, config.seeds.train,
                                threads, log);
  fs::create_directories(out_dir);
  save_checkpoint(out_dir / "checkpoint.bin", tm.checkpoint);
  std::ostringstream os;
  os << "epoch,loss,seg,gas,rdc,lr\n";
  os << "0," << exact(tm.history.initial.total) << ',' << exact(tm.history.initial.seg) << ','
     << exact(tm.history.initial.gas) << ',' << exact(tm.history.initial.rdc) << ",\n";
  for (const auto& e : tm.history.epochs) {
    os << e.epoch << ',' << exact(e.mean.total) << ',' << exact(e.mean.seg) << ',' << exact(e.mean.gas) << ','
       << exact(e.mean.rdc) << ',' << exact(e.lr_last) << '\n';
  }
  write_text_file(out_dir / "loss_log.csv", os.str());
  write_text_file(out_dir / "config.json", run_config_to_json(config) + "\n");
  emit(log, "wrote " + (out_dir / "checkpoint.bin").string());
}

ConditionReport cmd_eval(const fs::path& checkpoint, const fs::path& data_dir, const fs::path& out_dir, int threads,
                         const LogFn& log) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Dataset d = load_dataset(data_dir, Splits::eval);
  if (d.eval.empty()) throw DataError("no evaluation scans in '" + data_dir.string() + "'");
  ConditionReport report = condition_report(ckpt, d.eval, threads);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "report.csv", report_csv(report));
  write_text_file(out_dir / "report.json", report_json(report));
  for (const auto& r : report.rows) {
    emit(log, std::string(to_string(r.condition)) + " mIoU " + fixed(100.0 * r.miou(), 2));
  }
  return report;
}

namespace {

std::vector<std::uint8_t> label_rgb(std::span<const int> labels) {
  std::vector<std::uint8_t> rgb(labels.size() * 3);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = labels[i] == kIgnoreLabel ? std::array<std::uint8_t, 3>{0, 0, 0} : palette_color(labels[i]);
    std::copy(c.begin(), c.end(), rgb.begin() + 3 * i);
  }
  return rgb;
}

struct Summary {
  double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
};

Summary summarize(std::span<const float> v) {
  Summary s;
  if (v.empty()) return s;
  double sum = 0.0, sq = 0.0;
  s.min = s.max = v[0];
  for (float x : v) {
    sum += x;
    sq += static_cast<double>(x) * x;
    s.min = std::min(s.min, static_cast<double>(x));
    s.max = std::max(s.max, static_cast<double>(x));
  }
  s.mean = sum / v.size();
  s.std = std::sqrt(std::max(0.0, sq / v.size() - s.mean * s.mean));
  return s;
}

}  // namespace

void cmd_project(const fs::path& scan, const std::optional<fs::path>& labels, const ProjectionConfig& projection,
                 const fs::path& out_dir, const LogFn& log) {
  const PointCloud pc = read_kitti_scan(scan, labels.value_or(fs::path{}));
  const RangeImage img = project(pc, projection);
  fs::create_directories(out_dir);
  const int h = img.height();
  const int w = img.width();
  const auto valid = img.valid.bytes();
  const auto depth = img.channels.channel(RangeImage::kDepth);
  const float max_depth = depth.empty() ? 1.0f : *std::max_element(depth.begin(), depth.end());
  write_pgm(out_dir / "depth.pgm", w, h, to_gray(depth, 0.0, max_depth, valid));
  write_pgm(out_dir / "intensity.pgm", w, h, to_gray(img.channels.channel(RangeImage::kIntensity), 0.0, 1.0, valid));
  if (pc.has_labels()) write_ppm(out_dir / "labels.ppm", w, h, label_rgb(pixel_labels(img, pc)));

  std::ofstream raw(out_dir / "channels.bin", std::ios::binary | std::ios::trunc);
  if (!raw) throw DataError("cannot write channels.bin");
  for (float v : img.channels.values()) {
    const auto u = std::bit_cast<std::uint32_t>(v);
    const char b[4] = {static_cast<char>(u), static_cast<char>(u >> 8), static_cast<char>(u >> 16),
                       static_cast<char>(u >> 24)};
    raw.write(b, 4);
  }
  raw.write(reinterpret_cast<const char*>(valid.data()), static_cast<std::streamsize>(valid.size()));

  const json meta{{"height", h},
                  {"width", w},
                  {"channels", {"x", "y", "z", "depth", "intensity"}},
                  {"points", pc.size()},
                  {"retained", img.retained()},
                  {"occupied_pixels", img.valid.count()},
                  {"dropped_zero_range", img.diagnostics.zero_range},
                  {"dropped_out_of_fov", img.diagnostics.out_of_fov},
                  {"dropped_non_finite", img.diagnostics.non_finite}};
  write_text_file(out_dir / "projection.json", meta.dump(2) + "\n");
  emit(log, "projected " + std::to_string(pc.size()) + " points onto " + std::to_string(img.valid.count()) +
                " pixels (" + std::to_string(img.diagnostics.dropped()) + " dropped)");
}

void cmd_inspect(const fs::path& checkpoint, const fs::path& scan, const fs::path& out_dir, const LogFn& log) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Model<float> model = ckpt.make_model();
  const PointCloud pc = read_kitti_scan(scan);
  const RangeImage img = project(pc, ckpt.projection);
  const auto planes = make_input_planes<float>(img, ckpt.input_stats);
  const auto inf = model.infer(planes, true);
  fs::create_directories(out_dir);
  const int h = img.height();
  const int w = img.width();
  const auto valid = img.valid.bytes();

  if (inf.gas_weight) {
    write_pgm(out_dir / "gas_weight.pgm", w, h, to_gray(inf.gas_weight->values(), 0.0, 1.0, valid));
  }
  if (inf.retrieval) {
    const auto& att = inf.retrieval->attention;
    std::vector<int> best(att.pixels(), -1);
    for (std::size_t i = 0; i < att.pixels(); ++i) {
      if (!valid[i]) continue;
      int arg = 0;
      for (int t = 1; t < att.channels(); ++t) {
        if (att[t * att.pixels() + i] > att[arg * att.pixels() + i]) arg = t;
      }
      best[i] = arg;
    }
    std::vector<std::uint8_t> rgb(best.size() * 3);
    std::vector<std::size_t> usage(att.channels(), 0);
    for (std::size_t i = 0; i < best.size(); ++i) {
      const auto c = palette_color(best[i]);
      std::copy(c.begin(), c.end(), rgb.begin() + 3 * i);
      if (best[i] >= 0) ++usage[best[i]];
    }
    write_ppm(out_dir / "memory_argmax.ppm", w, h, rgb);

    std::ostringstream os;
    os << "slot,norm,mean,std,usage\n";
    for (const auto& p : ckpt.params) {
      if (p.role != ParamRole::memory) continue;
      const int slots = p.shape[0];
      const int c = p.shape[1];
      const std::size_t n_valid = img.valid.count();
      for (int t = 0; t < slots; ++t) {
        std::span<const float> row(p.value.data() + static_cast<std::size_t>(t) * c, c);
        const Summary s = summarize(row);
        double norm = 0.0;
        for (float x : row) norm += static_cast<double>(x) * x;
        os << t << ',' << fixed(std::sqrt(norm), 6) << ',' << fixed(s.mean, 6) << ',' << fixed(s.std, 6) << ','
           << fixed(n_valid ? static_cast<double>(usage[t]) / n_valid : 0.0, 6) << '\n';
      }
    }
    write_text_file(out_dir / "memory_stats.csv", os.str());
  }

  std::ostringstream os;
  os << "layer,channels,height,width,mean,std,min,max\n";
  auto row = [&](const std::string& name, const FeatureMap<float>& f) {
    const Summary s = summarize(f.values());
    os << name << ',' << f.channels() << ',' << f.height() << ',' << f.width() << ',' << fixed(s.mean, 6) << ','
       << fixed(s.std, 6) << ',' << fixed(s.min, 6) << ',' << fixed(s.max, 6) << '\n';
  };
  if (inf.geo) row("stem_geo", *inf.geo);
  if (inf.gas_weight) row("gas_weight", *inf.gas_weight);
  if (inf.ref) row("stem_ref", *inf.ref);
  if (inf.ref_calibrated) row("rdc_calibrated", *inf.ref_calibrated);
  row("fused", inf.fused);
  for (const auto& [name, f] : inf.stages) row(name, f);
  row("logits", inf.logits);
  write_text_file(out_dir / "layer_stats.csv", os.str());
  write_ppm(out_dir / "prediction.ppm", w, h, [&] {
    auto pred = inf.predict(model.config().ignore_label);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (!valid[i]) pred[i] = kIgnoreLabel;
    }
    return label_rgb(pred);
  }());
  emit(log, "wrote inspection artifacts to " + out_dir.string());
}

AblationTable cmd_ablate(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir, int threads,
                         const LogFn& log) {
  const Dataset d = load_dataset(data_dir, Splits::all);
  check_training_protocol(d.manifest);
  AblationTable table = run_ablation(config, d, kAllVariants, config.seeds.ablation, threads, log);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "ablation.csv", ablation_csv(table));
  write_text_file(out_dir / "ablation_runs.csv", ablation_runs_csv(table));
  std::string checks;
  for (const auto& line : table.monotonic_checks()) {
    checks += line + "\n";
    emit(log, line);
  }
  write_text_file(out_dir / "ablation_checks.txt", checks);
  return table;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir,
                                int threads, const LogFn& log) {
  const Dataset d = load_dataset(data_dir, Splits::all);
  check_training_protocol(d.manifest);
  auto rows = resolution_sweep(config, d, config.eval.sweep_widths, threads, log);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "sweep.csv", sweep_csv(rows));
  return rows;
}

}  // namespace rvseg
