// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

// rvseg: command-line front end.
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration error,
// 3 data error, 4 numeric abort. RVSEG_THREADS sets the worker count.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rvseg/config.hpp"
#include "rvseg/errors.hpp"
#include "rvseg/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_config = true) {
  if (with_config) cmd->add_option("--config", c.config, "Run configuration (JSON); defaults apply when omitted");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Override the command's seed");
  cmd->add_flag("--quiet", c.quiet, "Suppress progress output");
}

rvseg::RunConfig load_config(const Common& c) {
  if (c.config.empty()) return rvseg::RunConfig{};
  return rvseg::load_run_config(c.config);
}

rvseg::LogFn logger(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

fs::path out_dir(const Common& c, const rvseg::RunConfig& cfg, const char* leaf) {
  return c.out.empty() ? fs::path(cfg.output_dir) / leaf : fs::path(c.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-view LiDAR segmentation with geometric abnormality suppression and reflectance calibration"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, proj_c, insp_c, abl_c, sweep_c, val_c;
  std::string data_dir, checkpoint, scan, labels;
  bool print_config = false;

  auto* gen = app.add_subcommand("gen-data", "Generate clean training scenes and weather-corrupted eval scenes");
  add_common(gen, gen_c);

  auto* train = app.add_subcommand("train", "Train on the clean scenes of a dataset");
  add_common(train, train_c);
  train->add_option("--data", data_dir, "Dataset directory")->required();

  auto* eval = app.add_subcommand("eval", "Per-condition mIoU of a checkpoint");
  add_common(eval, eval_c, false);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data_dir, "Dataset directory")->required();

  auto* proj = app.add_subcommand("project", "Dump the range image of one scan");
  add_common(proj, proj_c);
  proj->add_option("--scan", scan, "KITTI .bin scan")->required();
  proj->add_option("--labels", labels, "Optional KITTI .label file");

  auto* insp = app.add_subcommand("inspect", "Dump GAS weights, memory usage and layer statistics for one scan");
  add_common(insp, insp_c, false);
  insp->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  insp->add_option("--scan", scan, "KITTI .bin scan")->required();

  auto* abl = app.add_subcommand("ablate", "Train and evaluate every module combination over the ablation seeds");
  add_common(abl, abl_c);
  abl->add_option("--data", data_dir, "Dataset directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate at each sweep width");
  add_common(sweep, sweep_c);
  sweep->add_option("--data", data_dir, "Dataset directory")->required();

  auto* val = app.add_subcommand("validate", "Check a configuration file");
  val->add_option("--config", val_c.config, "Run configuration (JSON)");
  val->add_flag("--print", print_config, "Print the fully-defaulted configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  const int threads = rvseg::resolve_threads();
  try {
    if (*gen) {
      auto cfg = load_config(gen_c);
      if (gen_c.seed) cfg.seeds.data = *gen_c.seed;
      rvseg::cmd_gen_data(cfg, out_dir(gen_c, cfg, "data"), threads, logger(gen_c));
    } else if (*train) {
      auto cfg = load_config(train_c);
      if (train_c.seed) cfg.seeds.train = *train_c.seed;
      rvseg::cmd_train(cfg, data_dir, out_dir(train_c, cfg, "train"), threads, logger(train_c));
    } else if (*eval) {
      const fs::path out = eval_c.out.empty() ? fs::path(checkpoint).parent_path() / "eval" : fs::path(eval_c.out);
      rvseg::cmd_eval(checkpoint, data_dir, out, threads, logger(eval_c));
    } else if (*proj) {
      const auto cfg = load_config(proj_c);
      std::optional<fs::path> lab;
      if (!labels.empty()) lab = labels;
      rvseg::cmd_project(scan, lab, cfg.projection, out_dir(proj_c, cfg, "project"), logger(proj_c));
    } else if (*insp) {
      const fs::path out = insp_c.out.empty() ? fs::path(checkpoint).parent_path() / "inspect" : fs::path(insp_c.out);
      rvseg::cmd_inspect(checkpoint, scan, out, logger(insp_c));
    } else if (*abl) {
      auto cfg = load_config(abl_c);
      if (abl_c.seed) cfg.seeds.ablation = {*abl_c.seed};
      rvseg::cmd_ablate(cfg, data_dir, out_dir(abl_c, cfg, "ablation"), threads, logger(abl_c));
    } else if (*sweep) {
      auto cfg = load_config(sweep_c);
      if (sweep_c.seed) cfg.seeds.train = *sweep_c.seed;
      rvseg::cmd_sweep(cfg, data_dir, out_dir(sweep_c, cfg, "sweep"), threads, logger(sweep_c));
    } else if (*val) {
      const auto cfg = load_config(val_c);
      if (print_config) {
        std::cout << rvseg::run_config_to_json(cfg) << '\n';
      } else {
        std::cout << "config OK\n";
      }
    }
  } catch (const rvseg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const rvseg::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const rvseg::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
