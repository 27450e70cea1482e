// Copyright 2026 The chronomerge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "chronomerge/checkpoint_io.hpp"
#include "chronomerge/config.hpp"
#include "chronomerge/errors.hpp"
#include "chronomerge/experiment.hpp"
#include "chronomerge/merge.hpp"
#include "chronomerge/sweep.hpp"

namespace chronomerge::cli {

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("-c,--config", a.config_path, "Configuration file (INI, or JSON such as a summary.json)");
  cmd->add_option("--set", a.overrides, "Override a configuration key: key=value")->allow_extra_args(false);
}

ExperimentConfig resolve_config(const CommonArgs& a) {
  ExperimentConfig cfg = a.config_path.empty() ? ExperimentConfig{} : load_config(a.config_path);
  for (const auto& o : a.overrides) apply_override(cfg, o);
  return cfg;
}

std::filesystem::path output_root(const ExperimentConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return default_output_root();
}

std::string fmt6(double v) { return format_fixed6(v); }

void print_row(std::ostream& out, const char* label, const MetricsRow& r) {
  out << label << ": t=" << r.t << " A_KA=" << fmt6(r.knowledge_accumulation)
      << " A_ZS=" << fmt6(r.zero_shot_retention) << " geo_mean=" << fmt6(r.geo_mean) << '\n';
}

int cmd_merge(const CommonArgs& common, const std::string& technique, const std::string& base_path,
              const std::string& out_path, const std::vector<std::string>& inputs, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(common);
  if (!technique.empty()) set_config_value(cfg, "merge.technique", technique);
  MergeConfig mc = cfg.pipeline.merge;
  mc.rng_seed = cfg.merge_seed();
  mc.validate();
  if (inputs.empty()) throw ConfigError("merge needs at least one input checkpoint");
  if (mc.technique != Technique::WA && base_path.empty())
    throw ConfigError("missing required field 'base': technique " + std::string(to_string(mc.technique)) +
                      " needs a base checkpoint (--base)");
  if (is_pairwise(mc.technique) && inputs.size() < 2)
    throw ConfigError("technique " + std::string(to_string(mc.technique)) + " needs at least two inputs");

  std::vector<Checkpoint> candidates;
  for (const auto& p : inputs) candidates.push_back(load_checkpoint(p));
  const Checkpoint base = base_path.empty() ? Checkpoint{} : load_checkpoint(base_path);

  const Checkpoint merged =
      (is_pairwise(mc.technique) && candidates.size() > 2) ? fold_pairwise(mc, base, candidates) : merge(mc, base, candidates);
  save_checkpoint(merged, out_path);

  out << "merged " << candidates.size() << " checkpoint(s) with " << to_string(mc.technique) << " -> " << out_path
      << '\n';
  for (const auto& name : merged.names()) {
    const auto& t = merged.at(name);
    double sq = 0.0;
    for (float v : t.data) sq += static_cast<double>(v) * v;
    out << "  " << name << " " << shape_to_string(t.shape) << " l2=" << fmt6(std::sqrt(sq)) << '\n';
  }
  return kExitOk;
}

int cmd_run(const CommonArgs& common, const std::string& out_flag, bool no_multitask, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(common);
  cfg.validate();
  const auto dir = output_root(cfg, out_flag);
  const auto prepared = prepare_bench(cfg);
  RunOptions ro;
  ro.with_multitask = !no_multitask;
  ro.out_dir = dir;
  const auto result = run_experiment(cfg, prepared, ro);
  print_row(out, "final", result.trajectory.back());
  print_row(out, "zero_shot", result.zero_shot);
  if (result.multitask) print_row(out, "multitask", *result.multitask);
  out << "wrote " << (dir / "trajectory.csv").string() << " and " << (dir / "summary.json").string() << '\n';
  return kExitOk;
}

int cmd_sweep(const CommonArgs& common, const std::string& grid_path, bool use_defaults, int jobs,
              const std::string& out_flag, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(common);
  cfg.validate();
  SweepGrid grid;
  if (!grid_path.empty()) grid = load_grid(grid_path);
  else if (use_defaults) grid = default_grid();
  SweepOptions so;
  so.jobs = jobs > 0 ? jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  so.out_dir = output_root(cfg, out_flag);
  const auto result = run_sweep(cfg, grid, so);
  std::size_t failed = 0;
  for (const auto& r : result.rows) failed += r.ok ? 0 : 1;
  out << result.rows.size() << " cells, " << failed << " failed\n";
  if (result.best) {
    out << "best: " << params_label(result.best->technique, result.best->params)
        << " geo_mean=" << fmt6(result.best->geo_mean) << '\n';
  }
  out << "wrote " << (*so.out_dir / "sweep.csv").string() << " and " << (*so.out_dir / "best.json").string() << '\n';
  return kExitOk;
}

int cmd_eval(const CommonArgs& common, const std::string& checkpoint, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(common);
  cfg.validate();
  const auto model = load_checkpoint(checkpoint);
  const auto bench = generate_stream(cfg.resolved_bench());
  for (std::size_t i = 0; i < bench.adaptation_tasks.size(); ++i)
    out << "adapt " << (i + 1) << " acc=" << fmt6(evaluate(model, bench.adaptation_tasks[i])) << '\n';
  for (std::size_t i = 0; i < bench.holdout_tasks.size(); ++i)
    out << "holdout " << (i + 1) << " acc=" << fmt6(evaluate(model, bench.holdout_tasks[i])) << '\n';
  print_row(out, "metrics", measure(model, bench, cfg.bench.task_count));
  return kExitOk;
}

int cmd_inspect(const std::string& path, bool no_verify, std::ostream& out) {
  const auto h = read_checkpoint_header(path, !no_verify);
  out << "file: " << path << '\n';
  out << "format: CMRG v" << kCheckpointVersion << (no_verify ? " (crc not checked)" : " (crc ok)") << '\n';
  out << "data_start: " << h.data_start << '\n';
  for (const auto& [k, v] : h.meta) out << "meta " << k << " = " << v << '\n';
  std::uint64_t total = 0;
  for (const auto& [name, e] : h.tensors) {
    out << "tensor " << name << " " << shape_to_string(e.shape) << " f32 offset=" << e.offset << " nbytes=" << e.nbytes
        << '\n';
    total += e.nbytes / 4;
  }
  out << h.tensors.size() << " tensors, " << total << " elements\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"chronomerge: temporal model merging toolkit"};
  app.require_subcommand(1);

  CommonArgs merge_common, run_common, sweep_common, eval_common;
  std::string technique, base_path, out_path, run_out, sweep_out, grid_path, eval_ckpt, inspect_path;
  std::vector<std::string> inputs;
  bool no_multitask = false, use_defaults = false, no_verify = false;
  int jobs = 0;

  auto* merge_cmd = app.add_subcommand("merge", "Merge checkpoints into one");
  add_common(merge_cmd, merge_common);
  merge_cmd->add_option("-t,--technique", technique, "Merge technique (overrides merge.technique)");
  merge_cmd->add_option("-b,--base", base_path, "Base checkpoint for task-vector techniques");
  merge_cmd->add_option("-o,--out", out_path, "Output checkpoint")->required();
  merge_cmd->add_option("inputs", inputs, "Input checkpoints, oldest first")->required();

  auto* run_cmd = app.add_subcommand("run", "Run one temporal merging experiment");
  add_common(run_cmd, run_common);
  run_cmd->add_option("-o,--out", run_out, "Output directory");
  run_cmd->add_flag("--no-multitask", no_multitask, "Skip the multitask reference model");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a hyperparameter grid");
  add_common(sweep_cmd, sweep_common);
  sweep_cmd->add_option("-g,--grid", grid_path, "Grid file");
  sweep_cmd->add_flag("--default-grid", use_defaults, "Use the built-in grids for every technique");
  sweep_cmd->add_option("-j,--jobs", jobs, "Concurrent cells (default: hardware threads)");
  sweep_cmd->add_option("-o,--out", sweep_out, "Output directory");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the configured bench");
  add_common(eval_cmd, eval_common);
  eval_cmd->add_option("checkpoint", eval_ckpt, "Checkpoint file")->required();

  auto* inspect_cmd = app.add_subcommand("inspect", "Print a checkpoint header");
  inspect_cmd->add_option("checkpoint", inspect_path, "Checkpoint file")->required();
  inspect_cmd->add_flag("--no-verify", no_verify, "Skip the checksum");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*merge_cmd) return cmd_merge(merge_common, technique, base_path, out_path, inputs, out);
    if (*run_cmd) return cmd_run(run_common, run_out, no_multitask, out);
    if (*sweep_cmd) return cmd_sweep(sweep_common, grid_path, use_defaults, jobs, sweep_out, out);
    if (*eval_cmd) return cmd_eval(eval_common, eval_ckpt, out);
    if (*inspect_cmd) return cmd_inspect(inspect_path, no_verify, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace chronomerge::cli
