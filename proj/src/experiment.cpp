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

#include "chronomerge/experiment.hpp"

#include <fstream>

#include "chronomerge/errors.hpp"

namespace chronomerge {

PreparedBench prepare_bench(const ExperimentConfig& config) {
  config.validate();
  PreparedBench p;
  p.bench = generate_stream(config.resolved_bench());
  p.theta_0 = pretrain_base(p.bench, config.model_spec(), config.pretrain, config.pretrain_seed());
  return p;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const PreparedBench& prepared,
                                const RunOptions& options) {
  config.validate();
  const PipelineConfig pipeline = config.resolved_pipeline();

  CheckpointBuffer buffer = CheckpointBuffer::in_memory();
  if (config.disk_buffer) {
    const auto root = options.out_dir ? *options.out_dir
                                      : (config.output_dir.empty() ? default_output_root() : config.output_dir);
    buffer = CheckpointBuffer::create(root / "buffer");
  }

  PipelineState state(prepared.theta_0, std::move(buffer));
  ExperimentResult result;
  result.trajectory = run_stream(pipeline, prepared.bench, state, {}, config.record_wall_time);
  result.zero_shot = measure(prepared.theta_0, prepared.bench, 1);
  result.zero_shot.t = 0;
  if (options.with_multitask) result.multitask = multitask_reference(pipeline, prepared.bench, prepared.theta_0);

  if (options.out_dir) write_experiment_outputs(*options.out_dir, config, result);
  return result;
}

nlohmann::json metrics_row_json(const MetricsRow& row) {
  return nlohmann::json{{"t", row.t},
                        {"A_KA", row.knowledge_accumulation},
                        {"A_ZS", row.zero_shot_retention},
                        {"geo_mean", row.geo_mean},
                        {"wall_time", row.wall_time}};
}

void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                              const ExperimentResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  {
    std::ofstream csv(dir / "trajectory.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (dir / "trajectory.csv").string());
    write_trajectory_csv(csv, result.trajectory);
    if (!csv) throw IoError("write failed: " + (dir / "trajectory.csv").string());
  }

  nlohmann::json summary;
  summary["config"] = config_to_json(config);
  summary["final"] = result.trajectory.empty() ? nlohmann::json() : metrics_row_json(result.trajectory.back());
  summary["zero_shot"] = metrics_row_json(result.zero_shot);
  summary["multitask"] = result.multitask ? metrics_row_json(*result.multitask) : nlohmann::json();
  std::ofstream js(dir / "summary.json", std::ios::binary | std::ios::trunc);
  if (!js) throw IoError("cannot write " + (dir / "summary.json").string());
  js << summary.dump(2) << '\n';
}

}  // namespace chronomerge
