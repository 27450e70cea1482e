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

#pragma once

#include <filesystem>
#include <optional>

#include "chronomerge/config.hpp"
#include "chronomerge/metrics.hpp"

namespace chronomerge {

/// Seeded bench plus the pretrained base model it induces.
struct PreparedBench {
  ToyBench bench;
  Checkpoint theta_0;
};

PreparedBench prepare_bench(const ExperimentConfig& config);

struct ExperimentResult {
  MetricsTrajectory trajectory;
  MetricsRow zero_shot;
  std::optional<MetricsRow> multitask;
};

struct RunOptions {
  bool with_multitask = true;
  // Destination of trajectory.csv / summary.json (and buffer/ for a disk
  // buffer). No files are written when unset and the buffer is in memory.
  std::optional<std::filesystem::path> out_dir;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const PreparedBench& prepared,
                                const RunOptions& options);

/// Writes trajectory.csv and summary.json (resolved config, final row, and
/// the zero-shot / multitask reference rows).
void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                              const ExperimentResult& result);

nlohmann::json metrics_row_json(const MetricsRow& row);

}  // namespace chronomerge
