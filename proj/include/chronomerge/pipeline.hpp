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

// The per-task temporal merging loop: Init -> Train -> Store -> Deploy -> Eval.
//
// Initialization protocols pick the weights training starts from (base model,
// latest expert, or the running EMA); deployment protocols pick the model that
// is evaluated (latest expert, the running EMA, or a merge of every stored
// expert against the base). One EMA accumulator serves both axes.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

#include "chronomerge/buffer.hpp"
#include "chronomerge/merge.hpp"
#include "chronomerge/metrics.hpp"
#include "chronomerge/toybench.hpp"

namespace chronomerge {

enum class InitProtocol { ZS, FT, EMA };
enum class DeployProtocol { FT, EMA, ALL };

std::string_view to_string(InitProtocol p);
std::string_view to_string(DeployProtocol p);
std::optional<InitProtocol> parse_init_protocol(std::string_view s);
std::optional<DeployProtocol> parse_deploy_protocol(std::string_view s);

struct PipelineConfig {
  InitProtocol init = InitProtocol::EMA;
  DeployProtocol deploy = DeployProtocol::EMA;
  MergeConfig merge;
  int task_count = 20;
  bool replay = false;
  double replay_fraction = 0.5;
  TrainOptions train;
  std::uint64_t train_seed = 0;

  /// Throws ConfigError; (ZS init, FT deploy) is rejected.
  void validate() const;
};

/// True when the EMA accumulator has to be maintained.
bool ema_active(const PipelineConfig& config);

struct PipelineState {
  Checkpoint theta_0;
  CheckpointBuffer buffer;
  std::optional<Checkpoint> ema;
  int t = 0;
  Checkpoint deployed;

  PipelineState(Checkpoint base, CheckpointBuffer store);
};

/// Seed used to train the expert of task t.
std::uint64_t task_train_seed(std::uint64_t train_seed, int t);

/// Starting weights for the next task (theta_0 while the history is empty).
Checkpoint init_weights(const PipelineState& state, const PipelineConfig& config);

/// Folds `new_expert` into the EMA accumulator and returns the new value.
///
/// WA: (1-w) * ema + w * expert. Task-vector techniques: merge(base = ema,
/// candidates = {expert}) with lambda = w. SLERP / Model Stock: merge against
/// theta_0 with candidates {ema, expert} and slerp weight w; while the
/// accumulator still equals theta_0 this reduces to the WA update.
Checkpoint update_ema(PipelineState& state, const Checkpoint& new_expert, const PipelineConfig& config);

/// Output model for the current task. FT: latest expert; EMA: the current
/// accumulator (call update_ema first); ALL: merge of every stored expert
/// against theta_0 with the configured technique and weighting.
Checkpoint deploy(PipelineState& state, const PipelineConfig& config);

using StepObserver = std::function<void(const MetricsRow&, const PipelineState&)>;

/// Runs tasks 1..config.task_count. Only experts are stored in the buffer;
/// initialization and deployed weights are never persisted.
MetricsTrajectory run_stream(const PipelineConfig& config, const ToyBench& bench, PipelineState& state,
                             const StepObserver& observer = {}, bool record_wall_time = false);

/// One model trained from theta_0 on the union of the first task_count tasks
/// for task_count times the per-task budget, measured like a deployed model.
MetricsRow multitask_reference(const PipelineConfig& config, const ToyBench& bench, const Checkpoint& theta_0);

}  // namespace chronomerge
