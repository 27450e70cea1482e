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

#include "chronomerge/pipeline.hpp"

#include <cctype>
#include <chrono>
#include <string>

#include "chronomerge/errors.hpp"
#include "chronomerge/random.hpp"

namespace chronomerge {

namespace {

constexpr std::uint64_t kMultitaskStream = 0x4D554C5449ull;

std::string upper(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

std::string_view to_string(InitProtocol p) {
  switch (p) {
    case InitProtocol::ZS: return "ZS";
    case InitProtocol::FT: return "FT";
    case InitProtocol::EMA: return "EMA";
  }
  return "?";
}

std::string_view to_string(DeployProtocol p) {
  switch (p) {
    case DeployProtocol::FT: return "FT";
    case DeployProtocol::EMA: return "EMA";
    case DeployProtocol::ALL: return "ALL";
  }
  return "?";
}

std::optional<InitProtocol> parse_init_protocol(std::string_view s) {
  const auto u = upper(s);
  if (u == "ZS") return InitProtocol::ZS;
  if (u == "FT") return InitProtocol::FT;
  if (u == "EMA") return InitProtocol::EMA;
  return std::nullopt;
}

std::optional<DeployProtocol> parse_deploy_protocol(std::string_view s) {
  const auto u = upper(s);
  if (u == "FT") return DeployProtocol::FT;
  if (u == "EMA") return DeployProtocol::EMA;
  if (u == "ALL") return DeployProtocol::ALL;
  return std::nullopt;
}

void PipelineConfig::validate() const {
  if (init == InitProtocol::ZS && deploy == DeployProtocol::FT)
    throw ConfigError("pipeline.init = ZS with pipeline.deploy = FT is an incompatible protocol pair");
  if (task_count < 1) throw ConfigError("pipeline.task_count must be >= 1");
  if (!(replay_fraction >= 0.0 && replay_fraction <= 1.0)) throw ConfigError("pipeline.replay_fraction must lie in [0, 1]");
  if (train.steps < 0) throw ConfigError("train.steps must be >= 0");
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(train.peak_lr > 0.0)) throw ConfigError("train.peak_lr must be > 0");
  if (!(train.warmup_fraction >= 0.0 && train.warmup_fraction <= 1.0))
    throw ConfigError("train.warmup_fraction must lie in [0, 1]");
  if (!(train.clip_norm > 0.0)) throw ConfigError("train.clip_norm must be > 0");
  merge.validate();
}

bool ema_active(const PipelineConfig& config) {
  return config.init == InitProtocol::EMA || config.deploy == DeployProtocol::EMA;
}

PipelineState::PipelineState(Checkpoint base, CheckpointBuffer store)
    : theta_0(std::move(base)), buffer(std::move(store)) {}

std::uint64_t task_train_seed(std::uint64_t train_seed, int t) {
  return derive_seed(train_seed, static_cast<std::uint64_t>(t));
}

Checkpoint init_weights(const PipelineState& state, const PipelineConfig& config) {
  switch (config.init) {
    case InitProtocol::ZS:
      return state.theta_0;
    case InitProtocol::FT:
      return state.buffer.empty() ? state.theta_0 : state.buffer.latest();
    case InitProtocol::EMA:
      return state.ema ? *state.ema : state.theta_0;
  }
  return state.theta_0;
}

Checkpoint update_ema(PipelineState& state, const Checkpoint& new_expert, const PipelineConfig& config) {
  require_same_structure(state.theta_0, new_expert);
  const Checkpoint current = state.ema ? *state.ema : state.theta_0;
  const double w = config.merge.ema_weight;
  const Technique technique = config.merge.technique;

  auto weighted_pair = [&] {
    const Checkpoint pair[2] = {current, new_expert};
    return weight_average(pair, WeightVector({1.0 - w, w}));
  };

  Checkpoint next;
  if (technique == Technique::WA) {
    next = weighted_pair();
  } else if (is_pairwise(technique)) {
    MergeConfig cfg = config.merge;
    cfg.slerp_weight = w;
    const Checkpoint pair[2] = {current, new_expert};
    try {
      next = merge(cfg, state.theta_0, pair);
    } catch (const ZeroTaskVector&) {
      next = weighted_pair();
    }
  } else if (w == 0.0) {
    next = current;
  } else {
    MergeConfig cfg = config.merge;
    cfg.lambda_scale = w;
    cfg.rng_seed = derive_seed(config.merge.rng_seed, static_cast<std::uint64_t>(state.buffer.size()) << 1);
    const Checkpoint one[1] = {new_expert};
    next = merge(cfg, current, one);
  }
  state.ema = next;
  return next;
}

Checkpoint deploy(PipelineState& state, const PipelineConfig& config) {
  if (state.buffer.empty()) throw EmptyBuffer("nothing to deploy: the expert buffer is empty");
  switch (config.deploy) {
    case DeployProtocol::FT:
      state.deployed = state.buffer.latest();
      break;
    case DeployProtocol::EMA:
      state.deployed = state.ema ? *state.ema : state.theta_0;
      break;
    case DeployProtocol::ALL: {
      MergeConfig cfg = config.merge;
      cfg.rng_seed = derive_seed(config.merge.rng_seed, (static_cast<std::uint64_t>(state.buffer.size()) << 1) | 1);
      state.deployed = merge_buffer(cfg, state.theta_0, state.buffer);
      break;
    }
  }
  return state.deployed;
}

MetricsTrajectory run_stream(const PipelineConfig& config, const ToyBench& bench, PipelineState& state,
                             const StepObserver& observer, bool record_wall_time) {
  config.validate();
  if (static_cast<int>(bench.adaptation_tasks.size()) < config.task_count)
    throw ConfigError("pipeline.task_count exceeds the bench's adaptation tasks");
  if (!state.buffer.empty()) throw ConfigError("run_stream needs an empty expert buffer");

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  MetricsTrajectory rows;
  TaskDataset replay_pool;
  replay_pool.input_dim = bench.input_dim;

  for (int t = 1; t <= config.task_count; ++t) {
    state.t = t;
    const Checkpoint init = init_weights(state, config);

    ReplaySource replay;
    if (config.replay && t > 1) {
      replay.pool = &replay_pool;
      replay.fraction = config.replay_fraction;
    }
    Checkpoint expert = train(init, bench.adaptation_tasks[static_cast<std::size_t>(t - 1)], config.train,
                              task_train_seed(config.train_seed, t), replay);
    expert.meta()["task_id"] = std::to_string(t);

    state.buffer.append(expert);
    if (ema_active(config)) update_ema(state, expert, config);
    const Checkpoint& deployed = deploy(state, config);

    const double elapsed =
        record_wall_time ? std::chrono::duration<double>(clock::now() - start).count() : 0.0;
    rows.push_back(measure(deployed, bench, t, elapsed));
    if (observer) observer(rows.back(), state);

    if (config.replay) {
      const auto& cur = bench.adaptation_tasks[static_cast<std::size_t>(t - 1)];
      replay_pool.inputs.insert(replay_pool.inputs.end(), cur.inputs.begin(), cur.inputs.end());
      replay_pool.labels.insert(replay_pool.labels.end(), cur.labels.begin(), cur.labels.end());
    }
  }
  return rows;
}

MetricsRow multitask_reference(const PipelineConfig& config, const ToyBench& bench, const Checkpoint& theta_0) {
  if (static_cast<int>(bench.adaptation_tasks.size()) < config.task_count)
    throw ConfigError("pipeline.task_count exceeds the bench's adaptation tasks");
  const auto all = pool(std::span(bench.adaptation_tasks).first(static_cast<std::size_t>(config.task_count)));
  TrainOptions opt = config.train;
  opt.steps = config.train.steps * config.task_count;
  const auto model = train(theta_0, all, opt, derive_seed(config.train_seed, kMultitaskStream));
  return measure(model, bench, config.task_count);
}

}  // namespace chronomerge
