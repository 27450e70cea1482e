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

// Experiment configuration: INI-style text with `[section]` headers and
// `key = value` lines, flattened to `section.key`. Every key is typed and
// unknown keys are rejected with ConfigError.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chronomerge/pipeline.hpp"
#include "chronomerge/toybench.hpp"

namespace chronomerge {

struct ExperimentConfig {
  std::uint64_t seed = 0;
  BenchSpec bench;
  std::vector<int> hidden = {32, 32};
  TrainOptions pretrain = {400, 32, 0.05, 0.1, 1.0};
  PipelineConfig pipeline;
  std::filesystem::path output_dir;  // empty: default_output_root()
  bool disk_buffer = false;
  bool record_wall_time = false;

  // Per-purpose seeds, all derived from `seed`.
  std::uint64_t stream_seed() const;
  std::uint64_t pretrain_seed() const;
  std::uint64_t train_seed() const;
  std::uint64_t merge_seed() const;

  ModelSpec model_spec() const;

  /// PipelineConfig with task count and seeds filled in.
  PipelineConfig resolved_pipeline() const;

  /// BenchSpec with the stream seed filled in.
  BenchSpec resolved_bench() const;

  void validate() const;
};

/// $CHRONOMERGE_OUT, or "chronomerge_out" when unset.
std::filesystem::path default_output_root();

/// All recognised keys, in emission order.
const std::vector<std::string>& config_keys();

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const ExperimentConfig& config, std::string_view key);

/// Applies `key=value`.
void apply_override(ExperimentConfig& config, std::string_view assignment);

/// Parses INI text on top of `base`.
ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig base = {});

/// INI file, or JSON: either a flat {key: value} object or a summary.json
/// carrying a "config" member.
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

/// INI serialization of every key.
std::string config_to_text(const ExperimentConfig& config);

/// Splits "a, b ,c" into trimmed items.
std::vector<std::string> split_list(std::string_view s);
std::string trim(std::string_view s);

}  // namespace chronomerge
