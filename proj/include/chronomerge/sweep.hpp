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

// Cartesian hyperparameter sweeps.
//
// Grid file layout:
//
//   techniques = TA, TIES        # order of emission
//   seeds = 0, 1, 2              # replicate seeds (default: the config seed)
//   defaults = true              # default grids for techniques without a section
//   pipeline.init = FT, EMA      # any other dotted key: axis shared by all techniques
//
//   [TIES]
//   lambda_scale = 0.1, 0.5      # bare names mean merge.<name>
//   prune_fraction = 0.2, 0.8
//
// Cells are enumerated technique-major, then axes in file order (last axis
// fastest), then seeds. Output rows follow that order whatever the
// execution concurrency.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chronomerge/experiment.hpp"

namespace chronomerge {

struct SweepAxis {
  std::string key;  // full configuration key
  std::vector<std::string> values;
};

struct SweepGrid {
  std::vector<SweepAxis> common;
  std::vector<std::pair<Technique, std::vector<SweepAxis>>> techniques;
  std::vector<std::uint64_t> seeds;
};

/// Default per-technique axes (WA and Model Stock have none).
std::vector<SweepAxis> default_technique_axes(Technique technique);

/// Every technique with its default axes.
SweepGrid default_grid();

SweepGrid parse_grid_text(std::string_view text);
SweepGrid load_grid(const std::filesystem::path& path);

using ParamList = std::vector<std::pair<std::string, std::string>>;  // sorted by key

struct SweepCell {
  int index = 0;
  Technique technique = Technique::WA;
  std::uint64_t seed = 0;
  ParamList params;
};

struct SweepRow {
  SweepCell cell;
  bool ok = false;
  std::string error;
  MetricsRow final_row;
};

/// Seed-mean of one (technique, hyperparameters) group.
struct SweepSelection {
  Technique technique = Technique::WA;
  ParamList params;
  double knowledge_accumulation = 0.0;
  double zero_shot_retention = 0.0;
  double geo_mean = 0.0;
  int seeds = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSelection> groups;  // successful groups, enumeration order
  std::optional<SweepSelection> best;
  std::vector<SweepSelection> best_per_technique;
};

struct SweepOptions {
  int jobs = 1;
  std::optional<std::filesystem::path> out_dir;  // sweep.csv, best.json, cells/<i>/
};

std::vector<SweepCell> enumerate_cells(const ExperimentConfig& base, const SweepGrid& grid);
ExperimentConfig cell_config(const ExperimentConfig& base, const SweepCell& cell);

SweepResult run_sweep(const ExperimentConfig& base, const SweepGrid& grid, const SweepOptions& options);

/// Aggregates rows into groups and selects the best (max seed-mean geo_mean,
/// ties to the lexicographically smallest technique + hyperparameters).
void select_best(SweepResult& result);

std::string params_label(Technique technique, const ParamList& params);

void write_sweep_csv(std::ostream& out, const SweepResult& result);
nlohmann::json best_json(const SweepResult& result);

}  // namespace chronomerge
