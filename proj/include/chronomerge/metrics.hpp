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

#include <iosfwd>
#include <string>
#include <vector>

#include "chronomerge/checkpoint.hpp"
#include "chronomerge/toybench.hpp"

namespace chronomerge {

struct MetricsRow {
  int t = 0;
  double knowledge_accumulation = 0.0;  // A_KA
  double zero_shot_retention = 0.0;     // A_ZS
  double geo_mean = 0.0;
  double wall_time = 0.0;  // seconds
};

using MetricsTrajectory = std::vector<MetricsRow>;

/// Mean accuracy over every adaptation task of the bench, seen or not; the
/// denominator never changes with t. Requires t >= 1.
double knowledge_accumulation(const Checkpoint& model, const ToyBench& bench, int t);

/// Mean accuracy over the holdout tasks. Throws EmptyHoldout without any.
double zero_shot_retention(const Checkpoint& model, const ToyBench& bench);

/// sqrt(a * b)
double geometric_mean(double a, double b);

/// Evaluates one deployed model at task t.
MetricsRow measure(const Checkpoint& model, const ToyBench& bench, int t, double wall_time = 0.0);

/// `t,A_KA,A_ZS,geo_mean,wall_time` with fixed six-decimal, locale-free numbers.
void write_trajectory_csv(std::ostream& out, const MetricsTrajectory& rows);
std::string format_fixed6(double v);

}  // namespace chronomerge
