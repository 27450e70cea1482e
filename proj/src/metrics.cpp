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

#include "chronomerge/metrics.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "chronomerge/errors.hpp"

namespace chronomerge {

double knowledge_accumulation(const Checkpoint& model, const ToyBench& bench, int t) {
  if (t < 1) throw std::invalid_argument("knowledge accumulation is defined for t >= 1");
  if (bench.adaptation_tasks.empty()) throw EmptyDataset("bench has no adaptation tasks");
  double sum = 0.0;
  for (const auto& task : bench.adaptation_tasks) sum += evaluate(model, task);
  return sum / static_cast<double>(bench.adaptation_tasks.size());
}

double zero_shot_retention(const Checkpoint& model, const ToyBench& bench) {
  if (bench.holdout_tasks.empty()) throw EmptyHoldout("bench has no holdout tasks");
  double sum = 0.0;
  for (const auto& task : bench.holdout_tasks) sum += evaluate(model, task);
  return sum / static_cast<double>(bench.holdout_tasks.size());
}

double geometric_mean(double a, double b) { return std::sqrt(a * b); }

MetricsRow measure(const Checkpoint& model, const ToyBench& bench, int t, double wall_time) {
  MetricsRow row;
  row.t = t;
  row.knowledge_accumulation = knowledge_accumulation(model, bench, t);
  row.zero_shot_retention = zero_shot_retention(model, bench);
  row.geo_mean = geometric_mean(row.knowledge_accumulation, row.zero_shot_retention);
  row.wall_time = wall_time;
  return row;
}

std::string format_fixed6(double v) {
  // std::to_chars ignores the global locale.
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  if (ec != std::errc()) return "nan";
  std::string s(buf, ptr);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

void write_trajectory_csv(std::ostream& out, const MetricsTrajectory& rows) {
  out << "t,A_KA,A_ZS,geo_mean,wall_time\n";
  for (const auto& r : rows) {
    out << r.t << ',' << format_fixed6(r.knowledge_accumulation) << ',' << format_fixed6(r.zero_shot_retention) << ','
        << format_fixed6(r.geo_mean) << ',' << format_fixed6(r.wall_time) << '\n';
  }
}

}  // namespace chronomerge
