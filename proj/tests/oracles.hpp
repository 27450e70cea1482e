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

// Straightforward reference implementations used as test oracles. They work
// on plain double vectors keyed by tensor name and share no code with the
// library beyond the seed-expansion primitives.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "chronomerge/checkpoint.hpp"
#include "chronomerge/merge.hpp"
#include "chronomerge/random.hpp"
#include "chronomerge/toybench.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Flat = std::map<std::string, Vec>;

Flat flat(const chronomerge::Checkpoint& c);
std::vector<Flat> flat_all(const std::vector<chronomerge::Checkpoint>& cs);

/// Largest |a - b| over every element; infinity on structural mismatch.
double max_abs_diff(const chronomerge::Checkpoint& a, const Flat& b);

int layer_of(const std::string& name, int layers);
int layers_in(const Flat& f);

Vec recency(int n, chronomerge::Weighting scheme, bool reversed);

Flat weight_average(const std::vector<Flat>& models, const Vec& w);
Flat task_arithmetic(const Flat& base, const std::vector<Flat>& experts, double lam, const Vec& w);
Vec trim(const Vec& d, double prune_fraction);
Vec breadcrumbs(const Vec& d, double beta, double gamma);
Vec dare(const Vec& d, double p, std::uint64_t seed, std::size_t expert, std::size_t ordinal);
double lines_scale(int layer, int layers, double alpha, double beta);
Flat ties_family(const chronomerge::MergeConfig& cfg, const Flat& base, const std::vector<Flat>& experts, const Vec& w);
Flat slerp(const Flat& base, const Flat& a, const Flat& b, double lam);
Flat model_stock(const Flat& base, const Flat& a, const Flat& b);
Flat magmax(const Flat& base, const std::vector<Flat>& experts, double lam);

/// Dispatch mirroring merge(config, base, candidates).
Flat merge(const chronomerge::MergeConfig& cfg, const Flat& base, const std::vector<Flat>& candidates);

/// Random tensors named from {layer.1.weight, layer.1.bias, layer.2.weight, head}.
chronomerge::Checkpoint random_like_names(chronomerge::Rng& rng, const std::vector<std::string>& names,
                                          const std::vector<chronomerge::Shape>& shapes, double scale);

/// Loss of `params` on `samples`, then a central-difference gradient.
chronomerge::MlpParams numeric_gradient(const chronomerge::MlpParams& params, const chronomerge::TaskDataset& data,
                                        const std::vector<std::size_t>& samples, double eps);

}  // namespace oracle
