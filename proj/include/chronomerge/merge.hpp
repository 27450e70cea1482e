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

// Checkpoint merging techniques.
//
// All functions are pure. Arithmetic is carried out in 64-bit and rounded to
// 32-bit once per output element. Task-vector techniques work tensor by
// tensor (trimming, sparsification and sign election never look across
// tensors), which is what lets `merge_buffer` stream a stored expert set one
// tensor name at a time.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chronomerge/buffer.hpp"
#include "chronomerge/checkpoint.hpp"

namespace chronomerge {

enum class Technique { WA, SLERP, TA, TIES, DARE_TIES, BREADCRUMBS_TIES, MODEL_STOCK, MAGMAX, LINES_TIES };

enum class Weighting { UNIFORM, LINEAR, SQRT, QUADRATIC, CUBIC, FIFTH, TENTH, EXP, LOG };

std::string_view to_string(Technique t);
std::string_view to_string(Weighting w);
/// Case-insensitive; accepts the enum spelling plus a few aliases such as
/// "dare-ties". Returns nullopt for unknown names.
std::optional<Technique> parse_technique(std::string_view s);
std::optional<Weighting> parse_weighting(std::string_view s);

/// Techniques that merge exactly two candidates at a time.
bool is_pairwise(Technique t);
/// Techniques whose candidate coefficients come from a WeightVector.
bool uses_weights(Technique t);

/// Technique identifier plus every hyperparameter any technique may read.
/// Only the fields relevant to `technique` are consulted.
struct MergeConfig {
  Technique technique = Technique::WA;
  double lambda_scale = 1.0;     // TA-family scaling, (0, 1]
  double slerp_weight = 0.5;     // [0, 1]
  double prune_fraction = 0.0;   // TIES-family trim fraction, [0, 1]
  double dare_p = 0.0;           // [0, 1)
  double bread_beta = 0.1;       // smallest-magnitude tail, [0, 0.5)
  double bread_gamma = 0.05;     // largest-magnitude tail, [0, 0.5)
  double lines_alpha = 0.5;
  double lines_beta = 0.5;
  double ema_weight = 0.5;       // [0, 1]
  Weighting weighting = Weighting::UNIFORM;
  bool reversed = false;
  std::uint64_t rng_seed = 0;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;
};

/// Non-negative merge coefficients, one per candidate, summing to 1 +- 1e-9.
class WeightVector {
 public:
  /// Throws WeightMismatch on negative entries or a bad sum.
  explicit WeightVector(std::vector<double> coefficients);
  static WeightVector uniform(std::size_t n);

  std::size_t size() const { return c_.size(); }
  double operator[](std::size_t i) const { return c_[i]; }
  std::span<const double> values() const { return c_; }

 private:
  std::vector<double> c_;
};

/// Recency-biased coefficients for n candidates ordered oldest first.
/// Raw values i, sqrt(i), i^2, i^3, i^5, i^10, 2^(i-1), ln(i+1) for
/// i = 1..n, normalized; `reversed` flips the list so older entries weigh more.
WeightVector recency_weights(int n, Weighting scheme, bool reversed = false);

// --- Techniques --------------------------------------------------------------

Checkpoint weight_average(std::span<const Checkpoint> models, const WeightVector& weights);

/// Spherical interpolation of the two task vectors a-base and b-base, with one
/// angle over all tensors. Falls back to linear interpolation of the task
/// vectors when the angle is below 1e-6 rad (or within 1e-6 of pi).
Checkpoint slerp(const Checkpoint& base, const Checkpoint& a, const Checkpoint& b, double lam);

/// base + lam * sum_i w_i (experts_i - base)
Checkpoint task_arithmetic(const Checkpoint& base, std::span<const Checkpoint> experts, double lam,
                           const WeightVector& weights);

/// Per tensor: keep the largest (1 - prune_fraction) share of each task
/// vector by magnitude, elect a sign per element from the summed trimmed
/// deltas (positive on an exact tie), average the agreeing entries with the
/// given weights and add lam times the result to base.
Checkpoint ties_merge(const Checkpoint& base, std::span<const Checkpoint> experts, double lam, double prune_fraction,
                      const WeightVector& weights);

/// Zeroes each element with probability p and rescales survivors by
/// 1/(1-p). The mask of element j of the k-th tensor (name order) is a pure
/// function of (rng_seed, k, j).
TaskVector dare_sparsify(const TaskVector& delta, double p, std::uint64_t rng_seed);

/// Per tensor, zeroes the floor(beta*n) smallest- and floor(gamma*n)
/// largest-magnitude entries.
TaskVector breadcrumbs_sparsify(const TaskVector& delta, double beta, double gamma);

/// Interpolates between the expert midpoint and base with the per-layer
/// ratio r = 2cos(omega)/(1+cos(omega)), omega being the angle between the
/// two task vectors restricted to that layer.
Checkpoint model_stock(const Checkpoint& base, const Checkpoint& a, const Checkpoint& b);

/// base + lam * (per element, the delta with the largest magnitude).
Checkpoint magmax_merge(const Checkpoint& base, std::span<const Checkpoint> experts, double lam);

/// Scales every tensor of layer l by alpha + beta*(l-1)/(L-1) (alpha when L=1).
TaskVector lines_rescale(const TaskVector& delta, int layer_count, double alpha, double beta);
/// alpha + beta*(l-1)/(L-1)
double lines_layer_scale(int layer, int layer_count, double alpha, double beta);

/// Dispatches to the configured technique. SLERP and MODEL_STOCK need exactly
/// two candidates (ArityError otherwise). Base is ignored by WA.
Checkpoint merge(const MergeConfig& config, const Checkpoint& base, std::span<const Checkpoint> candidates);

/// Reduces any number of candidates with a pairwise technique left to right:
/// acc = c1; acc = merge(acc, c_i) for i >= 2. One candidate is returned as is.
Checkpoint fold_pairwise(const MergeConfig& config, const Checkpoint& base, std::span<const Checkpoint> candidates);

/// Merges every entry of `buffer` against `base`. Per-tensor techniques read
/// one tensor name at a time from the buffer; pairwise techniques fold.
/// Produces the same bits as `merge`/`fold_pairwise` over the loaded entries.
Checkpoint merge_buffer(const MergeConfig& config, const Checkpoint& base, const CheckpointBuffer& buffer);

}  // namespace chronomerge
