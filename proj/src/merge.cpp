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

#include "chronomerge/merge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "chronomerge/errors.hpp"
#include "chronomerge/kernels.hpp"
#include "chronomerge/random.hpp"

namespace chronomerge {

namespace {

constexpr double kZeroNorm = 1e-12;
constexpr double kDegenerateAngle = 1e-6;

struct Names {
  Technique t;
  std::string_view name;
};
constexpr Names kTechniqueNames[] = {
    {Technique::WA, "WA"},
    {Technique::SLERP, "SLERP"},
    {Technique::TA, "TA"},
    {Technique::TIES, "TIES"},
    {Technique::DARE_TIES, "DARE_TIES"},
    {Technique::BREADCRUMBS_TIES, "BREADCRUMBS_TIES"},
    {Technique::MODEL_STOCK, "MODEL_STOCK"},
    {Technique::MAGMAX, "MAGMAX"},
    {Technique::LINES_TIES, "LINES_TIES"},
};

constexpr std::pair<Weighting, std::string_view> kWeightingNames[] = {
    {Weighting::UNIFORM, "UNIFORM"}, {Weighting::LINEAR, "LINEAR"}, {Weighting::SQRT, "SQRT"},
    {Weighting::QUADRATIC, "QUADRATIC"}, {Weighting::CUBIC, "CUBIC"}, {Weighting::FIFTH, "FIFTH"},
    {Weighting::TENTH, "TENTH"}, {Weighting::EXP, "EXP"}, {Weighting::LOG, "LOG"},
};

std::string normalize_name(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

std::size_t tail_count(double fraction, std::size_t n) {
  // The epsilon absorbs representation error such as 0.7 * 10 = 6.9999...
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

// --- per-tensor delta transforms (in place, 64-bit) ----------------------------

// Keeps the n - floor(prune*n) largest-magnitude entries; ties in magnitude
// keep the lower index.
void trim_top_k(std::vector<double>& d, double prune_fraction) {
  const std::size_t n = d.size();
  const std::size_t pruned = std::min(n, tail_count(prune_fraction, n));
  if (pruned == 0) return;
  if (pruned == n) {
    std::fill(d.begin(), d.end(), 0.0);
    return;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const auto keep = static_cast<std::ptrdiff_t>(n - pruned);
  std::nth_element(idx.begin(), idx.begin() + keep, idx.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::fabs(d[a]), mb = std::fabs(d[b]);
    return ma != mb ? ma > mb : a < b;
  });
  for (auto it = idx.begin() + keep; it != idx.end(); ++it) d[*it] = 0.0;
}

void breadcrumbs_inplace(std::vector<double>& d, double beta, double gamma) {
  const std::size_t n = d.size();
  const std::size_t low = tail_count(beta, n);
  const std::size_t high = tail_count(gamma, n);
  if (low == 0 && high == 0) return;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::fabs(d[a]), mb = std::fabs(d[b]);
    return ma != mb ? ma < mb : a < b;
  });
  for (std::size_t k = 0; k < low && k < n; ++k) d[idx[k]] = 0.0;
  for (std::size_t k = 0; k < high && k < n; ++k) d[idx[n - 1 - k]] = 0.0;
}

void dare_inplace(std::vector<double>& d, double p, std::uint64_t seed, std::size_t ordinal) {
  if (p == 0.0) return;
  const std::uint64_t tensor_key = derive_seed(seed, ordinal);
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t j = 0; j < d.size(); ++j) {
    const bool drop = to_unit(derive_seed(tensor_key, j)) < p;
    d[j] = drop ? 0.0 : d[j] * keep_scale;
  }
}

std::vector<double> delta_of(std::span<const float> expert, std::span<const float> base) {
  std::vector<double> d(expert.size());
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = static_cast<double>(expert[j]) - static_cast<double>(base[j]);
  return d;
}

void validate_probability(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw InvalidProbability("DARE probability must lie in [0, 1), got " + std::to_string(p));
}

void validate_thresholds(double beta, double gamma) {
  if (!(beta >= 0.0 && gamma >= 0.0 && beta + gamma < 1.0))
    throw InvalidThresholds("breadcrumbs thresholds need beta, gamma >= 0 and beta + gamma < 1");
}

// --- per-tensor merge core ------------------------------------------------------

struct TensorContext {
  std::size_t ordinal = 0;  // position of the tensor in name order
  int layer = 1;
  int layers = 1;
};

struct TiesOptions {
  double lam = 1.0;
  double prune_fraction = 0.0;
  bool dare = false;
  double dare_p = 0.0;
  std::uint64_t seed = 0;
  bool breadcrumbs = false;
  double beta = 0.0;
  double gamma = 0.0;
  bool lines = false;
  double lines_alpha = 0.0;
  double lines_beta = 0.0;
};

Tensor ties_tensor(const Tensor& base, std::span<const std::span<const float>> cands, std::span<const double> w,
                   const TiesOptions& opt, const TensorContext& ctx) {
  std::vector<std::vector<double>> deltas;
  deltas.reserve(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    auto d = delta_of(cands[i], base.view());
    if (opt.dare) dare_inplace(d, opt.dare_p, derive_seed(opt.seed, i), ctx.ordinal);
    if (opt.breadcrumbs) breadcrumbs_inplace(d, opt.beta, opt.gamma);
    if (opt.lines) {
      const double s = lines_layer_scale(ctx.layer, ctx.layers, opt.lines_alpha, opt.lines_beta);
      for (auto& x : d) x *= s;
    }
    trim_top_k(d, opt.prune_fraction);
    deltas.push_back(std::move(d));
  }
  std::vector<std::span<const double>> rows(deltas.begin(), deltas.end());
  Tensor out(base.shape);
  kernels::ties_combine(base.view(), rows, w, opt.lam, out.view());
  return out;
}

TiesOptions ties_options(const MergeConfig& cfg, double lam) {
  TiesOptions opt;
  opt.lam = lam;
  opt.prune_fraction = cfg.prune_fraction;
  switch (cfg.technique) {
    case Technique::DARE_TIES:
      opt.dare = true;
      opt.dare_p = cfg.dare_p;
      opt.seed = cfg.rng_seed;
      break;
    case Technique::BREADCRUMBS_TIES:
      opt.breadcrumbs = true;
      opt.beta = cfg.bread_beta;
      opt.gamma = cfg.bread_gamma;
      break;
    case Technique::LINES_TIES:
      opt.lines = true;
      opt.lines_alpha = cfg.lines_alpha;
      opt.lines_beta = cfg.lines_beta;
      break;
    default:
      break;
  }
  return opt;
}

// One output tensor for the techniques that never look across tensors.
Tensor merge_tensor(const MergeConfig& cfg, double lam, const Tensor& base, std::span<const std::span<const float>> cands,
                    std::span<const double> w, const TensorContext& ctx) {
  Tensor out(base.shape);
  switch (cfg.technique) {
    case Technique::WA:
      kernels::weighted_sum(cands, w, out.view());
      return out;
    case Technique::TA:
      kernels::weighted_delta_sum(base.view(), cands, w, lam, out.view());
      return out;
    case Technique::MAGMAX: {
      std::vector<std::vector<double>> deltas;
      for (const auto& c : cands) deltas.push_back(delta_of(c, base.view()));
      std::vector<std::span<const double>> rows(deltas.begin(), deltas.end());
      kernels::magmax_combine(base.view(), rows, lam, out.view());
      return out;
    }
    case Technique::TIES:
    case Technique::DARE_TIES:
    case Technique::BREADCRUMBS_TIES:
    case Technique::LINES_TIES:
      return ties_tensor(base, cands, w, ties_options(cfg, lam), ctx);
    default:
      throw std::logic_error("merge_tensor called with a pairwise technique");
  }
}

void require_all_match(const Checkpoint& base, std::span<const Checkpoint> models) {
  for (const auto& m : models) require_same_structure(base, m);
}

// Runs a per-tensor technique over in-memory checkpoints.
Checkpoint merge_per_tensor(const MergeConfig& cfg, double lam, const Checkpoint& base, std::span<const Checkpoint> cands,
                            std::span<const double> w) {
  const int layers = layer_count(base);
  Checkpoint out;
  std::size_t ordinal = 0;
  std::vector<std::span<const float>> rows(cands.size());
  for (const auto& [name, bt] : base) {
    for (std::size_t i = 0; i < cands.size(); ++i) rows[i] = cands[i].at(name).view();
    const TensorContext ctx{ordinal++, layer_of(name, layers), layers};
    out.set(name, merge_tensor(cfg, lam, bt, rows, w, ctx));
  }
  return out;
}

// Flattened task vectors of a and b against base, one double vector per tensor.
struct PairDeltas {
  std::vector<std::vector<double>> d1, d2;
};

PairDeltas pair_deltas(const Checkpoint& base, const Checkpoint& a, const Checkpoint& b) {
  PairDeltas p;
  for (const auto& [name, bt] : base) {
    p.d1.push_back(delta_of(a.at(name).view(), bt.view()));
    p.d2.push_back(delta_of(b.at(name).view(), bt.view()));
  }
  return p;
}

double angle_cos(double dot12, double n1sq, double n2sq) {
  const double c = dot12 / (std::sqrt(n1sq) * std::sqrt(n2sq));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

// --- names -----------------------------------------------------------------------

std::string_view to_string(Technique t) {
  for (const auto& n : kTechniqueNames)
    if (n.t == t) return n.name;
  return "?";
}

std::string_view to_string(Weighting w) {
  for (const auto& [k, v] : kWeightingNames)
    if (k == w) return v;
  return "?";
}

std::optional<Technique> parse_technique(std::string_view s) {
  auto n = normalize_name(s);
  if (n == "WEIGHT_AVERAGE" || n == "AVERAGING") n = "WA";
  if (n == "TASK_ARITHMETIC") n = "TA";
  if (n == "BREADCRUMBS") n = "BREADCRUMBS_TIES";
  if (n == "LINES") n = "LINES_TIES";
  if (n == "DARE") n = "DARE_TIES";
  if (n == "STOCK") n = "MODEL_STOCK";
  for (const auto& t : kTechniqueNames)
    if (t.name == n) return t.t;
  return std::nullopt;
}

std::optional<Weighting> parse_weighting(std::string_view s) {
  auto n = normalize_name(s);
  if (n == "EXPONENTIAL") n = "EXP";
  if (n == "LOGARITHMIC") n = "LOG";
  for (const auto& [k, v] : kWeightingNames)
    if (v == n) return k;
  return std::nullopt;
}

bool is_pairwise(Technique t) { return t == Technique::SLERP || t == Technique::MODEL_STOCK; }

bool uses_weights(Technique t) {
  switch (t) {
    case Technique::WA:
    case Technique::TA:
    case Technique::TIES:
    case Technique::DARE_TIES:
    case Technique::BREADCRUMBS_TIES:
    case Technique::LINES_TIES:
      return true;
    default:
      return false;
  }
}

void MergeConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& range, double v) {
    throw ConfigError("merge." + field + " = " + std::to_string(v) + " is outside " + range);
  };
  if (!(lambda_scale > 0.0 && lambda_scale <= 1.0)) fail("lambda_scale", "(0, 1]", lambda_scale);
  if (!(slerp_weight >= 0.0 && slerp_weight <= 1.0)) fail("slerp_weight", "[0, 1]", slerp_weight);
  if (!(prune_fraction >= 0.0 && prune_fraction <= 1.0)) fail("prune_fraction", "[0, 1]", prune_fraction);
  if (!(dare_p >= 0.0 && dare_p < 1.0)) fail("dare_p", "[0, 1)", dare_p);
  if (!(bread_beta >= 0.0 && bread_beta < 0.5)) fail("bread_beta", "[0, 0.5)", bread_beta);
  if (!(bread_gamma >= 0.0 && bread_gamma < 0.5)) fail("bread_gamma", "[0, 0.5)", bread_gamma);
  if (!std::isfinite(lines_alpha)) fail("lines_alpha", "finite values", lines_alpha);
  if (!std::isfinite(lines_beta)) fail("lines_beta", "finite values", lines_beta);
  if (!(ema_weight >= 0.0 && ema_weight <= 1.0)) fail("ema_weight", "[0, 1]", ema_weight);
}

// --- weights ---------------------------------------------------------------------

WeightVector::WeightVector(std::vector<double> coefficients) : c_(std::move(coefficients)) {
  if (c_.empty()) throw WeightMismatch("weight vector is empty");
  double sum = 0.0;
  for (double v : c_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw WeightMismatch("merge weights must be finite and non-negative");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw WeightMismatch("merge weights sum to " + std::to_string(sum) + ", not 1");
}

WeightVector WeightVector::uniform(std::size_t n) {
  if (n == 0) throw EmptyInput("cannot build weights for zero candidates");
  return WeightVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

WeightVector recency_weights(int n, Weighting scheme, bool reversed) {
  if (n < 1) throw InvalidCount("recency weights need at least one candidate, got " + std::to_string(n));
  if (scheme == Weighting::UNIFORM) return WeightVector::uniform(static_cast<std::size_t>(n));
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    const double i = k;
    double raw = 0.0;
    switch (scheme) {
      case Weighting::LINEAR: raw = i; break;
      case Weighting::SQRT: raw = std::sqrt(i); break;
      case Weighting::QUADRATIC: raw = i * i; break;
      case Weighting::CUBIC: raw = i * i * i; break;
      case Weighting::FIFTH: raw = std::pow(i, 5); break;
      case Weighting::TENTH: raw = std::pow(i, 10); break;
      // 2^(i-1) scaled by 2^-(n-1): same ratios, no overflow for long streams.
      case Weighting::EXP: raw = std::ldexp(1.0, k - n); break;
      case Weighting::LOG: raw = std::log(i + 1.0); break;
      case Weighting::UNIFORM: raw = 1.0; break;
    }
    v[static_cast<std::size_t>(k - 1)] = raw;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  for (double& x : v) x /= sum;
  if (reversed) std::reverse(v.begin(), v.end());
  return WeightVector(std::move(v));
}

// --- techniques ------------------------------------------------------------------

Checkpoint weight_average(std::span<const Checkpoint> models, const WeightVector& weights) {
  if (models.empty()) throw EmptyInput("weight_average needs at least one model");
  if (weights.size() != models.size())
    throw WeightMismatch("got " + std::to_string(weights.size()) + " weights for " + std::to_string(models.size()) +
                         " models");
  require_all_match(models.front(), models);
  MergeConfig cfg;
  cfg.technique = Technique::WA;
  return merge_per_tensor(cfg, 1.0, models.front(), models, weights.values());
}

Checkpoint slerp(const Checkpoint& base, const Checkpoint& a, const Checkpoint& b, double lam) {
  require_same_structure(base, a);
  require_same_structure(base, b);
  if (!(lam >= 0.0 && lam <= 1.0)) throw ConfigError("SLERP weight must lie in [0, 1]");
  const auto p = pair_deltas(base, a, b);
  double n1 = 0.0, n2 = 0.0, d12 = 0.0;
  for (std::size_t k = 0; k < p.d1.size(); ++k) {
    n1 += kernels::dot(p.d1[k], p.d1[k]);
    n2 += kernels::dot(p.d2[k], p.d2[k]);
    d12 += kernels::dot(p.d1[k], p.d2[k]);
  }
  if (std::sqrt(n1) < kZeroNorm || std::sqrt(n2) < kZeroNorm)
    throw ZeroTaskVector("SLERP needs two non-zero task vectors (a candidate equals the base)");
  const double omega = std::acos(angle_cos(d12, n1, n2));
  double c1, c2;
  if (omega < kDegenerateAngle || std::numbers::pi - omega < kDegenerateAngle) {
    c1 = 1.0 - lam;
    c2 = lam;
  } else {
    const double s = std::sin(omega);
    c1 = std::sin((1.0 - lam) * omega) / s;
    c2 = std::sin(lam * omega) / s;
  }
  Checkpoint out;
  std::size_t k = 0;
  for (const auto& [name, bt] : base) {
    Tensor t(bt.shape);
    kernels::two_term_combine(bt.view(), p.d1[k], c1, p.d2[k], c2, t.view());
    out.set(name, std::move(t));
    ++k;
  }
  return out;
}

Checkpoint task_arithmetic(const Checkpoint& base, std::span<const Checkpoint> experts, double lam,
                           const WeightVector& weights) {
  if (experts.empty()) throw EmptyInput("task_arithmetic needs at least one expert");
  if (weights.size() != experts.size()) throw WeightMismatch("weight count does not match expert count");
  require_all_match(base, experts);
  MergeConfig cfg;
  cfg.technique = Technique::TA;
  return merge_per_tensor(cfg, lam, base, experts, weights.values());
}

Checkpoint ties_merge(const Checkpoint& base, std::span<const Checkpoint> experts, double lam, double prune_fraction,
                      const WeightVector& weights) {
  if (experts.empty()) throw EmptyInput("ties_merge needs at least one expert");
  if (weights.size() != experts.size()) throw WeightMismatch("weight count does not match expert count");
  if (!(prune_fraction >= 0.0 && prune_fraction <= 1.0)) throw ConfigError("prune fraction must lie in [0, 1]");
  require_all_match(base, experts);
  MergeConfig cfg;
  cfg.technique = Technique::TIES;
  cfg.prune_fraction = prune_fraction;
  return merge_per_tensor(cfg, lam, base, experts, weights.values());
}

TaskVector dare_sparsify(const TaskVector& delta, double p, std::uint64_t rng_seed) {
  validate_probability(p);
  TaskVector out;
  out.base_id = delta.base_id;
  std::size_t ordinal = 0;
  for (const auto& [name, t] : delta.deltas) {
    std::vector<double> d(t.data.begin(), t.data.end());
    dare_inplace(d, p, rng_seed, ordinal++);
    out.deltas.set(name, Tensor(t.shape, std::vector<float>(d.begin(), d.end())));
  }
  return out;
}

TaskVector breadcrumbs_sparsify(const TaskVector& delta, double beta, double gamma) {
  validate_thresholds(beta, gamma);
  TaskVector out;
  out.base_id = delta.base_id;
  for (const auto& [name, t] : delta.deltas) {
    std::vector<double> d(t.data.begin(), t.data.end());
    breadcrumbs_inplace(d, beta, gamma);
    out.deltas.set(name, Tensor(t.shape, std::vector<float>(d.begin(), d.end())));
  }
  return out;
}

Checkpoint model_stock(const Checkpoint& base, const Checkpoint& a, const Checkpoint& b) {
  require_same_structure(base, a);
  require_same_structure(base, b);
  const auto p = pair_deltas(base, a, b);
  const int layers = layer_count(base);

  struct LayerDots {
    double n1 = 0, n2 = 0, d12 = 0;
  };
  std::map<int, LayerDots> per_layer;
  double total1 = 0.0, total2 = 0.0;
  std::size_t k = 0;
  for (const auto& [name, _] : base) {
    auto& ld = per_layer[layer_of(name, layers)];
    const double s1 = kernels::dot(p.d1[k], p.d1[k]);
    const double s2 = kernels::dot(p.d2[k], p.d2[k]);
    ld.n1 += s1;
    ld.n2 += s2;
    ld.d12 += kernels::dot(p.d1[k], p.d2[k]);
    total1 += s1;
    total2 += s2;
    ++k;
  }
  if (std::sqrt(total1) < kZeroNorm || std::sqrt(total2) < kZeroNorm)
    throw ZeroTaskVector("Model Stock needs two non-zero task vectors (a candidate equals the base)");

  std::map<int, double> ratio;
  for (const auto& [layer, ld] : per_layer) {
    // A layer left untouched by one expert has no angle; average it plainly.
    double cos = 1.0;
    if (std::sqrt(ld.n1) >= kZeroNorm && std::sqrt(ld.n2) >= kZeroNorm) cos = angle_cos(ld.d12, ld.n1, ld.n2);
    cos = std::max(cos, 0.0);  // obtuse angles would extrapolate past the base
    ratio[layer] = 2.0 * cos / (1.0 + cos);
  }

  Checkpoint out;
  k = 0;
  for (const auto& [name, bt] : base) {
    const double r = ratio.at(layer_of(name, layers));
    // r * (a + b) / 2 + (1 - r) * base == base + r/2 * d1 + r/2 * d2
    Tensor t(bt.shape);
    kernels::two_term_combine(bt.view(), p.d1[k], 0.5 * r, p.d2[k], 0.5 * r, t.view());
    out.set(name, std::move(t));
    ++k;
  }
  return out;
}

Checkpoint magmax_merge(const Checkpoint& base, std::span<const Checkpoint> experts, double lam) {
  if (experts.empty()) throw EmptyInput("magmax_merge needs at least one expert");
  require_all_match(base, experts);
  MergeConfig cfg;
  cfg.technique = Technique::MAGMAX;
  const auto w = WeightVector::uniform(experts.size());
  return merge_per_tensor(cfg, lam, base, experts, w.values());
}

double lines_layer_scale(int layer, int layer_count, double alpha, double beta) {
  if (layer_count <= 1) return alpha;
  return alpha + beta * static_cast<double>(layer - 1) / static_cast<double>(layer_count - 1);
}

TaskVector lines_rescale(const TaskVector& delta, int layer_count, double alpha, double beta) {
  if (layer_count < 1) throw InvalidCount("LiNeS needs at least one layer");
  TaskVector out;
  out.base_id = delta.base_id;
  for (const auto& [name, t] : delta.deltas) {
    const double s = lines_layer_scale(layer_of(name, layer_count), layer_count, alpha, beta);
    std::vector<float> data(t.numel());
    for (std::size_t j = 0; j < data.size(); ++j) data[j] = static_cast<float>(static_cast<double>(t.data[j]) * s);
    out.deltas.set(name, Tensor(t.shape, std::move(data)));
  }
  return out;
}

Checkpoint merge(const MergeConfig& config, const Checkpoint& base, std::span<const Checkpoint> candidates) {
  config.validate();
  if (candidates.empty()) throw EmptyInput("merge needs at least one candidate");
  if (is_pairwise(config.technique)) {
    if (candidates.size() != 2)
      throw ArityError(std::string(to_string(config.technique)) + " merges exactly 2 candidates, got " +
                       std::to_string(candidates.size()));
    if (config.technique == Technique::SLERP) return slerp(base, candidates[0], candidates[1], config.slerp_weight);
    return model_stock(base, candidates[0], candidates[1]);
  }
  if (config.technique == Technique::WA) {
    require_all_match(candidates.front(), candidates);
    if (!base.empty()) require_same_structure(base, candidates.front());
  } else {
    require_all_match(base, candidates);
  }
  const auto w = uses_weights(config.technique)
                     ? recency_weights(static_cast<int>(candidates.size()), config.weighting, config.reversed)
                     : WeightVector::uniform(candidates.size());
  const Checkpoint& shape_source = config.technique == Technique::WA ? candidates.front() : base;
  return merge_per_tensor(config, config.lambda_scale, shape_source, candidates, w.values());
}

Checkpoint fold_pairwise(const MergeConfig& config, const Checkpoint& base, std::span<const Checkpoint> candidates) {
  if (candidates.empty()) throw EmptyInput("fold needs at least one candidate");
  Checkpoint acc = candidates.front();
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const Checkpoint pair[2] = {acc, candidates[i]};
    acc = merge(config, base, pair);
  }
  return acc;
}

Checkpoint merge_buffer(const MergeConfig& config, const Checkpoint& base, const CheckpointBuffer& buffer) {
  config.validate();
  const int m = buffer.size();
  if (m == 0) throw EmptyBuffer("cannot merge an empty checkpoint buffer");

  if (is_pairwise(config.technique)) {
    Checkpoint acc = buffer.load(1);
    require_same_structure(base, acc);
    for (int i = 2; i <= m; ++i) {
      const Checkpoint pair[2] = {acc, buffer.load(i)};
      acc = merge(config, base, pair);
    }
    return acc;
  }

  const auto names = buffer.tensor_names();
  if (names != base.names()) throw KeyMismatch("buffer entries and base checkpoint hold different tensor names");
  const auto w = uses_weights(config.technique) ? recency_weights(m, config.weighting, config.reversed)
                                                : WeightVector::uniform(static_cast<std::size_t>(m));
  const int layers = layer_count(base);
  Checkpoint out;
  std::size_t ordinal = 0;
  std::vector<Tensor> loaded(static_cast<std::size_t>(m));
  std::vector<std::span<const float>> rows(static_cast<std::size_t>(m));
  for (const auto& name : names) {
    const Tensor& bt = base.at(name);
    for (int i = 0; i < m; ++i) {
      auto& t = loaded[static_cast<std::size_t>(i)];
      t = buffer.load_tensor(i + 1, name);
      if (t.shape != bt.shape) throw ShapeMismatch("buffer entry " + std::to_string(i + 1) + " changes shape of '" + name + "'");
      rows[static_cast<std::size_t>(i)] = t.view();
    }
    const TensorContext ctx{ordinal++, layer_of(name, layers), layers};
    out.set(name, merge_tensor(config, config.lambda_scale, bt, rows, w.values(), ctx));
  }
  return out;
}

}  // namespace chronomerge
