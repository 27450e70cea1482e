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

#include "chronomerge/toybench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "chronomerge/errors.hpp"
#include "chronomerge/random.hpp"

namespace chronomerge {

namespace {

using Matrix = std::vector<double>;  // row-major d x d

constexpr std::uint64_t kAdaptationStream = 1000;
constexpr std::uint64_t kHoldoutStream = 2000000;
constexpr std::uint64_t kPretrainStream = 3000000;

std::vector<double> gaussian_vector(Rng& rng, int d, double scale) {
  std::vector<double> v(static_cast<std::size_t>(d));
  const double s = scale / std::sqrt(static_cast<double>(d));
  for (auto& x : v) x = s * rng.normal();
  return v;
}

// Orthonormalized I + strength * G (modified Gram-Schmidt on columns).
Matrix random_rotation(Rng& rng, int d, double strength) {
  const auto n = static_cast<std::size_t>(d);
  Matrix m(n * n);
  const double s = strength / std::sqrt(static_cast<double>(d));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m[r * n + c] = (r == c ? 1.0 : 0.0) + s * rng.normal();
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double proj = 0.0;
      for (std::size_t r = 0; r < n; ++r) proj += m[r * n + c] * m[r * n + p];
      for (std::size_t r = 0; r < n; ++r) m[r * n + c] -= proj * m[r * n + p];
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) norm += m[r * n + c] * m[r * n + c];
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < n; ++r) m[r * n + c] /= norm;
  }
  return m;
}

TaskDataset make_task(const BenchSpec& spec, const std::vector<std::vector<double>>& prototypes, int task_id,
                      std::uint64_t key, double rotation, double offset_scale) {
  Rng rng(key);
  const int d = spec.input_dim;
  const auto n = static_cast<std::size_t>(d);
  const auto rot = random_rotation(rng, d, rotation);
  const auto offset = gaussian_vector(rng, d, offset_scale);

  std::vector<std::vector<double>> centers;
  for (const auto& p : prototypes) {
    std::vector<double> c(offset);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < n; ++k) c[r] += rot[r * n + k] * p[k];
    centers.push_back(std::move(c));
  }

  TaskDataset t;
  t.task_id = task_id;
  t.input_dim = d;
  const auto count = static_cast<std::size_t>(spec.samples_per_task);
  t.inputs.resize(count * n);
  t.labels.resize(count);
  const double sigma = spec.noise / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(spec.class_count));
    t.labels[i] = label;
    for (std::size_t k = 0; k < n; ++k)
      t.inputs[i * n + k] = static_cast<float>(centers[static_cast<std::size_t>(label)][k] + sigma * rng.normal());
  }
  return t;
}

void require_fits(const MlpParams& p, const TaskDataset& data) {
  if (p.widths.front() != data.input_dim)
    throw StructureMismatch("model expects " + std::to_string(p.widths.front()) + " inputs, data has " +
                            std::to_string(data.input_dim));
  const int classes = p.widths.back();
  for (int y : data.labels)
    if (y < 0 || y >= classes) throw StructureMismatch("label " + std::to_string(y) + " outside the model's classes");
}

// Forward pass for one sample; fills per-layer activations (post-ReLU for
// hidden layers, raw logits for the last).
template <typename W>
void forward_one(const std::vector<int>& widths, const std::vector<std::vector<W>>& weights,
                 const std::vector<std::vector<W>>& biases, std::span<const float> x, std::vector<std::vector<double>>& act) {
  const std::size_t layers = weights.size();
  act[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(widths[l]);
    const auto out = static_cast<std::size_t>(widths[l + 1]);
    const auto& w = weights[l];
    const auto& src = act[l];
    auto& dst = act[l + 1];
    for (std::size_t o = 0; o < out; ++o) {
      double z = biases[l][o];
      const W* row = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) z += static_cast<double>(row[i]) * src[i];
      dst[o] = (l + 1 < layers) ? std::max(z, 0.0) : z;
    }
  }
}

std::vector<std::vector<double>> activation_buffers(const std::vector<int>& widths) {
  std::vector<std::vector<double>> act;
  for (int w : widths) act.emplace_back(static_cast<std::size_t>(w), 0.0);
  return act;
}

}  // namespace

ToyBench generate_stream(const BenchSpec& spec) {
  if (spec.input_dim < 1 || spec.class_count < 1 || spec.task_count < 1 || spec.holdout_count < 0 ||
      spec.samples_per_task < 1 || spec.pretrain_tasks < 1)
    throw InvalidDimensions("bench dimensions and counts must be >= 1 (holdout >= 0)");
  if (!(spec.noise >= 0.0) || !(spec.prototype_scale > 0.0))
    throw InvalidDimensions("bench noise must be >= 0 and prototype scale > 0");

  Rng rng(spec.stream_seed);
  std::vector<std::vector<double>> prototypes;
  for (int c = 0; c < spec.class_count; ++c) prototypes.push_back(gaussian_vector(rng, spec.input_dim, spec.prototype_scale));

  ToyBench bench;
  bench.input_dim = spec.input_dim;
  bench.class_count = spec.class_count;
  bench.samples_per_task = spec.samples_per_task;
  bench.stream_seed = spec.stream_seed;
  for (int t = 0; t < spec.task_count; ++t) {
    bench.adaptation_tasks.push_back(make_task(spec, prototypes, t + 1,
                                               derive_seed(spec.stream_seed, kAdaptationStream + t),
                                               spec.adapt_rotation, spec.adapt_offset));
  }
  for (int h = 0; h < spec.holdout_count; ++h) {
    bench.holdout_tasks.push_back(make_task(spec, prototypes, -(h + 1), derive_seed(spec.stream_seed, kHoldoutStream + h),
                                            spec.base_rotation, spec.base_offset));
  }
  std::vector<TaskDataset> pre;
  for (int k = 0; k < spec.pretrain_tasks; ++k) {
    pre.push_back(make_task(spec, prototypes, 0, derive_seed(spec.stream_seed, kPretrainStream + k), spec.base_rotation,
                            spec.base_offset));
  }
  bench.pretraining = pool(pre);
  return bench;
}

TaskDataset pool(std::span<const TaskDataset> parts) {
  TaskDataset out;
  if (parts.empty()) return out;
  out.task_id = parts.front().task_id;
  out.input_dim = parts.front().input_dim;
  for (const auto& p : parts) {
    if (p.input_dim != out.input_dim) throw InvalidDimensions("cannot pool datasets of different input sizes");
    out.inputs.insert(out.inputs.end(), p.inputs.begin(), p.inputs.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

void write_task_csv(std::ostream& out, const TaskDataset& data) {
  for (int k = 0; k < data.input_dim; ++k) out << 'x' << k << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (float v : data.row(i)) {
      std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(v));
      out << buf << ',';
    }
    out << data.labels[i] << '\n';
  }
}

// --- model ---------------------------------------------------------------------------

Checkpoint init_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.input_dim < 1 || spec.class_count < 1) throw InvalidDimensions("model needs >= 1 input and class");
  std::vector<int> widths{spec.input_dim};
  for (int h : spec.hidden) {
    if (h < 1) throw InvalidDimensions("hidden widths must be >= 1");
    widths.push_back(h);
  }
  widths.push_back(spec.class_count);
  Rng rng(seed);
  Checkpoint c;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    const double std = std::sqrt(2.0 / in);
    std::vector<float> w(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
    for (auto& x : w) x = static_cast<float>(std * rng.normal());
    const std::string prefix = "layer." + std::to_string(l + 1) + ".";
    c.set(prefix + "weight", Tensor({out, in}, std::move(w)));
    c.set(prefix + "bias", Tensor({out}));
  }
  return c;
}

ModelSpec infer_model_spec(const Checkpoint& model) {
  return [&] {
    const auto p = MlpParams::from_checkpoint(model);
    ModelSpec s;
    s.input_dim = p.widths.front();
    s.class_count = p.widths.back();
    s.hidden.assign(p.widths.begin() + 1, p.widths.end() - 1);
    return s;
  }();
}

MlpParams MlpParams::from_checkpoint(const Checkpoint& c) {
  const int layers = layer_count(c);
  if (c.size() != static_cast<std::size_t>(2 * layers))
    throw StructureMismatch("checkpoint is not an MLP with layer.<l>.weight/bias tensors");
  MlpParams p;
  for (int l = 1; l <= layers; ++l) {
    const std::string prefix = "layer." + std::to_string(l) + ".";
    if (!c.contains(prefix + "weight") || !c.contains(prefix + "bias"))
      throw StructureMismatch("missing " + prefix + "weight or " + prefix + "bias");
    const auto& w = c.at(prefix + "weight");
    const auto& b = c.at(prefix + "bias");
    if (w.shape.size() != 2 || b.shape.size() != 1 || b.shape[0] != w.shape[0])
      throw StructureMismatch("inconsistent shapes in layer " + std::to_string(l));
    const int out = static_cast<int>(w.shape[0]), in = static_cast<int>(w.shape[1]);
    if (l == 1) p.widths.push_back(in);
    if (p.widths.back() != in) throw StructureMismatch("layer " + std::to_string(l) + " input width mismatch");
    p.widths.push_back(out);
    p.weights.emplace_back(w.data.begin(), w.data.end());
    p.biases.emplace_back(b.data.begin(), b.data.end());
  }
  return p;
}

Checkpoint MlpParams::to_checkpoint() const {
  Checkpoint c;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const std::string prefix = "layer." + std::to_string(l + 1) + ".";
    c.set(prefix + "weight",
          Tensor({widths[l + 1], widths[l]}, std::vector<float>(weights[l].begin(), weights[l].end())));
    c.set(prefix + "bias", Tensor({widths[l + 1]}, std::vector<float>(biases[l].begin(), biases[l].end())));
  }
  return c;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  z.widths = widths;
  for (const auto& w : weights) z.weights.emplace_back(w.size(), 0.0);
  for (const auto& b : biases) z.biases.emplace_back(b.size(), 0.0);
  return z;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

double cross_entropy(const MlpParams& params, const TaskDataset& data, std::span<const std::size_t> samples,
                     MlpParams* grad) {
  if (samples.empty()) throw EmptyDataset("cross-entropy over zero samples");
  const std::size_t layers = params.weights.size();
  auto act = activation_buffers(params.widths);
  auto delta = activation_buffers(params.widths);
  if (grad) *grad = params.zeros_like();
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  double total = 0.0;

  for (std::size_t s : samples) {
    forward_one(params.widths, params.weights, params.biases, data.row(s), act);
    const auto& logits = act[layers];
    const int y = data.labels[s];
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    total += log_z - logits[static_cast<std::size_t>(y)];
    if (!grad) continue;

    auto& dout = delta[layers];
    for (std::size_t k = 0; k < logits.size(); ++k)
      dout[k] = (std::exp(logits[k] - log_z) - (static_cast<int>(k) == y ? 1.0 : 0.0)) * inv_n;
    for (std::size_t l = layers; l-- > 0;) {
      const auto in = static_cast<std::size_t>(params.widths[l]);
      const auto out = static_cast<std::size_t>(params.widths[l + 1]);
      const auto& src = act[l];
      const auto& dz = delta[l + 1];
      auto& gw = grad->weights[l];
      auto& gb = grad->biases[l];
      for (std::size_t o = 0; o < out; ++o) {
        if (dz[o] == 0.0) continue;
        gb[o] += dz[o];
        double* row = gw.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) row[i] += dz[o] * src[i];
      }
      if (l == 0) break;
      auto& dprev = delta[l];
      std::fill(dprev.begin(), dprev.end(), 0.0);
      const auto& w = params.weights[l];
      for (std::size_t o = 0; o < out; ++o) {
        if (dz[o] == 0.0) continue;
        const double* row = w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) dprev[i] += dz[o] * row[i];
      }
      // ReLU derivative: zero where the activation was clamped.
      for (std::size_t i = 0; i < in; ++i)
        if (src[i] <= 0.0) dprev[i] = 0.0;
    }
  }
  return total * inv_n;
}

double learning_rate(const TrainOptions& opt, int step) {
  const int warmup = std::max(1, static_cast<int>(std::lround(opt.warmup_fraction * opt.steps)));
  if (step < warmup) return opt.peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const int decay = std::max(1, opt.steps - warmup);
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(decay);
  return opt.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Checkpoint train(const Checkpoint& init, const TaskDataset& data, const TrainOptions& options, std::uint64_t seed,
                 ReplaySource replay) {
  if (options.steps < 0 || options.batch_size < 1) throw InvalidDimensions("train needs steps >= 0 and batch >= 1");
  if (options.steps == 0) return init;
  if (data.size() == 0) throw EmptyDataset("cannot train on an empty dataset");

  auto params = MlpParams::from_checkpoint(init);
  require_fits(params, data);

  // Replay samples are appended after the current task so one index space
  // addresses both.
  const TaskDataset* source = &data;
  TaskDataset mixed;
  std::size_t replay_count = 0;
  std::size_t replay_begin = data.size();
  if (replay.pool && replay.pool->size() > 0 && replay.fraction > 0.0) {
    require_fits(params, *replay.pool);
    const TaskDataset parts[2] = {data, *replay.pool};
    mixed = pool(parts);
    source = &mixed;
    replay_count = static_cast<std::size_t>(std::lround(replay.fraction * options.batch_size));
    replay_count = std::min(replay_count, static_cast<std::size_t>(options.batch_size));
  }
  const std::size_t current_count = static_cast<std::size_t>(options.batch_size) - replay_count;
  const std::size_t replay_size = source->size() - replay_begin;

  Rng rng(seed);
  std::vector<std::size_t> batch(static_cast<std::size_t>(options.batch_size));
  MlpParams grad;
  for (int step = 0; step < options.steps; ++step) {
    for (std::size_t b = 0; b < current_count; ++b) batch[b] = rng.below(data.size());
    for (std::size_t b = 0; b < replay_count; ++b) batch[current_count + b] = replay_begin + rng.below(replay_size);

    const double loss = cross_entropy(params, *source, batch, &grad);
    if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss at step " + std::to_string(step));

    double sq = 0.0;
    for (const auto& g : grad.weights)
      for (double v : g) sq += v * v;
    for (const auto& g : grad.biases)
      for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    const double clip = norm > options.clip_norm ? options.clip_norm / norm : 1.0;
    const double step_size = learning_rate(options, step) * clip;

    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      for (std::size_t k = 0; k < params.weights[l].size(); ++k) params.weights[l][k] -= step_size * grad.weights[l][k];
      for (std::size_t k = 0; k < params.biases[l].size(); ++k) params.biases[l][k] -= step_size * grad.biases[l][k];
    }
  }
  auto out = params.to_checkpoint();
  for (const auto& [name, t] : out)
    for (float v : t.data)
      if (!std::isfinite(v)) throw DivergenceError("training produced non-finite weights in '" + name + "'");
  return out;
}

double evaluate(const Checkpoint& model, const TaskDataset& data) {
  if (data.size() == 0) throw EmptyDataset("cannot evaluate on an empty dataset");
  const auto p = MlpParams::from_checkpoint(model);
  require_fits(p, data);
  auto act = activation_buffers(p.widths);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    forward_one(p.widths, p.weights, p.biases, data.row(s), act);
    const auto& logits = act.back();
    // max_element returns the first maximum: ties go to the lowest class.
    const auto pred = std::max_element(logits.begin(), logits.end()) - logits.begin();
    if (pred == data.labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double dataset_loss(const Checkpoint& model, const TaskDataset& data) {
  if (data.size() == 0) throw EmptyDataset("cannot compute loss on an empty dataset");
  const auto p = MlpParams::from_checkpoint(model);
  require_fits(p, data);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return cross_entropy(p, data, all, nullptr);
}

Checkpoint pretrain_base(const ToyBench& bench, const ModelSpec& spec, const TrainOptions& options, std::uint64_t seed) {
  if (spec.input_dim != bench.input_dim || spec.class_count != bench.class_count)
    throw InvalidDimensions("model spec does not match the bench dimensions");
  const auto init = init_model(spec, derive_seed(seed, 0));
  auto base = train(init, bench.pretraining, options, derive_seed(seed, 1));
  base.meta()["task_id"] = "0";
  return base;
}

}  // namespace chronomerge
