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

// Synthetic continual-learning substrate: Gaussian-cluster classification
// task streams and a small ReLU MLP trained with clipped, cosine-scheduled
// gradient descent.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "chronomerge/checkpoint.hpp"

namespace chronomerge {

/// Generating parameters of a task stream.
///
/// Every task shares one set of class prototypes. A task places class c at
/// offset + R * prototype_c, with R a random rotation whose distance from the
/// identity is set by the task family's `rotation` knob. Holdout tasks and the
/// pretraining pool come from the base family (small rotation and offset);
/// adaptation tasks come from a farther family, so learning them moves the
/// model away from what the base model knows.
struct BenchSpec {
  int input_dim = 16;
  int class_count = 8;
  int task_count = 20;
  int holdout_count = 5;
  int samples_per_task = 256;
  std::uint64_t stream_seed = 0;

  double prototype_scale = 3.0;
  double noise = 1.0;
  double base_rotation = 0.3;
  double base_offset = 0.5;
  double adapt_rotation = 1.5;
  double adapt_offset = 2.0;
  int pretrain_tasks = 8;
};

struct TaskDataset {
  int task_id = 0;
  int input_dim = 0;
  std::vector<float> inputs;  // row-major [n x input_dim]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(inputs).subspan(i * static_cast<std::size_t>(input_dim),
                                                  static_cast<std::size_t>(input_dim));
  }
};

struct ToyBench {
  std::vector<TaskDataset> adaptation_tasks;
  std::vector<TaskDataset> holdout_tasks;
  TaskDataset pretraining;  // pooled samples from the base family
  int input_dim = 0;
  int class_count = 0;
  int samples_per_task = 0;
  std::uint64_t stream_seed = 0;
};

/// Throws InvalidDimensions when any count is < 1 (holdout may be 0).
ToyBench generate_stream(const BenchSpec& spec);

/// Concatenation of several datasets (task_id of the first).
TaskDataset pool(std::span<const TaskDataset> parts);

/// Writes `x0,...,x{d-1},label` rows with a header line.
void write_task_csv(std::ostream& out, const TaskDataset& data);

// --- model -----------------------------------------------------------------------

struct ModelSpec {
  int input_dim = 16;
  std::vector<int> hidden = {32, 32};
  int class_count = 8;

  int layers() const { return static_cast<int>(hidden.size()) + 1; }
};

/// Fresh MLP checkpoint with tensors layer.<l>.weight [out, in] and
/// layer.<l>.bias [out], l = 1..L. He-normal weights, zero biases.
Checkpoint init_model(const ModelSpec& spec, std::uint64_t seed);

/// Recovers the layer widths from a checkpoint. Throws StructureMismatch when
/// the tensors do not form a consistent MLP.
ModelSpec infer_model_spec(const Checkpoint& model);

/// Model parameters in 64-bit, layer by layer.
struct MlpParams {
  std::vector<int> widths;                    // input, hidden..., classes
  std::vector<std::vector<double>> weights;   // [out x in] row-major
  std::vector<std::vector<double>> biases;

  static MlpParams from_checkpoint(const Checkpoint& c);
  Checkpoint to_checkpoint() const;
  MlpParams zeros_like() const;
  std::size_t parameter_count() const;
};

/// Mean softmax cross-entropy over the listed samples; fills `grad` (same
/// layout as params) when non-null.
double cross_entropy(const MlpParams& params, const TaskDataset& data, std::span<const std::size_t> samples,
                     MlpParams* grad);

struct TrainOptions {
  int steps = 200;
  int batch_size = 32;
  double peak_lr = 0.05;
  double warmup_fraction = 0.1;
  double clip_norm = 1.0;
};

/// Learning rate at `step` (0-based): linear warmup over the first
/// warmup_fraction of steps, cosine decay to zero afterwards.
double learning_rate(const TrainOptions& opt, int step);

/// Optional replay pool mixed into every batch at `fraction`.
struct ReplaySource {
  const TaskDataset* pool = nullptr;
  double fraction = 0.0;
};

/// Mini-batch gradient descent on softmax cross-entropy. Deterministic per
/// seed; steps == 0 returns `init` unchanged. Throws DivergenceError on a
/// non-finite loss and StructureMismatch when `init` does not fit the data.
Checkpoint train(const Checkpoint& init, const TaskDataset& data, const TrainOptions& options, std::uint64_t seed,
                 ReplaySource replay = {});

/// Fraction of argmax-correct predictions (ties go to the lowest class).
double evaluate(const Checkpoint& model, const TaskDataset& data);
/// Mean cross-entropy over the full dataset.
double dataset_loss(const Checkpoint& model, const TaskDataset& data);

/// Base model for a bench: init_model(seed) trained on the pretraining pool.
Checkpoint pretrain_base(const ToyBench& bench, const ModelSpec& spec, const TrainOptions& options,
                         std::uint64_t seed);

}  // namespace chronomerge
