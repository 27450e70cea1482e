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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chronomerge {

using Shape = std::vector<std::int64_t>;

/// Number of elements described by `shape`. Every dimension must be positive.
std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// A named parameter array: row-major 32-bit data plus its shape.
struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<float> d);
  /// Zero-filled tensor of the given shape.
  explicit Tensor(Shape s);

  std::size_t numel() const { return data.size(); }
  std::span<const float> view() const { return data; }
  std::span<float> view() { return data; }
};

/// Ordered collection of named tensors plus free-form string metadata.
///
/// Names are unique, non-empty and iterate in lexicographic order. Every
/// tensor's element count matches its shape; both are checked on insertion.
class Checkpoint {
 public:
  using TensorMap = std::map<std::string, Tensor>;
  using MetaMap = std::map<std::string, std::string>;

  Checkpoint() = default;

  /// Inserts or replaces a tensor. Throws std::invalid_argument on an empty
  /// name or a data/shape size disagreement.
  void set(const std::string& name, Tensor tensor);

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  std::size_t total_elements() const;
  std::vector<std::string> names() const;

  const TensorMap& tensors() const { return tensors_; }
  TensorMap::const_iterator begin() const { return tensors_.begin(); }
  TensorMap::const_iterator end() const { return tensors_.end(); }

  MetaMap& meta() { return meta_; }
  const MetaMap& meta() const { return meta_; }

  /// Bitwise equality of tensor names, shapes and data. Metadata is ignored.
  bool bitwise_equal(const Checkpoint& other) const;

 private:
  TensorMap tensors_;
  MetaMap meta_;
};

/// Element-wise difference of an expert against the checkpoint it was
/// trained from. Shares the key/shape structure of its base.
struct TaskVector {
  Checkpoint deltas;
  std::string base_id;
};

/// Throws KeyMismatch when key sets differ, ShapeMismatch when a shape differs.
void require_same_structure(const Checkpoint& a, const Checkpoint& b);
bool same_structure(const Checkpoint& a, const Checkpoint& b);

Checkpoint zeros_like(const Checkpoint& c);

/// result[k] = a[k] + b[k]; result meta is empty.
Checkpoint checkpoint_add(const Checkpoint& a, const Checkpoint& b);
Checkpoint checkpoint_sub(const Checkpoint& a, const Checkpoint& b);
Checkpoint checkpoint_scale(const Checkpoint& a, double c);

/// deltas[k] = expert[k] - base[k]. The base id is taken from base's
/// `task_id` meta entry when present.
TaskVector task_vector(const Checkpoint& expert, const Checkpoint& base);

/// base + delta. Computed in 64-bit so that apply(b, task_vector(e, b))
/// reproduces e for all ordinary magnitudes.
Checkpoint apply_task_vector(const Checkpoint& base, const TaskVector& delta);

/// Layer index parsed from a `layer.<l>.<param>` tensor name.
std::optional<int> parse_layer_index(const std::string& name);

/// Largest parsed layer index in the checkpoint, or 1 when none parse.
int layer_count(const Checkpoint& c);

/// Layer a tensor belongs to; unparseable names belong to the final layer.
int layer_of(const std::string& name, int layers);

}  // namespace chronomerge
