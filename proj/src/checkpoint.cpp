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

#include "chronomerge/checkpoint.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <stdexcept>

#include "chronomerge/errors.hpp"

namespace chronomerge {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != data.size())
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_to_string(shape));
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), 0.0f) {}

void Checkpoint::set(const std::string& name, Tensor tensor) {
  if (name.empty()) throw std::invalid_argument("tensor name must be non-empty");
  if (shape_numel(tensor.shape) != tensor.data.size())
    throw std::invalid_argument("tensor '" + name + "' data length does not match its shape");
  tensors_.insert_or_assign(name, std::move(tensor));
}

const Tensor& Checkpoint::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw KeyMismatch("no tensor named '" + name + "'");
  return it->second;
}

Tensor& Checkpoint::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw KeyMismatch("no tensor named '" + name + "'");
  return it->second;
}

std::size_t Checkpoint::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.numel();
  return n;
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, _] : tensors_) out.push_back(name);
  return out;
}

bool Checkpoint::bitwise_equal(const Checkpoint& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  auto it = other.tensors_.begin();
  for (const auto& [name, t] : tensors_) {
    if (name != it->first || t.shape != it->second.shape || t.data.size() != it->second.data.size()) return false;
    if (!t.data.empty() && std::memcmp(t.data.data(), it->second.data.data(), t.data.size() * sizeof(float)) != 0)
      return false;
    ++it;
  }
  return true;
}

void require_same_structure(const Checkpoint& a, const Checkpoint& b) {
  if (a.size() != b.size()) {
    throw KeyMismatch("checkpoints hold different tensor counts (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  }
  auto it = b.begin();
  for (const auto& [name, t] : a) {
    if (name != it->first) throw KeyMismatch("tensor key mismatch: '" + name + "' vs '" + it->first + "'");
    if (t.shape != it->second.shape) {
      throw ShapeMismatch("shape mismatch for '" + name + "': " + shape_to_string(t.shape) + " vs " +
                          shape_to_string(it->second.shape));
    }
    ++it;
  }
}

bool same_structure(const Checkpoint& a, const Checkpoint& b) {
  try {
    require_same_structure(a, b);
    return true;
  } catch (const StructureMismatch&) {
    return false;
  }
}

Checkpoint zeros_like(const Checkpoint& c) {
  Checkpoint out;
  for (const auto& [name, t] : c) out.set(name, Tensor(t.shape));
  return out;
}

namespace {

template <typename Op>
Checkpoint elementwise(const Checkpoint& a, const Checkpoint& b, Op op) {
  require_same_structure(a, b);
  Checkpoint out;
  for (const auto& [name, ta] : a) {
    const auto& tb = b.at(name);
    std::vector<float> data(ta.numel());
    for (std::size_t j = 0; j < data.size(); ++j) data[j] = op(ta.data[j], tb.data[j]);
    out.set(name, Tensor(ta.shape, std::move(data)));
  }
  return out;
}

}  // namespace

Checkpoint checkpoint_add(const Checkpoint& a, const Checkpoint& b) {
  return elementwise(a, b, [](float x, float y) { return x + y; });
}

Checkpoint checkpoint_sub(const Checkpoint& a, const Checkpoint& b) {
  return elementwise(a, b, [](float x, float y) { return x - y; });
}

Checkpoint checkpoint_scale(const Checkpoint& a, double c) {
  Checkpoint out;
  for (const auto& [name, t] : a) {
    std::vector<float> data(t.numel());
    for (std::size_t j = 0; j < data.size(); ++j) data[j] = static_cast<float>(static_cast<double>(t.data[j]) * c);
    out.set(name, Tensor(t.shape, std::move(data)));
  }
  return out;
}

TaskVector task_vector(const Checkpoint& expert, const Checkpoint& base) {
  TaskVector tv;
  tv.deltas = elementwise(expert, base, [](float e, float b) {
    return static_cast<float>(static_cast<double>(e) - static_cast<double>(b));
  });
  if (auto it = base.meta().find("task_id"); it != base.meta().end()) tv.base_id = it->second;
  return tv;
}

Checkpoint apply_task_vector(const Checkpoint& base, const TaskVector& delta) {
  return elementwise(base, delta.deltas, [](float b, float d) {
    return static_cast<float>(static_cast<double>(b) + static_cast<double>(d));
  });
}

std::optional<int> parse_layer_index(const std::string& name) {
  constexpr std::string_view prefix = "layer.";
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  const char* first = name.data() + prefix.size();
  const char* last = name.data() + name.size();
  int value = 0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr == first || ptr == last || *ptr != '.' || value < 1) return std::nullopt;
  if (ptr + 1 == last) return std::nullopt;  // "layer.3." has no parameter part
  return value;
}

int layer_count(const Checkpoint& c) {
  int layers = 1;
  for (const auto& [name, _] : c) {
    if (auto l = parse_layer_index(name)) layers = std::max(layers, *l);
  }
  return layers;
}

int layer_of(const std::string& name, int layers) {
  auto l = parse_layer_index(name);
  return l ? *l : layers;
}

}  // namespace chronomerge
