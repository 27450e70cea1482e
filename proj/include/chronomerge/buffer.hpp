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

#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "chronomerge/checkpoint.hpp"
#include "chronomerge/checkpoint_io.hpp"

namespace chronomerge {

/// Append-only store of expert checkpoints, indexed by task (1, 2, 3, ...).
///
/// A disk-backed buffer keeps `task_<i>.cmrg` files plus `index.json` in its
/// directory and only the parsed headers in memory, so merges can stream one
/// tensor at a time. An in-memory buffer keeps the checkpoints themselves.
/// Appends are serialized; concurrent readers are allowed.
class CheckpointBuffer {
 public:
  /// Checkpoints kept in memory only.
  static CheckpointBuffer in_memory();
  /// Starts an empty buffer in `dir`, removing any previous buffer files there.
  static CheckpointBuffer create(const std::filesystem::path& dir);
  /// Reopens an existing buffer directory, verifying every file's checksum.
  static CheckpointBuffer open(const std::filesystem::path& dir);

  CheckpointBuffer(CheckpointBuffer&&) noexcept;
  CheckpointBuffer& operator=(CheckpointBuffer&&) noexcept;
  ~CheckpointBuffer();

  /// Stores `c` as the next task and returns its index.
  int append(const Checkpoint& c);

  int size() const;
  bool empty() const { return size() == 0; }
  bool on_disk() const;
  const std::filesystem::path& directory() const;

  /// Full checkpoint of task `task_index` (1-based). Throws std::out_of_range.
  Checkpoint load(int task_index) const;
  Checkpoint latest() const;
  /// One tensor of one entry, read straight from disk when disk-backed.
  Tensor load_tensor(int task_index, const std::string& name) const;
  /// Tensor names shared by every entry (those of the first entry).
  std::vector<std::string> tensor_names() const;
  std::filesystem::path entry_path(int task_index) const;

 private:
  struct Entry {
    int task_index = 0;
    std::filesystem::path file;
    CheckpointHeader header;
    std::shared_ptr<const Checkpoint> resident;
  };

  CheckpointBuffer() = default;
  const Entry& entry(int task_index) const;
  void write_index() const;

  std::filesystem::path dir_;
  std::vector<Entry> entries_;
  std::unique_ptr<std::shared_mutex> mutex_ = std::make_unique<std::shared_mutex>();
};

}  // namespace chronomerge
