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

#include "chronomerge/buffer.hpp"

#include <fstream>
#include <json.hpp>
#include <mutex>
#include <stdexcept>

#include "chronomerge/errors.hpp"

namespace chronomerge {

namespace fs = std::filesystem;
using json = nlohmann::json;

CheckpointBuffer::CheckpointBuffer(CheckpointBuffer&&) noexcept = default;
CheckpointBuffer& CheckpointBuffer::operator=(CheckpointBuffer&&) noexcept = default;
CheckpointBuffer::~CheckpointBuffer() = default;

CheckpointBuffer CheckpointBuffer::in_memory() { return CheckpointBuffer(); }

CheckpointBuffer CheckpointBuffer::create(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create buffer directory '" + dir.string() + "': " + ec.message());
  for (const auto& f : fs::directory_iterator(dir)) {
    const auto name = f.path().filename().string();
    if (name == "index.json" || (name.rfind("task_", 0) == 0 && f.path().extension() == ".cmrg")) fs::remove(f.path());
  }
  CheckpointBuffer b;
  b.dir_ = dir;
  b.write_index();
  return b;
}

CheckpointBuffer CheckpointBuffer::open(const fs::path& dir) {
  const auto index_path = dir / "index.json";
  std::ifstream in(index_path);
  if (!in) throw IoError("cannot open buffer index '" + index_path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("buffer index is not valid JSON: " + std::string(e.what()));
  }
  CheckpointBuffer b;
  b.dir_ = dir;
  try {
    for (const auto& e : j.at("entries")) {
      Entry entry;
      entry.task_index = e.at("task_index").get<int>();
      if (entry.task_index != static_cast<int>(b.entries_.size()) + 1)
        throw FormatError("buffer index entries are not consecutive task indices");
      entry.file = dir / e.at("file").get<std::string>();
      entry.header = read_checkpoint_header(entry.file, true);
      b.entries_.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed buffer index: " + std::string(e.what()));
  }
  return b;
}

int CheckpointBuffer::append(const Checkpoint& c) {
  std::unique_lock lock(*mutex_);
  if (!entries_.empty()) {
    // Entries must stay mergeable with each other.
    const auto& first = entries_.front();
    if (first.resident) {
      require_same_structure(*first.resident, c);
    } else {
      if (first.header.tensors.size() != c.size()) throw KeyMismatch("appended checkpoint has a different key set");
      for (const auto& [name, t] : c) {
        auto it = first.header.tensors.find(name);
        if (it == first.header.tensors.end()) throw KeyMismatch("appended checkpoint has unexpected tensor '" + name + "'");
        if (it->second.shape != t.shape) throw ShapeMismatch("appended checkpoint changes the shape of '" + name + "'");
      }
    }
  }
  Entry entry;
  entry.task_index = static_cast<int>(entries_.size()) + 1;
  if (dir_.empty()) {
    entry.resident = std::make_shared<const Checkpoint>(c);
  } else {
    entry.file = dir_ / ("task_" + std::to_string(entry.task_index) + ".cmrg");
    save_checkpoint(c, entry.file);
    entry.header = read_checkpoint_header(entry.file, false);
  }
  entries_.push_back(std::move(entry));
  if (!dir_.empty()) write_index();
  return entries_.back().task_index;
}

int CheckpointBuffer::size() const {
  std::shared_lock lock(*mutex_);
  return static_cast<int>(entries_.size());
}

bool CheckpointBuffer::on_disk() const { return !dir_.empty(); }

const fs::path& CheckpointBuffer::directory() const { return dir_; }

const CheckpointBuffer::Entry& CheckpointBuffer::entry(int task_index) const {
  if (task_index < 1 || task_index > static_cast<int>(entries_.size()))
    throw std::out_of_range("buffer has no entry for task " + std::to_string(task_index));
  return entries_[static_cast<std::size_t>(task_index - 1)];
}

Checkpoint CheckpointBuffer::load(int task_index) const {
  std::shared_lock lock(*mutex_);
  const auto& e = entry(task_index);
  if (e.resident) return *e.resident;
  return load_checkpoint(e.file);
}

Checkpoint CheckpointBuffer::latest() const {
  const int n = size();
  if (n == 0) throw EmptyBuffer("checkpoint buffer is empty");
  return load(n);
}

Tensor CheckpointBuffer::load_tensor(int task_index, const std::string& name) const {
  std::shared_lock lock(*mutex_);
  const auto& e = entry(task_index);
  if (e.resident) return e.resident->at(name);
  return read_tensor(e.file, e.header, name);
}

std::vector<std::string> CheckpointBuffer::tensor_names() const {
  std::shared_lock lock(*mutex_);
  if (entries_.empty()) return {};
  const auto& e = entries_.front();
  if (e.resident) return e.resident->names();
  std::vector<std::string> names;
  for (const auto& [name, _] : e.header.tensors) names.push_back(name);
  return names;
}

fs::path CheckpointBuffer::entry_path(int task_index) const {
  std::shared_lock lock(*mutex_);
  return entry(task_index).file;
}

void CheckpointBuffer::write_index() const {
  json entries = json::array();
  for (const auto& e : entries_)
    entries.push_back({{"task_index", e.task_index}, {"file", e.file.filename().string()}});
  const auto path = dir_ / "index.json";
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write buffer index '" + tmp.string() + "'");
    out << json{{"entries", entries}}.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

}  // namespace chronomerge
