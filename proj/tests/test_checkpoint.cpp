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


#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "chronomerge/buffer.hpp"
#include "chronomerge/checkpoint.hpp"
#include "chronomerge/checkpoint_io.hpp"
#include "chronomerge/errors.hpp"
#include "chronomerge/random.hpp"
#include "oracles.hpp"

using namespace chronomerge;

namespace {

Checkpoint one(const std::string& name, std::vector<float> v) {
  const auto n = static_cast<std::int64_t>(v.size());
  Checkpoint c;
  c.set(name, Tensor({n}, std::move(v)));
  return c;
}

Checkpoint random3(std::uint64_t seed) {
  Rng rng(seed);
  return oracle::random_like_names(rng, {"layer.1.bias", "layer.1.weight", "layer.2.weight"}, {{4}, {4, 3}, {2, 4}}, 1.0);
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("chronomerge_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("tensor and checkpoint invariants") {
  Checkpoint c;
  CHECK_THROWS_AS(c.set("", Tensor({1})), std::invalid_argument);
  CHECK_THROWS_AS(c.set("w", Tensor({2, 2}, {1, 2, 3})), std::invalid_argument);
  c.set("b", Tensor({1}));
  c.set("a", Tensor({2}));
  CHECK(c.names() == std::vector<std::string>{"a", "b"});
  CHECK(c.total_elements() == 3);
}

TEST_CASE("checkpoint_add") {
  auto r = checkpoint_add(one("w", {1, 2}), one("w", {3, 4}));
  CHECK(r.at("w").data == std::vector<float>{4, 6});

  const auto a = random3(1);
  CHECK(checkpoint_add(a, zeros_like(a)).bitwise_equal(a));

  const auto b = random3(2), c = random3(3);
  const auto ab = checkpoint_add(a, b);
  oracle::Flat expect;
  for (const auto& [name, t] : a)
    for (std::size_t j = 0; j < t.numel(); ++j)
      expect[name].push_back(static_cast<double>(t.data[j]) + static_cast<double>(b.at(name).data[j]));
  CHECK(oracle::max_abs_diff(ab, expect) < 1e-6);

  SUBCASE("commutative exactly, associative within 1e-6") {
    CHECK(checkpoint_add(a, b).bitwise_equal(checkpoint_add(b, a)));
    const auto left = checkpoint_add(checkpoint_add(a, b), c);
    const auto right = checkpoint_add(a, checkpoint_add(b, c));
    for (const auto& [name, t] : left)
      for (std::size_t j = 0; j < t.numel(); ++j)
        CHECK(std::fabs(t.data[j] - right.at(name).data[j]) <= 1e-6 * std::max(1.0f, std::fabs(t.data[j])));
  }

  CHECK_THROWS_AS(checkpoint_add(one("w", {1}), one("v", {1})), KeyMismatch);
  CHECK_THROWS_AS(checkpoint_add(one("w", {1}), one("w", {1, 2})), ShapeMismatch);
  CHECK_THROWS_AS(checkpoint_add(one("w", {1}), one("w", {1, 2})), StructureMismatch);
}

TEST_CASE("checkpoint_scale") {
  CHECK(checkpoint_scale(one("w", {2, 4}), 0.5).at("w").data == std::vector<float>{1, 2});
  const auto a = random3(4);
  CHECK(checkpoint_scale(a, 1.0).bitwise_equal(a));
  const auto zero = checkpoint_scale(a, 0.0);
  for (float v : zero.at("layer.1.weight").data) CHECK(v == 0.0f);
}

TEST_CASE("task vectors") {
  Checkpoint base = one("w", {1});
  base.meta()["task_id"] = "7";
  const auto tv = task_vector(one("w", {3}), base);
  CHECK(tv.deltas.at("w").data == std::vector<float>{2});
  CHECK(tv.base_id == "7");

  const auto a = random3(5);
  const auto self = task_vector(a, a);
  for (float v : self.deltas.at("layer.2.weight").data) CHECK(v == 0.0f);

  const auto e = random3(6);
  const auto back = apply_task_vector(a, task_vector(e, a));
  for (const auto& [name, t] : back)
    for (std::size_t j = 0; j < t.numel(); ++j) CHECK(std::fabs(t.data[j] - e.at(name).data[j]) <= 1e-6);

  CHECK_THROWS_AS(task_vector(one("w", {1}), one("v", {1})), KeyMismatch);
}

TEST_CASE("layer naming") {
  CHECK(parse_layer_index("layer.3.weight") == 3);
  CHECK_FALSE(parse_layer_index("head.weight").has_value());
  CHECK_FALSE(parse_layer_index("layer.x.weight").has_value());
  CHECK_FALSE(parse_layer_index("layer.2").has_value());
  Checkpoint c;
  c.set("layer.1.weight", Tensor({1}));
  c.set("layer.4.bias", Tensor({1}));
  c.set("norm", Tensor({1}));
  CHECK(layer_count(c) == 4);
  CHECK(layer_of("norm", 4) == 4);
  CHECK(layer_of("layer.1.weight", 4) == 1);
}

TEST_CASE("file round trip is bit exact") {
  const auto dir = scratch("io");
  Checkpoint c = random3(7);
  c.at("layer.1.bias").data = {0.0f, -0.0f, std::numeric_limits<float>::denorm_min(), -3.4e38f};
  c.meta()["task_id"] = "3";
  save_checkpoint(c, dir / "c.cmrg");
  const auto back = load_checkpoint(dir / "c.cmrg");
  CHECK(back.bitwise_equal(c));
  CHECK(std::signbit(back.at("layer.1.bias").data[1]));
  CHECK(back.meta() == c.meta());

  const auto h = read_checkpoint_header(dir / "c.cmrg");
  CHECK(h.tensors.size() == 3);
  CHECK(h.tensors.at("layer.1.weight").nbytes == 12 * 4);
  CHECK(read_tensor(dir / "c.cmrg", h, "layer.2.weight").data == c.at("layer.2.weight").data);

  // A tensor called "meta" does not collide with the metadata block.
  Checkpoint m = one("meta", {1, 2});
  save_checkpoint(m, dir / "m.cmrg");
  CHECK(load_checkpoint(dir / "m.cmrg").bitwise_equal(m));
}

TEST_CASE("corrupted files are rejected") {
  const auto dir = scratch("corrupt");
  save_checkpoint(random3(8), dir / "c.cmrg");
  const auto good = slurp(dir / "c.cmrg");

  SUBCASE("truncated") {
    for (std::size_t keep : {std::size_t{0}, std::size_t{3}, std::size_t{11}, good.size() / 2, good.size() - 1}) {
      spit(dir / "t.cmrg", std::vector<char>(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(keep)));
      CHECK_THROWS_AS(load_checkpoint(dir / "t.cmrg"), FormatError);
    }
  }
  SUBCASE("wrong magic") {
    auto b = good;
    b[0] = 'X';
    spit(dir / "t.cmrg", b);
    CHECK_THROWS_AS(load_checkpoint(dir / "t.cmrg"), FormatError);
  }
  SUBCASE("wrong version") {
    auto b = good;
    b[4] = 2;
    spit(dir / "t.cmrg", b);
    CHECK_THROWS_AS(load_checkpoint(dir / "t.cmrg"), FormatError);
  }
  SUBCASE("any flipped byte fails the checksum") {
    for (std::size_t pos = 0; pos < good.size(); pos += 7) {
      auto b = good;
      b[pos] = static_cast<char>(b[pos] ^ 0x10);
      spit(dir / "t.cmrg", b);
      CHECK_THROWS_AS(load_checkpoint(dir / "t.cmrg"), FormatError);
    }
  }
  SUBCASE("missing file is an io error") { CHECK_THROWS_AS(load_checkpoint(dir / "nope.cmrg"), IoError); }
}

TEST_CASE("in-memory buffer") {
  auto buf = CheckpointBuffer::in_memory();
  CHECK(buf.empty());
  CHECK_THROWS_AS(buf.latest(), EmptyBuffer);
  CHECK(buf.append(random3(1)) == 1);
  CHECK(buf.append(random3(2)) == 2);
  CHECK(buf.latest().bitwise_equal(random3(2)));
  CHECK(buf.load(1).bitwise_equal(random3(1)));
  CHECK_THROWS_AS(buf.append(one("w", {1})), StructureMismatch);
}

TEST_CASE("on-disk buffer layout and reopen") {
  const auto dir = scratch("buffer") / "buffer";
  {
    auto buf = CheckpointBuffer::create(dir);
    for (int i = 1; i <= 3; ++i) buf.append(random3(static_cast<std::uint64_t>(i)));
    CHECK(buf.on_disk());
    CHECK(buf.load_tensor(2, "layer.2.weight").data == random3(2).at("layer.2.weight").data);
  }
  CHECK(std::filesystem::exists(dir / "index.json"));
  for (int i = 1; i <= 3; ++i) CHECK(std::filesystem::exists(dir / ("task_" + std::to_string(i) + ".cmrg")));

  auto reopened = CheckpointBuffer::open(dir);
  CHECK(reopened.size() == 3);
  CHECK(reopened.load(3).bitwise_equal(random3(3)));
  CHECK(reopened.append(random3(4)) == 4);

  auto fresh = CheckpointBuffer::create(dir);
  CHECK(fresh.size() == 0);
  CHECK_FALSE(std::filesystem::exists(dir / "task_1.cmrg"));
}
