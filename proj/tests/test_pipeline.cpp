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

#include "chronomerge/errors.hpp"
#include "chronomerge/pipeline.hpp"

using namespace chronomerge;

namespace {

Checkpoint scalar(float v) {
  Checkpoint c;
  c.set("layer.1.weight", Tensor({2}, {v, -v}));
  return c;
}

float value(const Checkpoint& c) { return c.at("layer.1.weight").data[0]; }

PipelineConfig wa_config(InitProtocol init, DeployProtocol deploy, double w = 0.5) {
  PipelineConfig cfg;
  cfg.init = init;
  cfg.deploy = deploy;
  cfg.merge.technique = Technique::WA;
  cfg.merge.ema_weight = w;
  return cfg;
}

BenchSpec tiny_bench() {
  BenchSpec s;
  s.input_dim = 8;
  s.class_count = 4;
  s.task_count = 3;
  s.holdout_count = 2;
  s.samples_per_task = 64;
  s.stream_seed = 17;
  return s;
}

}  // namespace

TEST_CASE("protocol names") {
  CHECK(parse_init_protocol("ema") == InitProtocol::EMA);
  CHECK(parse_deploy_protocol("All") == DeployProtocol::ALL);
  CHECK_FALSE(parse_init_protocol("ALL").has_value());
  CHECK(to_string(InitProtocol::ZS) == "ZS");
}

TEST_CASE("ZS init with FT deploy is rejected") {
  CHECK_THROWS_AS(wa_config(InitProtocol::ZS, DeployProtocol::FT).validate(), ConfigError);
  CHECK_NOTHROW(wa_config(InitProtocol::ZS, DeployProtocol::ALL).validate());
  CHECK_NOTHROW(wa_config(InitProtocol::FT, DeployProtocol::FT).validate());
  CHECK_FALSE(ema_active(wa_config(InitProtocol::FT, DeployProtocol::ALL)));
  CHECK(ema_active(wa_config(InitProtocol::ZS, DeployProtocol::EMA)));
}

TEST_CASE("init weights") {
  PipelineState st(scalar(1), CheckpointBuffer::in_memory());
  for (auto p : {InitProtocol::ZS, InitProtocol::FT, InitProtocol::EMA})
    CHECK(value(init_weights(st, wa_config(p, DeployProtocol::ALL))) == 1.0f);

  st.buffer.append(scalar(4));
  st.buffer.append(scalar(6));
  st.ema = scalar(3);
  CHECK(value(init_weights(st, wa_config(InitProtocol::ZS, DeployProtocol::ALL))) == 1.0f);
  CHECK(value(init_weights(st, wa_config(InitProtocol::FT, DeployProtocol::ALL))) == 6.0f);
  CHECK(value(init_weights(st, wa_config(InitProtocol::EMA, DeployProtocol::ALL))) == 3.0f);
}

TEST_CASE("ema updates") {
  const std::vector<float> experts = {4, 8, -2};
  SUBCASE("w = 0.5 matches the unrolled sum") {
    PipelineState st(scalar(0), CheckpointBuffer::in_memory());
    const auto cfg = wa_config(InitProtocol::EMA, DeployProtocol::EMA, 0.5);
    for (float e : experts) {
      st.buffer.append(scalar(e));
      update_ema(st, scalar(e), cfg);
    }
    // 0.125*theta0 + 0.125*4 + 0.25*8 + 0.5*(-2)
    CHECK(value(*st.ema) == doctest::Approx(1.5));
  }
  SUBCASE("w = 0 keeps the base") {
    PipelineState st(scalar(1), CheckpointBuffer::in_memory());
    for (float e : experts) update_ema(st, scalar(e), wa_config(InitProtocol::EMA, DeployProtocol::EMA, 0.0));
    CHECK(value(*st.ema) == 1.0f);
  }
  SUBCASE("w = 1 tracks the latest expert") {
    PipelineState st(scalar(1), CheckpointBuffer::in_memory());
    for (float e : experts) update_ema(st, scalar(e), wa_config(InitProtocol::EMA, DeployProtocol::EMA, 1.0));
    CHECK(value(*st.ema) == -2.0f);
  }
  SUBCASE("task arithmetic moves the accumulator by w times the delta") {
    PipelineState st(scalar(0), CheckpointBuffer::in_memory());
    auto cfg = wa_config(InitProtocol::EMA, DeployProtocol::EMA, 0.25);
    cfg.merge.technique = Technique::TA;
    update_ema(st, scalar(4), cfg);
    update_ema(st, scalar(8), cfg);
    CHECK(value(*st.ema) == doctest::Approx(2.75));
  }
  SUBCASE("slerp starts from the base without failing") {
    PipelineState st(scalar(0), CheckpointBuffer::in_memory());
    auto cfg = wa_config(InitProtocol::EMA, DeployProtocol::EMA, 0.5);
    cfg.merge.technique = Technique::SLERP;
    CHECK(value(update_ema(st, scalar(4), cfg)) == doctest::Approx(2.0));
  }
}

TEST_CASE("deploy") {
  PipelineState st(scalar(0), CheckpointBuffer::in_memory());
  CHECK_THROWS_AS(deploy(st, wa_config(InitProtocol::FT, DeployProtocol::FT)), EmptyBuffer);
  for (float e : {1.0f, 2.0f, 3.0f}) st.buffer.append(scalar(e));
  CHECK(value(deploy(st, wa_config(InitProtocol::FT, DeployProtocol::FT))) == 3.0f);
  CHECK(value(deploy(st, wa_config(InitProtocol::FT, DeployProtocol::EMA))) == 0.0f);

  auto all = wa_config(InitProtocol::ZS, DeployProtocol::ALL);
  CHECK(value(deploy(st, all)) == doctest::Approx(2.0));
  all.merge.weighting = Weighting::QUADRATIC;
  CHECK(value(deploy(st, all)) == doctest::Approx(36.0 / 14.0));
  all.merge.reversed = true;
  CHECK(value(deploy(st, all)) == doctest::Approx((9.0 + 8.0 + 3.0) / 14.0));
}

TEST_CASE("short stream") {
  const auto bench = generate_stream(tiny_bench());
  const auto theta0 = init_model(ModelSpec{8, {8}, 4}, 5);
  auto cfg = wa_config(InitProtocol::EMA, DeployProtocol::EMA);
  cfg.task_count = 3;
  cfg.train.steps = 20;
  cfg.train_seed = 77;

  std::vector<int> sizes;
  PipelineState st(theta0, CheckpointBuffer::in_memory());
  const auto rows = run_stream(cfg, bench, st, [&](const MetricsRow& r, const PipelineState& s) {
    CHECK(r.t == s.t);
    sizes.push_back(s.buffer.size());
  });
  CHECK(sizes == std::vector<int>{1, 2, 3});
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(r.knowledge_accumulation >= 0.0);
    CHECK(r.knowledge_accumulation <= 1.0);
    CHECK(r.wall_time == 0.0);
  }
  CHECK(st.buffer.load(2).meta().at("task_id") == "2");
  CHECK(st.deployed.bitwise_equal(*st.ema));

  PipelineState again(theta0, CheckpointBuffer::in_memory());
  const auto rows2 = run_stream(cfg, bench, again);
  CHECK(again.deployed.bitwise_equal(st.deployed));
  CHECK(rows2.back().geo_mean == rows.back().geo_mean);

  CHECK_THROWS_AS(run_stream(cfg, bench, st), ConfigError);
  cfg.task_count = 4;
  PipelineState fresh(theta0, CheckpointBuffer::in_memory());
  CHECK_THROWS_AS(run_stream(cfg, bench, fresh), ConfigError);

  cfg.task_count = 2;
  cfg.replay = true;
  PipelineState rep(theta0, CheckpointBuffer::in_memory());
  CHECK(run_stream(cfg, bench, rep).size() == 2);

  const auto mt = multitask_reference(cfg, bench, theta0);
  CHECK(mt.t == 2);
}
