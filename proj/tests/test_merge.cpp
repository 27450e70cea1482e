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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "chronomerge/errors.hpp"
#include "chronomerge/merge.hpp"
#include "chronomerge/random.hpp"
#include "oracles.hpp"

using namespace chronomerge;

namespace {

Checkpoint vec(std::vector<float> v, const std::string& name = "layer.1.weight") {
  const auto n = static_cast<std::int64_t>(v.size());
  Checkpoint c;
  c.set(name, Tensor({n}, std::move(v)));
  return c;
}

void check_close(const Checkpoint& got, const std::vector<double>& want, double tol,
                 const std::string& name = "layer.1.weight") {
  const auto& d = got.at(name).data;
  REQUIRE(d.size() == want.size());
  for (std::size_t j = 0; j < d.size(); ++j) CHECK(std::fabs(d[j] - want[j]) <= tol);
}

double max_diff(const Checkpoint& a, const Checkpoint& b) {
  double m = 0.0;
  for (const auto& [name, t] : a)
    for (std::size_t j = 0; j < t.numel(); ++j)
      m = std::max(m, std::fabs(static_cast<double>(t.data[j]) - b.at(name).data[j]));
  return m;
}

const std::vector<std::string> kNames = {"head", "layer.1.bias", "layer.1.weight", "layer.2.weight", "layer.3.weight"};
const std::vector<Shape> kShapes = {{3}, {5}, {5, 4}, {6, 5}, {3, 6}};

Checkpoint rnd(Rng& rng, double scale = 1.0) { return oracle::random_like_names(rng, kNames, kShapes, scale); }

}  // namespace

TEST_CASE("recency weights") {
  const auto lin = recency_weights(3, Weighting::LINEAR);
  CHECK(lin[0] == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(lin[1] == doctest::Approx(2.0 / 6).epsilon(1e-12));
  CHECK(lin[2] == doctest::Approx(3.0 / 6).epsilon(1e-12));

  const auto lg = recency_weights(2, Weighting::LOG);
  CHECK(lg[0] == doctest::Approx(0.3869).epsilon(1e-4));
  CHECK(lg[1] == doctest::Approx(0.6131).epsilon(1e-4));

  const auto rev = recency_weights(3, Weighting::LINEAR, true);
  CHECK(rev[0] == doctest::Approx(3.0 / 6));

  for (auto w : {Weighting::UNIFORM, Weighting::LINEAR, Weighting::SQRT, Weighting::QUADRATIC, Weighting::CUBIC,
                 Weighting::FIFTH, Weighting::TENTH, Weighting::EXP, Weighting::LOG}) {
    for (int n : {1, 2, 7, 40}) {
      const auto wv = recency_weights(n, w);
      const auto ref = oracle::recency(n, w, false);
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        CHECK(wv[static_cast<std::size_t>(i)] == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-12));
        sum += wv[static_cast<std::size_t>(i)];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(recency_weights(0, Weighting::UNIFORM), InvalidCount);
  CHECK_THROWS_AS(WeightVector({0.5, 0.6}), WeightMismatch);
  CHECK_THROWS_AS(WeightVector({1.5, -0.5}), WeightMismatch);
}

TEST_CASE("weight average") {
  std::vector<Checkpoint> ms = {vec({0, 2}), vec({2, 4})};
  check_close(weight_average(ms, WeightVector::uniform(2)), {1, 3}, 0);
  check_close(weight_average(ms, WeightVector({0.25, 0.75})), {1.5, 3.5}, 1e-7);
  CHECK_THROWS_AS(weight_average(ms, WeightVector::uniform(3)), WeightMismatch);
  CHECK_THROWS_AS(weight_average(std::vector<Checkpoint>{}, WeightVector::uniform(1)), EmptyInput);
  std::vector<Checkpoint> bad = {vec({1}), vec({1}, "layer.2.weight")};
  CHECK_THROWS_AS(weight_average(bad, WeightVector::uniform(2)), KeyMismatch);
}

TEST_CASE("slerp analytic values") {
  const auto base = vec({0, 0});
  const auto a = vec({1, 0}), b = vec({0, 1});
  check_close(slerp(base, a, b, 0.0), {1, 0}, 1e-9);
  check_close(slerp(base, a, b, 1.0), {0, 1}, 1e-9);
  check_close(slerp(base, a, b, 0.5), {std::sqrt(2.0) / 2, std::sqrt(2.0) / 2}, 1e-7);

  SUBCASE("parallel vectors fall back to linear interpolation") {
    check_close(slerp(base, vec({1, 1}), vec({2, 2}), 0.5), {1.5, 1.5}, 1e-7);
    check_close(slerp(base, vec({1, 1}), vec({-1, -1}), 0.25), {0.5, 0.5}, 1e-7);
  }
  SUBCASE("continuous across the small-angle cutoff") {
    const double omega = 1e-4;
    const auto near_b = vec({static_cast<float>(std::cos(omega)), static_cast<float>(std::sin(omega))});
    const auto s = slerp(base, a, near_b, 0.5);
    check_close(s, {(1 + std::cos(omega)) / 2, std::sin(omega) / 2}, 1e-6);
  }
  CHECK_THROWS_AS(slerp(base, a, b, 1.5), ConfigError);
}

TEST_CASE("model stock ratio") {
  const auto base = vec({0, 0});
  SUBCASE("identical experts keep the midpoint") {
    check_close(model_stock(base, vec({1, 2}), vec({1, 2})), {1, 2}, 1e-7);
  }
  SUBCASE("orthogonal experts return the base") {
    check_close(model_stock(vec({5, 5}), vec({6, 5}), vec({5, 6})), {5, 5}, 1e-7);
  }
  SUBCASE("45 degrees") {
    const double r = 2 * std::cos(std::numbers::pi / 4) / (1 + std::cos(std::numbers::pi / 4));
    CHECK(r == doctest::Approx(0.8284).epsilon(1e-4));
    const double s = std::sqrt(0.5);
    const auto got = model_stock(base, vec({1, 0}), vec({static_cast<float>(s), static_cast<float>(s)}));
    check_close(got, {r * (1 + s) / 2, r * s / 2}, 1e-6);
  }
  SUBCASE("obtuse angle clamps to the base") {
    check_close(model_stock(base, vec({1, 0}), vec({-1, 0.1f})), {0, 0}, 1e-7);
  }
}

TEST_CASE("lines layer scale") {
  CHECK(lines_layer_scale(1, 3, 0.5, 0.5) == doctest::Approx(0.5));
  CHECK(lines_layer_scale(2, 3, 0.5, 0.5) == doctest::Approx(0.75));
  CHECK(lines_layer_scale(3, 3, 0.5, 0.5) == doctest::Approx(1.0));
  CHECK(lines_layer_scale(1, 1, 0.3, 0.9) == doctest::Approx(0.3));

  TaskVector tv;
  tv.deltas.set("layer.1.weight", Tensor({1}, {2}));
  tv.deltas.set("layer.2.weight", Tensor({1}, {2}));
  tv.deltas.set("layer.3.weight", Tensor({1}, {2}));
  const auto r = lines_rescale(tv, 3, 0.5, 0.5);
  CHECK(r.deltas.at("layer.1.weight").data[0] == doctest::Approx(1.0));
  CHECK(r.deltas.at("layer.2.weight").data[0] == doctest::Approx(1.5));
  CHECK(r.deltas.at("layer.3.weight").data[0] == doctest::Approx(2.0));
}

TEST_CASE("ties merge") {
  const auto base = vec({0, 0, 0});
  std::vector<Checkpoint> ex = {vec({1, -2, 0.5f}), vec({3, 1, -0.5f})};
  check_close(ties_merge(base, ex, 1.0, 0.0, WeightVector::uniform(2)), {2, -2, 0.5}, 1e-7);
  check_close(ties_merge(base, ex, 0.5, 0.0, WeightVector::uniform(2)), {1, -1, 0.25}, 1e-7);

  SUBCASE("trim keeps the top share per expert") {
    std::vector<Checkpoint> one = {vec({0.1f, -4, 2, 0.2f})};
    check_close(ties_merge(vec({0, 0, 0, 0}), one, 1.0, 0.5, WeightVector::uniform(1)), {0, -4, 2, 0}, 1e-7);
  }
  SUBCASE("weighted mean over agreeing entries") {
    std::vector<Checkpoint> two = {vec({2}), vec({4})};
    check_close(ties_merge(vec({0}), two, 1.0, 0.0, WeightVector({0.25, 0.75})), {3.5}, 1e-6);
  }
  SUBCASE("equals task arithmetic when every sign agrees") {
    Rng rng(3);
    auto b = rnd(rng);
    std::vector<Checkpoint> es;
    for (int i = 0; i < 3; ++i) {
      Checkpoint e = b;
      for (const auto& name : e.names())
        for (auto& v : e.at(name).data) v += static_cast<float>(0.1 + rng.uniform());
      es.push_back(e);
    }
    const auto w = recency_weights(3, Weighting::QUADRATIC);
    CHECK(max_diff(ties_merge(b, es, 0.7, 0.0, w), task_arithmetic(b, es, 0.7, w)) <= 1e-6);
  }
}

TEST_CASE("breadcrumbs") {
  TaskVector tv;
  tv.deltas.set("x", Tensor({4}, {0.1f, 1, 10, 100}));
  CHECK(breadcrumbs_sparsify(tv, 0.25, 0.25).deltas.at("x").data == std::vector<float>{0, 1, 10, 0});
  CHECK(breadcrumbs_sparsify(tv, 0.0, 0.0).deltas.at("x").data == tv.deltas.at("x").data);

  SUBCASE("tail counts floor beta*n") {
    TaskVector big;
    std::vector<float> v(100);
    std::iota(v.begin(), v.end(), 1.0f);
    big.deltas.set("x", Tensor({100}, v));
    for (double beta : {0.29, 0.3, 0.015, 0.07}) {
      const auto out = breadcrumbs_sparsify(big, beta, 0.0).deltas.at("x").data;
      const auto zeros = static_cast<std::size_t>(std::count(out.begin(), out.end(), 0.0f));
      CHECK(zeros == static_cast<std::size_t>(std::floor(beta * 100 + 1e-9)));
      CHECK(oracle::max_abs_diff(breadcrumbs_sparsify(big, beta, 0.0).deltas,
                                 oracle::Flat{{"x", oracle::breadcrumbs(oracle::Vec(v.begin(), v.end()), beta, 0.0)}}) ==
            0.0);
    }
  }
  CHECK_THROWS_AS(breadcrumbs_sparsify(tv, 0.5, 0.5), InvalidThresholds);
  CHECK_THROWS_AS(breadcrumbs_sparsify(tv, -0.1, 0.0), InvalidThresholds);
}

TEST_CASE("dare") {
  TaskVector tv;
  tv.deltas.set("x", Tensor({1000}, std::vector<float>(1000, 1.0f)));
  CHECK(dare_sparsify(tv, 0.0, 5).deltas.at("x").data == tv.deltas.at("x").data);

  const auto a = dare_sparsify(tv, 0.3, 5), b = dare_sparsify(tv, 0.3, 5), c = dare_sparsify(tv, 0.3, 6);
  CHECK(a.deltas.bitwise_equal(b.deltas));
  CHECK_FALSE(a.deltas.bitwise_equal(c.deltas));
  for (float v : a.deltas.at("x").data) CHECK((v == 0.0f || std::fabs(v - 1.0f / 0.7f) < 1e-6));

  CHECK_THROWS_AS(dare_sparsify(tv, 1.0, 0), InvalidProbability);
  CHECK_THROWS_AS(dare_sparsify(tv, -0.1, 0), InvalidProbability);
}

TEST_CASE("magmax") {
  std::vector<Checkpoint> ex = {vec({1, -3}), vec({-2, 2})};
  check_close(magmax_merge(vec({0, 0}), ex, 1.0), {-2, -3}, 0);
  check_close(magmax_merge(vec({1, 1}), std::vector<Checkpoint>{vec({2, -2}), vec({0, 3})}, 0.5), {1.5, -0.5}, 1e-7);
  std::vector<Checkpoint> tie = {vec({1}), vec({-1})};
  check_close(magmax_merge(vec({0}), tie, 1.0), {1}, 0);
}

TEST_CASE("dispatch arity and validation") {
  MergeConfig cfg;
  cfg.technique = Technique::SLERP;
  std::vector<Checkpoint> three = {vec({1}), vec({2}), vec({3})};
  CHECK_THROWS_AS(merge(cfg, vec({0}), three), ArityError);
  cfg.technique = Technique::MODEL_STOCK;
  CHECK_THROWS_AS(merge(cfg, vec({0}), std::vector<Checkpoint>{vec({1})}), ArityError);

  cfg.technique = Technique::TA;
  CHECK_THROWS_AS(merge(cfg, vec({0}), std::vector<Checkpoint>{}), EmptyInput);
  CHECK_THROWS_AS(merge(cfg, vec({0, 0}), std::vector<Checkpoint>{vec({1})}), ShapeMismatch);

  MergeConfig bad;
  bad.lambda_scale = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.dare_p = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  SUBCASE("fold_pairwise reduces left to right") {
    MergeConfig s;
    s.technique = Technique::SLERP;
    s.slerp_weight = 0.5;
    const auto folded = fold_pairwise(s, vec({0, 0}), std::vector<Checkpoint>{vec({1, 0}), vec({0, 1}), vec({1, 1})});
    const auto step = slerp(vec({0, 0}), vec({1, 0}), vec({0, 1}), 0.5);
    CHECK(folded.bitwise_equal(slerp(vec({0, 0}), step, vec({1, 1}), 0.5)));
    CHECK(fold_pairwise(s, vec({0, 0}), std::vector<Checkpoint>{vec({4, 4})}).bitwise_equal(vec({4, 4})));
  }
}

TEST_CASE("properties") {
  Rng rng(11);
  const auto base = rnd(rng);
  std::vector<Checkpoint> ex;
  for (int i = 0; i < 4; ++i) ex.push_back(rnd(rng));
  std::vector<Checkpoint> perm = {ex[2], ex[0], ex[3], ex[1]};

  SUBCASE("uniform merges ignore candidate order") {
    for (auto t : {Technique::WA, Technique::TA, Technique::TIES, Technique::BREADCRUMBS_TIES, Technique::MAGMAX,
                   Technique::LINES_TIES}) {
      MergeConfig cfg;
      cfg.technique = t;
      cfg.prune_fraction = 0.3;
      cfg.bread_beta = 0.1;
      cfg.bread_gamma = 0.05;
      CAPTURE(to_string(t));
      CHECK(max_diff(merge(cfg, base, ex), merge(cfg, base, perm)) <= 1e-6);
    }
  }
  SUBCASE("merging copies of one model returns it") {
    std::vector<Checkpoint> same(3, ex[0]);
    for (auto t : {Technique::WA, Technique::TA, Technique::TIES, Technique::MAGMAX}) {
      MergeConfig cfg;
      cfg.technique = t;
      CAPTURE(to_string(t));
      CHECK(max_diff(merge(cfg, base, same), ex[0]) <= 1e-6);
    }
    MergeConfig s;
    s.technique = Technique::SLERP;
    CHECK(max_diff(merge(s, base, std::vector<Checkpoint>{ex[0], ex[0]}), ex[0]) <= 1e-6);
    s.technique = Technique::MODEL_STOCK;
    CHECK(max_diff(merge(s, base, std::vector<Checkpoint>{ex[0], ex[0]}), ex[0]) <= 1e-6);
  }
  SUBCASE("weight average stays inside the element-wise hull") {
    const auto wa = weight_average(ex, recency_weights(4, Weighting::CUBIC));
    for (const auto& [name, t] : wa)
      for (std::size_t j = 0; j < t.numel(); ++j) {
        float lo = ex[0].at(name).data[j], hi = lo;
        for (const auto& e : ex) {
          lo = std::min(lo, e.at(name).data[j]);
          hi = std::max(hi, e.at(name).data[j]);
        }
        CHECK(t.data[j] >= lo - 1e-6f);
        CHECK(t.data[j] <= hi + 1e-6f);
      }
  }
  SUBCASE("linear techniques commute with scaling about the base") {
    const auto zero = zeros_like(base);
    std::vector<Checkpoint> scaled;
    for (const auto& e : ex) scaled.push_back(checkpoint_scale(e, 2.5));
    for (auto t : {Technique::WA, Technique::TA, Technique::TIES, Technique::BREADCRUMBS_TIES, Technique::MAGMAX,
                   Technique::LINES_TIES}) {
      MergeConfig cfg;
      cfg.technique = t;
      cfg.lambda_scale = 0.6;
      cfg.prune_fraction = 0.2;
      CAPTURE(to_string(t));
      CHECK(max_diff(merge(cfg, zero, scaled), checkpoint_scale(merge(cfg, zero, ex), 2.5)) <= 1e-5);
    }
  }
}

TEST_CASE("random configurations agree with the reference implementations") {
  Rng rng(2024);
  const std::vector<Technique> all = {Technique::WA,      Technique::SLERP,       Technique::TA,
                                      Technique::TIES,    Technique::DARE_TIES,   Technique::BREADCRUMBS_TIES,
                                      Technique::MAGMAX,  Technique::MODEL_STOCK, Technique::LINES_TIES};
  for (int trial = 0; trial < 90; ++trial) {
    MergeConfig cfg;
    cfg.technique = all[static_cast<std::size_t>(trial) % all.size()];
    cfg.lambda_scale = 0.1 + 0.9 * rng.uniform();
    cfg.slerp_weight = rng.uniform();
    cfg.prune_fraction = 0.9 * rng.uniform();
    cfg.dare_p = 0.8 * rng.uniform();
    cfg.bread_beta = 0.3 * rng.uniform();
    cfg.bread_gamma = 0.2 * rng.uniform();
    cfg.lines_alpha = rng.uniform();
    cfg.lines_beta = rng.uniform();
    cfg.weighting = static_cast<Weighting>(rng.below(9));
    cfg.reversed = rng.uniform() < 0.5;
    cfg.rng_seed = rng.next();
    const int n = is_pairwise(cfg.technique) ? 2 : 1 + static_cast<int>(rng.below(5));
    const auto base = rnd(rng);
    std::vector<Checkpoint> cands;
    for (int i = 0; i < n; ++i) cands.push_back(checkpoint_add(base, rnd(rng, 0.3)));
    CAPTURE(trial);
    CAPTURE(to_string(cfg.technique));
    const auto got = merge(cfg, base, cands);
    CHECK(oracle::max_abs_diff(got, oracle::merge(cfg, oracle::flat(base), oracle::flat_all(cands))) <= 1e-6);
  }
}
