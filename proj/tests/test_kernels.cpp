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

#include <cstring>
#include <vector>

#include "chronomerge/kernels.hpp"
#include "chronomerge/random.hpp"

using namespace chronomerge;

namespace {

constexpr std::size_t kN = kernels::kParallelThreshold * 2 + 37;

std::vector<float> floats(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

std::vector<double> doubles(Rng& rng, std::size_t n, double zero_share = 0.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform() < zero_share ? 0.0 : rng.normal();
  return v;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("parallel kernels match the serial loops bit for bit") {
  Rng rng(99);
  const auto base = floats(rng, kN);
  const std::vector<std::vector<float>> rows = {floats(rng, kN), floats(rng, kN), floats(rng, kN)};
  std::vector<std::span<const float>> rv(rows.begin(), rows.end());
  const std::vector<std::vector<double>> deltas = {doubles(rng, kN, 0.2), doubles(rng, kN, 0.2), doubles(rng, kN, 0.2)};
  std::vector<std::span<const double>> dv(deltas.begin(), deltas.end());
  const std::vector<double> w = {0.2, 0.3, 0.5};
  std::vector<float> s(kN), p(kN);

  kernels::serial::weighted_sum(rv, w, s);
  kernels::omp::weighted_sum(rv, w, p);
  CHECK(same_bits(s, p));

  kernels::serial::weighted_delta_sum(base, rv, w, 0.7, s);
  kernels::omp::weighted_delta_sum(base, rv, w, 0.7, p);
  CHECK(same_bits(s, p));

  kernels::serial::ties_combine(base, dv, w, 0.9, s);
  kernels::omp::ties_combine(base, dv, w, 0.9, p);
  CHECK(same_bits(s, p));

  kernels::serial::magmax_combine(base, dv, 0.4, s);
  kernels::omp::magmax_combine(base, dv, 0.4, p);
  CHECK(same_bits(s, p));

  kernels::serial::two_term_combine(base, deltas[0], 0.3, deltas[1], -1.2, s);
  kernels::omp::two_term_combine(base, deltas[0], 0.3, deltas[1], -1.2, p);
  CHECK(same_bits(s, p));

  kernels::weighted_sum(rv, w, p);
  kernels::serial::weighted_sum(rv, w, s);
  CHECK(same_bits(s, p));
}

TEST_CASE("parallel dot sums fixed blocks in order") {
  Rng rng(5);
  const auto a = doubles(rng, kN), b = doubles(rng, kN);
  double blocked = 0.0;
  for (std::size_t lo = 0; lo < kN; lo += kernels::kReductionBlock) {
    const std::size_t hi = std::min(kN, lo + kernels::kReductionBlock);
    blocked += kernels::serial::dot(std::span(a).subspan(lo, hi - lo), std::span(b).subspan(lo, hi - lo));
  }
  CHECK(kernels::omp::dot(a, b) == blocked);
  CHECK(kernels::omp::dot(a, b) == doctest::Approx(kernels::serial::dot(a, b)).epsilon(1e-12));
}

TEST_CASE("serial kernels on tiny inputs") {
  const std::vector<float> base = {1, 1, 1};
  const std::vector<double> d1 = {1, -2, 0}, d2 = {3, 1, 0};
  std::vector<std::span<const double>> dv = {d1, d2};
  const std::vector<double> w = {0.5, 0.5};
  std::vector<float> out(3);
  kernels::serial::ties_combine(base, dv, w, 1.0, out);
  CHECK(out == std::vector<float>{3, -1, 1});
  kernels::serial::magmax_combine(base, dv, 1.0, out);
  CHECK(out == std::vector<float>{4, -1, 1});
  CHECK(kernels::serial::dot(d1, d2) == 1.0);
}
