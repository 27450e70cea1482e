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


// Serial vs OpenMP merge kernels over a range of tensor sizes.

#include <benchmark/benchmark.h>

#include <vector>

#include "chronomerge/kernels.hpp"
#include "chronomerge/random.hpp"

namespace {

using namespace chronomerge;

struct Inputs {
  std::vector<float> base;
  std::vector<std::vector<float>> rows;
  std::vector<std::vector<double>> deltas;
  std::vector<std::span<const float>> row_spans;
  std::vector<std::span<const double>> delta_spans;
  std::vector<double> w;
  std::vector<float> out;

  Inputs(std::size_t n, std::size_t experts) : base(n), out(n) {
    Rng rng(n);
    for (auto& v : base) v = static_cast<float>(rng.normal());
    for (std::size_t i = 0; i < experts; ++i) {
      rows.emplace_back(n);
      deltas.emplace_back(n);
      for (std::size_t j = 0; j < n; ++j) {
        rows.back()[j] = static_cast<float>(rng.normal());
        deltas.back()[j] = rng.normal();
      }
      w.push_back(1.0 / static_cast<double>(experts));
    }
    row_spans.assign(rows.begin(), rows.end());
    delta_spans.assign(deltas.begin(), deltas.end());
  }
};

template <bool Parallel>
void BM_WeightedDeltaSum(benchmark::State& state) {
  Inputs in(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::omp::weighted_delta_sum(in.base, in.row_spans, in.w, 0.5, in.out);
    else kernels::serial::weighted_delta_sum(in.base, in.row_spans, in.w, 0.5, in.out);
    benchmark::DoNotOptimize(in.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_TiesCombine(benchmark::State& state) {
  Inputs in(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::omp::ties_combine(in.base, in.delta_spans, in.w, 1.0, in.out);
    else kernels::serial::ties_combine(in.base, in.delta_spans, in.w, 1.0, in.out);
    benchmark::DoNotOptimize(in.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Dot(benchmark::State& state) {
  Inputs in(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) {
    double d = Parallel ? kernels::omp::dot(in.deltas[0], in.deltas[1]) : kernels::serial::dot(in.deltas[0], in.deltas[1]);
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_WeightedDeltaSum<false>)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_WeightedDeltaSum<true>)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_TiesCombine<false>)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_TiesCombine<true>)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_Dot<false>)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_Dot<true>)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);

BENCHMARK_MAIN();
