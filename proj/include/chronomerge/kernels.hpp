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

// Flat-array merge kernels.
//
// Every kernel exists twice: a plain serial loop in `kernels::serial` (the
// reference, used by tests and for small tensors) and an OpenMP version in
// `kernels::omp`. Element-wise kernels produce bit-identical results in both
// versions. `dot` in the OpenMP version sums fixed-size blocks and then adds
// the block partials in order, so its result does not depend on the thread
// count but may differ from the serial sum in the last bits.
//
// The unqualified functions dispatch on length only, which keeps results
// reproducible across machines with different core counts.

#pragma once

#include <cstddef>
#include <span>

namespace chronomerge::kernels {

using FloatRows = std::span<const std::span<const float>>;
using DoubleRows = std::span<const std::span<const double>>;

/// Tensors shorter than this always take the serial path.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 15;
/// Block size of the deterministic parallel reduction.
inline constexpr std::size_t kReductionBlock = 4096;

namespace serial {
// out[j] = sum_i w_i * rows_i[j]
void weighted_sum(FloatRows rows, std::span<const double> w, std::span<float> out);
// out[j] = base[j] + lam * sum_i w_i * (rows_i[j] - base[j])
void weighted_delta_sum(std::span<const float> base, FloatRows rows, std::span<const double> w, double lam,
                        std::span<float> out);
// Sign election by sum of deltas (ties -> +), then weighted mean over the
// entries agreeing with the elected sign; out = base + lam * mean.
void ties_combine(std::span<const float> base, DoubleRows deltas, std::span<const double> w, double lam,
                  std::span<float> out);
// out = base + lam * delta_{argmax_i |delta_i|}, lowest index wins ties.
void magmax_combine(std::span<const float> base, DoubleRows deltas, double lam, std::span<float> out);
// out = base + c1 * d1 + c2 * d2
void two_term_combine(std::span<const float> base, std::span<const double> d1, double c1, std::span<const double> d2,
                      double c2, std::span<float> out);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace serial

namespace omp {
void weighted_sum(FloatRows rows, std::span<const double> w, std::span<float> out);
void weighted_delta_sum(std::span<const float> base, FloatRows rows, std::span<const double> w, double lam,
                        std::span<float> out);
void ties_combine(std::span<const float> base, DoubleRows deltas, std::span<const double> w, double lam,
                  std::span<float> out);
void magmax_combine(std::span<const float> base, DoubleRows deltas, double lam, std::span<float> out);
void two_term_combine(std::span<const float> base, std::span<const double> d1, double c1, std::span<const double> d2,
                      double c2, std::span<float> out);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace omp

void weighted_sum(FloatRows rows, std::span<const double> w, std::span<float> out);
void weighted_delta_sum(std::span<const float> base, FloatRows rows, std::span<const double> w, double lam,
                        std::span<float> out);
void ties_combine(std::span<const float> base, DoubleRows deltas, std::span<const double> w, double lam,
                  std::span<float> out);
void magmax_combine(std::span<const float> base, DoubleRows deltas, double lam, std::span<float> out);
void two_term_combine(std::span<const float> base, std::span<const double> d1, double c1, std::span<const double> d2,
                      double c2, std::span<float> out);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace chronomerge::kernels
