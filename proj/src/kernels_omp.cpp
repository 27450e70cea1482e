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

#include <omp.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "chronomerge/kernels.hpp"

namespace chronomerge::kernels::omp {

namespace {
inline std::int64_t ssize(std::size_t n) { return static_cast<std::int64_t>(n); }
}  // namespace

void weighted_sum(FloatRows rows, std::span<const double> w, std::span<float> out) {
  const std::int64_t n = ssize(out.size());
  const std::size_t m = rows.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += w[i] * static_cast<double>(rows[i][j]);
    out[j] = static_cast<float>(acc);
  }
}

void weighted_delta_sum(std::span<const float> base, FloatRows rows, std::span<const double> w, double lam,
                        std::span<float> out) {
  const std::int64_t n = ssize(out.size());
  const std::size_t m = rows.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n; ++j) {
    const double b = base[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += w[i] * (static_cast<double>(rows[i][j]) - b);
    out[j] = static_cast<float>(b + lam * acc);
  }
}

void ties_combine(std::span<const float> base, DoubleRows deltas, std::span<const double> w, double lam,
                  std::span<float> out) {
  const std::int64_t n = ssize(out.size());
  const std::size_t m = deltas.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += deltas[i][j];
    const bool positive = total >= 0.0;
    double num = 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = deltas[i][j];
      if ((positive && d > 0.0) || (!positive && d < 0.0)) {
        num += w[i] * d;
        mass += w[i];
      }
    }
    const double merged = mass > 0.0 ? num / mass : 0.0;
    out[j] = static_cast<float>(static_cast<double>(base[j]) + lam * merged);
  }
}

void magmax_combine(std::span<const float> base, DoubleRows deltas, double lam, std::span<float> out) {
  const std::int64_t n = ssize(out.size());
  const std::size_t m = deltas.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n; ++j) {
    double best = 0.0;
    double best_abs = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double a = std::fabs(deltas[i][j]);
      if (a > best_abs) {
        best_abs = a;
        best = deltas[i][j];
      }
    }
    out[j] = static_cast<float>(static_cast<double>(base[j]) + lam * best);
  }
}

void two_term_combine(std::span<const float> base, std::span<const double> d1, double c1, std::span<const double> d2,
                      double c2, std::span<float> out) {
  const std::int64_t n = ssize(out.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n; ++j)
    out[j] = static_cast<float>(static_cast<double>(base[j]) + c1 * d1[j] + c2 * d2[j]);
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::int64_t blocks = ssize((n + kReductionBlock - 1) / kReductionBlock);
  std::vector<double> partial(static_cast<std::size_t>(blocks), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < blocks; ++k) {
    const std::size_t lo = static_cast<std::size_t>(k) * kReductionBlock;
    const std::size_t hi = std::min(n, lo + kReductionBlock);
    double acc = 0.0;
    for (std::size_t j = lo; j < hi; ++j) acc += a[j] * b[j];
    partial[static_cast<std::size_t>(k)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace chronomerge::kernels::omp
