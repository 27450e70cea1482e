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

#include <cmath>

#include "chronomerge/kernels.hpp"

namespace chronomerge::kernels {

namespace serial {

void weighted_sum(FloatRows rows, std::span<const double> w, std::span<float> out) {
  for (std::size_t j = 0; j < out.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) acc += w[i] * static_cast<double>(rows[i][j]);
    out[j] = static_cast<float>(acc);
  }
}

void weighted_delta_sum(std::span<const float> base, FloatRows rows, std::span<const double> w, double lam,
                        std::span<float> out) {
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double b = base[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) acc += w[i] * (static_cast<double>(rows[i][j]) - b);
    out[j] = static_cast<float>(b + lam * acc);
  }
}

void ties_combine(std::span<const float> base, DoubleRows deltas, std::span<const double> w, double lam,
                  std::span<float> out) {
  for (std::size_t j = 0; j < out.size(); ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) total += deltas[i][j];
    const bool positive = total >= 0.0;
    double num = 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
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
  for (std::size_t j = 0; j < out.size(); ++j) {
    double best = 0.0;
    double best_abs = -1.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
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
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = static_cast<float>(static_cast<double>(base[j]) + c1 * d1[j] + c2 * d2[j]);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

}  // namespace serial

void weighted_sum(FloatRows rows, std::span<const double> w, std::span<float> out) {
  out.size() < kParallelThreshold ? serial::weighted_sum(rows, w, out) : omp::weighted_sum(rows, w, out);
}

void weighted_delta_sum(std::span<const float> base, FloatRows rows, std::span<const double> w, double lam,
                        std::span<float> out) {
  out.size() < kParallelThreshold ? serial::weighted_delta_sum(base, rows, w, lam, out)
                                  : omp::weighted_delta_sum(base, rows, w, lam, out);
}

void ties_combine(std::span<const float> base, DoubleRows deltas, std::span<const double> w, double lam,
                  std::span<float> out) {
  out.size() < kParallelThreshold ? serial::ties_combine(base, deltas, w, lam, out)
                                  : omp::ties_combine(base, deltas, w, lam, out);
}

void magmax_combine(std::span<const float> base, DoubleRows deltas, double lam, std::span<float> out) {
  out.size() < kParallelThreshold ? serial::magmax_combine(base, deltas, lam, out)
                                  : omp::magmax_combine(base, deltas, lam, out);
}

void two_term_combine(std::span<const float> base, std::span<const double> d1, double c1, std::span<const double> d2,
                      double c2, std::span<float> out) {
  out.size() < kParallelThreshold ? serial::two_term_combine(base, d1, c1, d2, c2, out)
                                  : omp::two_term_combine(base, d1, c1, d2, c2, out);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return a.size() < kParallelThreshold ? serial::dot(a, b) : omp::dot(a, b);
}

}  // namespace chronomerge::kernels
