/*
Copyright 2026 The powercap Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

// Solver wall-time measurement over randomized feasible instances.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "powercap/capper.hpp"
#include "powercap/errors.hpp"
#include "powercap/workload.hpp"

namespace powercap {

struct BenchRow {
  int n_cores = 0;
  int repetitions = 0;
  double mean_us = 0.0;
  double median_us = 0.0;
  double growth_ratio = 0.0;  // mean time relative to the previous row; 0 for the first
};

// Each repetition draws a fresh MIX instance at budget 0.6 and records the
// best of `trials` timed solves, which filters scheduler noise.
inline BenchRow bench_solver(int n_cores, int repetitions, std::uint64_t seed, const SolverOptions& opts = {},
                             int trials = 3) {
  if (repetitions < 1) throw ValidationError("bench: repetitions must be >= 1");
  if (n_cores < 1) throw ValidationError("bench: n must be >= 1");
  WorkloadClassSpec spec;
  spec.cls = WorkloadClass::MIX;
  std::vector<double> times;
  volatile double sink = 0.0;
  for (int r = 0; r < repetitions; ++r) {
    const auto inst = default_instance(synth_workload(spec, n_cores, seed + static_cast<std::uint64_t>(r)), 0.6);
    double best = 0.0;
    for (int t = 0; t < trials; ++t) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto plan = fastcap_solve(inst, opts);
      const double us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
      sink = sink + plan.d_value;
      best = t == 0 ? us : std::min(best, us);
    }
    times.push_back(best);
  }
  BenchRow row;
  row.n_cores = n_cores;
  row.repetitions = repetitions;
  for (double t : times) row.mean_us += t;
  row.mean_us /= static_cast<double>(times.size());
  std::sort(times.begin(), times.end());
  const std::size_t h = times.size() / 2;
  row.median_us = times.size() % 2 ? times[h] : 0.5 * (times[h - 1] + times[h]);
  return row;
}

inline std::vector<BenchRow> bench_solver(const std::vector<int>& ns, int repetitions, std::uint64_t seed,
                                          const SolverOptions& opts = {}) {
  if (ns.empty()) throw ValidationError("bench: n list must be nonempty");
  std::vector<BenchRow> rows;
  for (int n : ns) {
    auto row = bench_solver(n, repetitions, seed, opts);
    if (!rows.empty() && rows.back().mean_us > 0.0) row.growth_ratio = row.mean_us / rows.back().mean_us;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace powercap
