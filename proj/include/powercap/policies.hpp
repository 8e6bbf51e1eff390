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

// Baseline capping policies for head-to-head comparison with the fair
// optimizer. All of them pick discrete core and memory frequency indices.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "powercap/capper.hpp"
#include "powercap/errors.hpp"
#include "powercap/model.hpp"

namespace powercap {

struct PolicyResult {
  std::string policy_name;
  std::vector<std::size_t> core_freq_idx;
  std::size_t mem_freq_idx = 0;
  double d_equivalent = 0.0;      // 1 / worst-core degradation
  double throughput_score = 0.0;  // sum_i w_i / turnaround_i
  double power = 0.0;
  double worst_degradation = 0.0;
  double average_degradation = 0.0;

  bool operator==(const PolicyResult&) const = default;
};

// Instructions-per-access proxy for each core. Instructions between misses
// scale with the think time at maximum frequency.
struct ThroughputWeights {
  std::vector<double> w;

  static ThroughputWeights from_instance(const Instance& inst) {
    ThroughputWeights tw;
    for (const auto& c : inst.cores) tw.w.push_back(c.z_min * inst.core_freq_grid.back());
    return tw;
  }
};

inline constexpr double kDefaultEnumerationCap = 2e6;

namespace detail {

inline double throughput(const Instance& inst, std::span<const std::size_t> core_idx, std::size_t mem_idx,
                         const std::vector<double>& w) {
  const double s_b = inst.memory.s_b_grid[mem_idx];
  double score = 0.0;
  for (std::size_t i = 0; i < core_idx.size(); ++i) {
    const auto& c = inst.cores[i];
    const double z = c.z_min / inst.core_freq_grid[core_idx[i]];
    score += w[i] / turnaround(z, c.cache_time, core_response_time(inst, i, s_b));
  }
  return score;
}

inline PolicyResult make_result(const std::string& name, const Instance& inst, std::vector<std::size_t> core_idx,
                                std::size_t mem_idx) {
  const auto ev = evaluate_assignment(inst, core_idx, mem_idx);
  PolicyResult r;
  r.policy_name = name;
  r.core_freq_idx = std::move(core_idx);
  r.mem_freq_idx = mem_idx;
  r.d_equivalent = ev.d_equivalent;
  r.power = ev.power;
  r.worst_degradation = ev.worst_degradation;
  r.average_degradation = ev.average_degradation;
  r.throughput_score = throughput(inst, r.core_freq_idx, mem_idx, ThroughputWeights::from_instance(inst).w);
  return r;
}

}  // namespace detail

// The fair optimizer with memory pinned at its maximum frequency.
inline PolicyResult solve_cpu_only(const Instance& inst, QuantizeMode mode = QuantizeMode::NearestThenRepairDown) {
  SolverOptions opts;
  opts.quantize_mode = mode;
  const auto sol = conditional_solve(inst, inst.memory.s_b_min, opts);
  FrequencyPlan plan;
  plan.think_times = sol.think_times;
  plan.s_b = sol.s_b;
  plan.mem_freq_idx = 0;
  quantize(inst, plan, mode);
  return detail::make_result("cpu_only", inst, plan.core_freq_idx, 0);
}

// Equal split of the post-memory budget across cores, best memory point.
inline PolicyResult solve_eql_pwr(const Instance& inst) {
  const std::size_t n = inst.cores.size();
  const auto& grid = inst.core_freq_grid;
  std::optional<PolicyResult> best;
  for (std::size_t m = 0; m < inst.memory.levels(); ++m) {
    const double share = (inst.budget.watts() - memory_dynamic_power(inst.memory, inst.memory.s_b_grid[m]) -
                          inst.budget.p_static) /
                         static_cast<double>(n);
    std::vector<std::size_t> idx(n);
    bool ok = share >= 0.0;
    for (std::size_t i = 0; ok && i < n; ++i) {
      bool found = false;
      for (std::size_t k = grid.size(); k-- > 0;) {
        if (detail::quantized_core_power(inst, i, k) <= share) {
          idx[i] = k;
          found = true;
          break;
        }
      }
      ok = found;
    }
    if (!ok) continue;
    auto r = detail::make_result("eql_pwr", inst, std::move(idx), m);
    if (!best || r.d_equivalent > best->d_equivalent) best = std::move(r);
  }
  if (!best) throw detail::grid_infeasible(inst);
  return *best;
}

// One frequency for every core; scans all (core level, memory level) pairs.
inline PolicyResult solve_eql_freq(const Instance& inst) {
  const std::size_t n = inst.cores.size();
  std::optional<PolicyResult> best;
  for (std::size_t m = 0; m < inst.memory.levels(); ++m) {
    for (std::size_t f = inst.core_freq_grid.size(); f-- > 0;) {
      std::vector<std::size_t> idx(n, f);
      if (evaluate_assignment(inst, idx, m).power > inst.budget.watts()) continue;
      auto r = detail::make_result("eql_freq", inst, std::move(idx), m);
      if (!best || r.d_equivalent > best->d_equivalent) best = std::move(r);
      break;  // lower core levels at this memory point only lose
    }
  }
  if (!best) throw detail::grid_infeasible(inst);
  return *best;
}

// Throughput maximization by exhaustive enumeration of every core and memory
// frequency combination within the budget.
inline PolicyResult solve_maxbips(const Instance& inst, const ThroughputWeights& weights,
                                  double enumeration_cap = kDefaultEnumerationCap) {
  const std::size_t n = inst.cores.size();
  const std::size_t f_levels = inst.core_freq_grid.size();
  const std::size_t m_levels = inst.memory.levels();
  if (weights.w.size() != n) throw ValidationError("solve_maxbips: weight vector length mismatch");
  for (double w : weights.w)
    if (!(w > 0.0)) throw ValidationError("solve_maxbips: weights must be > 0");
  const double combos = std::pow(static_cast<double>(f_levels), static_cast<double>(n)) * static_cast<double>(m_levels);
  if (combos > enumeration_cap) throw EnumerationTooLarge(combos, enumeration_cap);

  // Per-core tables: power and weighted rate for each (level, memory point).
  std::vector<std::vector<double>> core_power(n, std::vector<double>(f_levels));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < f_levels; ++k) core_power[i][k] = detail::quantized_core_power(inst, i, k);

  const double budget = inst.budget.watts();
  bool found = false;
  double best_score = -1.0, best_power = 0.0;
  std::vector<std::size_t> best_idx;
  std::size_t best_mem = 0;

  std::vector<std::size_t> idx(n);
  std::vector<std::vector<double>> rate(n, std::vector<double>(f_levels));
  for (std::size_t m = 0; m < m_levels; ++m) {
    const double s_b = inst.memory.s_b_grid[m];
    const double base = memory_dynamic_power(inst.memory, s_b) + inst.budget.p_static;
    if (base > budget) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = inst.cores[i];
      const double r = core_response_time(inst, i, s_b);
      for (std::size_t k = 0; k < f_levels; ++k)
        rate[i][k] = weights.w[i] / turnaround(c.z_min / inst.core_freq_grid[k], c.cache_time, r);
    }
    // Odometer over core levels, core 0 fastest-varying.
    std::fill(idx.begin(), idx.end(), 0);
    for (;;) {
      double p = base, score = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        p += core_power[i][idx[i]];
        score += rate[i][idx[i]];
      }
      if (p <= budget &&
          (!found || score > best_score || (score == best_score && p < best_power))) {
        found = true;
        best_score = score;
        best_power = p;
        best_idx = idx;
        best_mem = m;
      }
      std::size_t i = 0;
      while (i < n && ++idx[i] == f_levels) idx[i++] = 0;
      if (i == n) break;
    }
  }
  if (!found) throw detail::grid_infeasible(inst);
  auto r = detail::make_result("maxbips", inst, best_idx, best_mem);
  r.throughput_score = best_score;
  return r;
}

// The fair optimizer expressed as a PolicyResult (quantized plan).
inline PolicyResult solve_fastcap_policy(const Instance& inst,
                                         QuantizeMode mode = QuantizeMode::NearestThenRepairDown) {
  SolverOptions opts;
  opts.quantize_mode = mode;
  const auto plan = fastcap_solve(inst, opts);
  return detail::make_result("fastcap", inst, plan.core_freq_idx, plan.mem_freq_idx);
}

}  // namespace powercap
