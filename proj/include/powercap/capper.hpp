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

// Fair power capping over per-core and memory DVFS.
//
// The problem: maximize D subject to
//   (z_i + c_i + R(s_b)) / (zmin_i + c_i + R(s_b_min)) <= 1/D   for every core
//   sum_i P_i (zmin_i/z_i)^alpha_i + P_m (s_b_min/s_b)^beta + P_s <= B * Pbar
//   z_i >= zmin_i, s_b >= s_b_min.
//
// At the optimum both constraint families are tight, so for a fixed s_b every
// z_i is an explicit function of D and D is the root of a monotone scalar
// power equation (found by bisection, O(N) per evaluation). The outer search
// runs over the M discrete s_b candidates with a bracketing binary search,
// giving O(N log M) overall.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "powercap/errors.hpp"
#include "powercap/model.hpp"

namespace powercap {

enum class QuantizeMode {
  Nearest,                // closest grid frequency per core
  NearestThenRepairDown,  // then step cores down until the budget holds
};

inline std::string to_string(QuantizeMode m) {
  return m == QuantizeMode::Nearest ? "nearest" : "nearest_then_repair_down";
}

struct SolverOptions {
  double d_tolerance = 1e-9;
  QuantizeMode quantize_mode = QuantizeMode::Nearest;
  // Grids with at most this many points are scanned exhaustively.
  std::size_t exhaustive_threshold = 8;
};

// ---------------------------------------------------------------------------
// Response times

inline double weighted_response_time(const ControllerAccessModel& model, std::size_t core, double s_b) {
  if (core >= model.access_prob.size()) throw ValidationError("weighted_response_time: core out of range");
  const auto& row = model.access_prob[core];
  if (row.size() != model.controllers.size())
    throw ValidationError("weighted_response_time: probability row width != controller count");
  double r = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    const auto& c = model.controllers[k];
    r += row[k] * response_time(c.q_bank, c.u_bus, c.s_m, s_b);
  }
  return r;
}

// Response time seen by core i: the single-controller formula, or the
// access-weighted average when a multi-controller model is attached.
inline double core_response_time(const Instance& inst, std::size_t i, double s_b) {
  if (inst.access_model) return weighted_response_time(*inst.access_model, i, s_b);
  return response_time(inst.memory, s_b);
}

// ---------------------------------------------------------------------------
// Think time for a target D

struct ThinkTime {
  double z = 0.0;
  bool clamped = false;  // the core would need to run above maximum frequency
};

// z = (zmin + c + R_base)/d - c - R_now, floored at zmin.
inline ThinkTime z_from_d(const CoreProfile& core, double d, double r_base, double r_now) {
  if (!(d > 0.0 && d <= 1.0)) throw DomainError("z_from_d: d must be in (0, 1]");
  const double z_raw = (core.z_min + core.cache_time + r_base) / d - core.cache_time - r_now;
  if (z_raw < core.z_min) return {core.z_min, true};
  return {z_raw, false};
}

inline ThinkTime z_from_d(const CoreProfile& core, double d, const MemoryProfile& mem, double s_b) {
  if (s_b < mem.s_b_min) throw DomainError("z_from_d: s_b below s_b_min");
  return z_from_d(core, d, response_time(mem, mem.s_b_min), response_time(mem, s_b));
}

// ---------------------------------------------------------------------------
// Feasibility

enum class FeasibilityStatus { Feasible, InfeasibleFloor, InfeasibleBudgetZero };

struct Feasibility {
  FeasibilityStatus status = FeasibilityStatus::Feasible;
  double floor_power = 0.0;  // lowest power the model can reach
  double budget_watts = 0.0;
};

namespace detail {

// Power of core i when parked at the slowest think time the model considers.
inline double parked_core_power(const Instance& inst, std::size_t i) {
  const auto& c = inst.cores[i];
  return core_dynamic_power(c, std::max(c.z_min, inst.sentinel_z));
}

inline double floor_power_at(const Instance& inst, double s_b) {
  double p = memory_dynamic_power(inst.memory, s_b) + inst.budget.p_static;
  for (std::size_t i = 0; i < inst.cores.size(); ++i) p += parked_core_power(inst, i);
  return p;
}

inline bool groups_feasible(const Instance& inst) {
  for (const auto& g : inst.processor_budgets) {
    double p = 0.0;
    for (int i : g.cores) p += parked_core_power(inst, static_cast<std::size_t>(i));
    if (p > g.watts) return false;
  }
  return true;
}

}  // namespace detail

// Accepts unvalidated budgets so raw configuration can be screened.
inline Feasibility feasibility_check(const Instance& inst) {
  Feasibility f;
  f.budget_watts = inst.budget.watts();
  if (!(inst.budget.budget_fraction > 0.0) || !(inst.budget.p_peak > 0.0)) {
    f.status = FeasibilityStatus::InfeasibleBudgetZero;
    return f;
  }
  f.floor_power = detail::floor_power_at(inst, inst.memory.s_b_grid.back());
  if (f.budget_watts < f.floor_power || !detail::groups_feasible(inst))
    f.status = FeasibilityStatus::InfeasibleFloor;
  return f;
}

// ---------------------------------------------------------------------------
// Conditional solve at a fixed bus transfer time

struct ConditionalSolution {
  double s_b = 0.0;
  double d_value = 0.0;             // power-binding D (1 when the budget is slack)
  std::vector<double> think_times;
  double power = 0.0;
  std::vector<int> clamped_cores;   // core ids pinned at maximum frequency
  // Achieved max-min objective: min over cores of 1/degradation. Equals
  // d_value unless some core is clamped.
  double worst_d = 0.0;
};

namespace detail {

// Per-s_b constants of the scalar power equation.
class PowerEquation {
 public:
  PowerEquation(const Instance& inst, double s_b) : inst_(inst), s_b_(s_b) {
    const std::size_t n = inst.cores.size();
    r_base_.resize(n);
    r_now_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      r_base_[i] = core_response_time(inst, i, inst.memory.s_b_min);
      r_now_[i] = core_response_time(inst, i, s_b);
    }
    fixed_ = memory_dynamic_power(inst.memory, s_b) + inst.budget.p_static;
  }

  // Same arithmetic as z_from_d, without the argument checks.
  double think_time(std::size_t i, double d) const {
    const auto& c = inst_.cores[i];
    const double z_raw = (c.z_min + c.cache_time + r_base_[i]) / d - c.cache_time - r_now_[i];
    return z_raw < c.z_min ? c.z_min : z_raw;
  }

  double core_power(std::size_t i, double d) const {
    const auto& c = inst_.cores[i];
    return c.p_max * std::pow(c.z_min / think_time(i, d), c.alpha);
  }

  double total(double d) const {
    double p = fixed_;
    for (std::size_t i = 0; i < r_base_.size(); ++i) p += core_power(i, d);
    return p;
  }

  bool within_budget(double d) const {
    if (total(d) > inst_.budget.watts()) return false;
    for (const auto& g : inst_.processor_budgets) {
      double p = 0.0;
      for (int i : g.cores) p += core_power(static_cast<std::size_t>(i), d);
      if (p > g.watts) return false;
    }
    return true;
  }

  double r_base(std::size_t i) const { return r_base_[i]; }
  double r_now(std::size_t i) const { return r_now_[i]; }
  double s_b() const { return s_b_; }

 private:
  const Instance& inst_;
  double s_b_;
  std::vector<double> r_base_;  // R at s_b_min
  std::vector<double> r_now_;   // R at s_b
  double fixed_;
};

}  // namespace detail

inline ConditionalSolution conditional_solve(const Instance& inst, double s_b, const SolverOptions& opts = {}) {
  if (s_b < inst.memory.s_b_min) throw DomainError("conditional_solve: s_b below s_b_min");
  const double floor = detail::floor_power_at(inst, s_b);
  if (inst.budget.watts() < floor || !detail::groups_feasible(inst)) throw Infeasible(floor, inst.budget.watts());

  const detail::PowerEquation eq(inst, s_b);
  double d = 1.0;
  if (!eq.within_budget(1.0)) {
    // Power is nondecreasing in d; the limit d -> 0 sits below the floor.
    double lo = 0.0, hi = 1.0;
    while (hi - lo > opts.d_tolerance) {
      const double mid = 0.5 * (lo + hi);
      (eq.within_budget(mid) ? lo : hi) = mid;
    }
    d = lo;
    if (!(d > 0.0)) throw Infeasible(floor, inst.budget.watts());
  }

  ConditionalSolution sol;
  sol.s_b = s_b;
  sol.d_value = d;
  sol.think_times.resize(inst.cores.size());
  sol.worst_d = d;
  for (std::size_t i = 0; i < inst.cores.size(); ++i) {
    const auto& c = inst.cores[i];
    const auto t = z_from_d(c, d, eq.r_base(i), eq.r_now(i));
    sol.think_times[i] = t.z;
    if (t.clamped) {
      sol.clamped_cores.push_back(c.core_id);
      sol.worst_d = std::min(sol.worst_d, 1.0 / degradation_ratio(c, t.z, eq.r_now(i), eq.r_base(i)));
    }
  }
  sol.power = total_power(inst, sol.think_times, s_b);
  return sol;
}

// ---------------------------------------------------------------------------
// Discrete assignments

struct AssignmentEval {
  double power = 0.0;
  std::vector<double> degradation;  // per core, >= 1
  double worst_degradation = 1.0;
  double average_degradation = 1.0;
  double d_equivalent = 1.0;        // 1 / worst_degradation
};

// Model-side evaluation of concrete grid indices.
inline AssignmentEval evaluate_assignment(const Instance& inst, std::span<const std::size_t> core_idx,
                                          std::size_t mem_idx) {
  if (core_idx.size() != inst.cores.size()) throw DomainError("evaluate_assignment: index vector length mismatch");
  const double s_b = inst.memory.s_b_grid.at(mem_idx);
  AssignmentEval ev;
  ev.power = memory_dynamic_power(inst.memory, s_b) + inst.budget.p_static;
  ev.degradation.resize(core_idx.size());
  double sum = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < core_idx.size(); ++i) {
    const auto& c = inst.cores[i];
    const double z = c.z_min / inst.core_freq_grid.at(core_idx[i]);
    ev.power += core_dynamic_power(c, z);
    const double deg = degradation_ratio(c, z, core_response_time(inst, i, s_b),
                                         core_response_time(inst, i, inst.memory.s_b_min));
    ev.degradation[i] = deg;
    sum += deg;
    worst = std::max(worst, deg);
  }
  if (!core_idx.empty()) {
    ev.worst_degradation = worst;
    ev.average_degradation = sum / static_cast<double>(core_idx.size());
    ev.d_equivalent = 1.0 / worst;
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Quantization

struct FrequencyPlan {
  double d_value = 0.0;
  double worst_d = 0.0;
  std::vector<double> think_times;
  double s_b = 0.0;
  std::vector<std::size_t> core_freq_idx;
  std::size_t mem_freq_idx = 0;
  double power_continuous = 0.0;
  double power_quantized = 0.0;
  std::vector<int> clamped_cores;
  bool budget_met = true;       // power_quantized (and processor budgets) within limits
  std::size_t evaluations = 0;  // conditional solves performed
};

// Index of the grid ratio closest to `ratio`; exact ties go to the higher one.
inline std::size_t nearest_grid_index(std::span<const double> grid, double ratio) {
  constexpr double kTie = 1e-12;
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double dist = std::abs(grid[k] - ratio);
    if (dist <= best_dist + kTie) {
      best = k;
      best_dist = std::min(dist, best_dist);
    }
  }
  return best;
}

namespace detail {

inline double quantized_core_power(const Instance& inst, std::size_t i, std::size_t idx) {
  const auto& c = inst.cores[i];
  return c.p_max * std::pow(inst.core_freq_grid[idx], c.alpha);
}

inline bool over_group_budget(const Instance& inst, std::span<const std::size_t> idx, const ProcessorBudget& g) {
  double p = 0.0;
  for (int i : g.cores) p += quantized_core_power(inst, static_cast<std::size_t>(i), idx[static_cast<std::size_t>(i)]);
  return p > g.watts;
}

}  // namespace detail

inline void quantize(const Instance& inst, FrequencyPlan& plan, QuantizeMode mode) {
  const std::size_t n = inst.cores.size();
  plan.core_freq_idx.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    plan.core_freq_idx[i] = nearest_grid_index(inst.core_freq_grid, inst.cores[i].z_min / plan.think_times[i]);

  const double budget = inst.budget.watts();
  double power = evaluate_assignment(inst, plan.core_freq_idx, plan.mem_freq_idx).power;

  if (mode == QuantizeMode::NearestThenRepairDown) {
    for (;;) {
      std::vector<bool> eligible(n, false);
      bool violated = false;
      if (power > budget) {
        violated = true;
        std::fill(eligible.begin(), eligible.end(), true);
      } else {
        for (const auto& g : inst.processor_budgets) {
          if (detail::over_group_budget(inst, plan.core_freq_idx, g)) {
            violated = true;
            for (int i : g.cores) eligible[static_cast<std::size_t>(i)] = true;
          }
        }
      }
      if (!violated) break;

      // Greedy: step down the core whose resulting relative performance is
      // highest, i.e. the step that costs the least in D.
      std::optional<std::size_t> pick;
      double pick_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!eligible[i] || plan.core_freq_idx[i] == 0) continue;
        const auto& c = inst.cores[i];
        const double z = c.z_min / inst.core_freq_grid[plan.core_freq_idx[i] - 1];
        const double d_i = 1.0 / degradation_ratio(c, z, core_response_time(inst, i, plan.s_b),
                                                   core_response_time(inst, i, inst.memory.s_b_min));
        if (d_i > pick_d) {
          pick_d = d_i;
          pick = i;
        }
      }
      if (!pick) break;  // everything eligible is already at the lowest level
      const std::size_t i = *pick;
      power -= detail::quantized_core_power(inst, i, plan.core_freq_idx[i]);
      --plan.core_freq_idx[i];
      power += detail::quantized_core_power(inst, i, plan.core_freq_idx[i]);
    }
    power = evaluate_assignment(inst, plan.core_freq_idx, plan.mem_freq_idx).power;
  }

  plan.power_quantized = power;
  plan.budget_met = power <= budget;
  for (const auto& g : inst.processor_budgets)
    if (detail::over_group_budget(inst, plan.core_freq_idx, g)) plan.budget_met = false;
}

// ---------------------------------------------------------------------------
// Outer search over the memory grid

namespace detail {

inline FrequencyPlan plan_from(const ConditionalSolution& sol, std::size_t mem_idx, std::size_t evaluations) {
  FrequencyPlan p;
  p.d_value = sol.d_value;
  p.worst_d = sol.worst_d;
  p.think_times = sol.think_times;
  p.s_b = sol.s_b;
  p.mem_freq_idx = mem_idx;
  p.power_continuous = sol.power;
  p.clamped_cores = sol.clamped_cores;
  p.evaluations = evaluations;
  return p;
}

// Memoized conditional solves over grid indices. Infeasible points score -1,
// below every feasible objective.
class GridEvaluator {
 public:
  GridEvaluator(const Instance& inst, const SolverOptions& opts)
      : inst_(inst), opts_(opts), cache_(inst.memory.levels()) {}

  double objective(std::size_t k) {
    auto& slot = cache_[k];
    if (!slot) {
      ++evaluations_;
      try {
        slot = Entry{conditional_solve(inst_, inst_.memory.s_b_grid[k], opts_), true};
      } catch (const Infeasible&) {
        slot = Entry{{}, false};
      }
    }
    return slot->feasible ? slot->solution.worst_d : -1.0;
  }

  bool feasible(std::size_t k) {
    objective(k);
    return cache_[k]->feasible;
  }

  const ConditionalSolution& solution(std::size_t k) {
    objective(k);
    return cache_[k]->solution;
  }

  // True when every evaluated point agrees with a single peak at `best`.
  bool consistent_with_peak(std::size_t best) {
    const double top = objective(best);
    for (std::size_t k = 0; k < cache_.size(); ++k)
      if (cache_[k] && cache_[k]->feasible && cache_[k]->solution.worst_d > top) return false;
    return true;
  }

  std::size_t evaluations() const { return evaluations_; }

 private:
  struct Entry {
    ConditionalSolution solution;
    bool feasible = false;
  };
  const Instance& inst_;
  const SolverOptions& opts_;
  std::vector<std::optional<Entry>> cache_;
  std::size_t evaluations_ = 0;
};

inline std::size_t exhaustive_index(GridEvaluator& ev, std::size_t m) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < m; ++k)
    if (ev.objective(k) > ev.objective(best)) best = k;  // strict: ties keep smaller s_b
  return best;
}

inline Infeasible grid_infeasible(const Instance& inst) {
  return Infeasible(floor_power_at(inst, inst.memory.s_b_grid.back()), inst.budget.watts());
}

}  // namespace detail

// Scans every memory grid point and returns the best; ties go to the smaller
// transfer time (higher memory frequency).
inline FrequencyPlan exhaustive_solve(const Instance& inst, const SolverOptions& opts = {}) {
  detail::GridEvaluator ev(inst, opts);
  const std::size_t best = detail::exhaustive_index(ev, inst.memory.levels());
  if (!ev.feasible(best)) throw detail::grid_infeasible(inst);
  auto plan = detail::plan_from(ev.solution(best), best, ev.evaluations());
  quantize(inst, plan, opts.quantize_mode);
  return plan;
}

// Bracketing binary search over the memory grid. Compares D at the midpoint
// with its two neighbours and discards the half that cannot hold the peak.
inline FrequencyPlan fastcap_solve(const Instance& inst, const SolverOptions& opts = {}) {
  const std::size_t m_levels = inst.memory.levels();
  detail::GridEvaluator ev(inst, opts);

  std::size_t best = 0;
  if (m_levels <= opts.exhaustive_threshold) {
    best = detail::exhaustive_index(ev, m_levels);
  } else {
    std::size_t l = 0, r = m_levels - 1;
    bool settled = false;
    while (r - l >= 2) {
      const std::size_t m = l + (r - l) / 2;
      if (!ev.feasible(m)) {
        // Feasibility only improves with slower memory.
        l = m + 1;
        continue;
      }
      const double d = ev.objective(m);
      if (d < ev.objective(m + 1)) {
        l = m + 1;
      } else if (ev.objective(m - 1) > d) {
        r = m - 1;
      } else {
        best = m;
        while (best > l && ev.objective(best - 1) == ev.objective(best)) --best;
        settled = true;
        break;
      }
    }
    if (!settled) best = (l == r || ev.objective(l) >= ev.objective(r)) ? l : r;
    if (!ev.consistent_with_peak(best)) best = detail::exhaustive_index(ev, m_levels);
  }

  if (!ev.feasible(best)) throw detail::grid_infeasible(inst);
  auto plan = detail::plan_from(ev.solution(best), best, ev.evaluations());
  quantize(inst, plan, opts.quantize_mode);
  return plan;
}

}  // namespace powercap
