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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "powercap/capper.hpp"
#include "test_support.hpp"

namespace powercap {
namespace {

using testing::make_core;
using testing::oracle_d;
using testing::random_instance;

MemoryProfile memory(double q, double u, double s_m, std::vector<double> grid, double p, double beta) {
  MemoryProfile m;
  m.q_bank = q;
  m.u_bus = u;
  m.s_m = s_m;
  m.s_b_grid = std::move(grid);
  m.s_b_min = m.s_b_grid.front();
  m.p_max = p;
  m.beta = beta;
  return m;
}

// Two cores sharing one memory with Q=2, U=1.5, s_m=20 and s_b_min=5.
Instance two_core(double budget_watts) {
  Instance inst;
  inst.cores = {make_core(0, 100, 10, 16, 3), make_core(1, 200, 10, 16, 3)};
  inst.memory = memory(2, 1.5, 20, {5}, 20, 1);
  inst.budget = {100, budget_watts / 100, 10};
  inst.core_freq_grid = default_core_freq_grid();
  return inst;
}

TEST(ZFromD, Examples) {
  const auto c = make_core(0, 100, 10, 16, 3);
  const auto m = memory(1, 1, 20, {5, 10}, 20, 1);
  const auto top = z_from_d(c, 1.0, m, 5);
  EXPECT_EQ(top.z, 100.0);
  EXPECT_FALSE(top.clamped);

  const auto half = z_from_d(c, 0.5, 25, 35);
  EXPECT_DOUBLE_EQ(half.z, 225.0);
  EXPECT_FALSE(half.clamped);

  const auto clamp = z_from_d(c, 1.0, 25, 55);
  EXPECT_EQ(clamp.z, 100.0);
  EXPECT_TRUE(clamp.clamped);

  EXPECT_THROW(z_from_d(c, 0.0, 25, 25), DomainError);
  EXPECT_THROW(z_from_d(c, 1.5, 25, 25), DomainError);
}

TEST(WeightedResponseTime, Examples) {
  ControllerAccessModel one;
  one.controllers = {{2, 1.5, 20}};
  one.access_prob = {{1.0}};
  EXPECT_DOUBLE_EQ(weighted_response_time(one, 0, 5), response_time(2, 1.5, 20, 5));

  // R = {25, 35} at s_b = 5: (Q=1, U=1, s_m=20) and (Q=1, U=1, s_m=30).
  ControllerAccessModel two;
  two.controllers = {{1, 1, 20}, {1, 1, 30}};
  two.access_prob = {{0.5, 0.5}, {0.9, 0.1}};
  EXPECT_DOUBLE_EQ(weighted_response_time(two, 0, 5), 30.0);
  EXPECT_DOUBLE_EQ(weighted_response_time(two, 1, 5), 26.0);
  EXPECT_THROW(weighted_response_time(two, 2, 5), ValidationError);
  two.access_prob[0] = {1.0};
  EXPECT_THROW(weighted_response_time(two, 0, 5), ValidationError);
}

TEST(Feasibility, Examples) {
  Instance inst;
  inst.cores = {make_core(0, 100, 10, 16, 3)};
  // P_m at the slowest grid point is 2 W, so the floor is about 12 W.
  inst.memory = memory(1, 1, 20, {5, 10, 20}, 8, 1);
  inst.budget = {100, 0.3, 10};
  inst.core_freq_grid = default_core_freq_grid();
  auto f = feasibility_check(inst);
  EXPECT_EQ(f.status, FeasibilityStatus::Feasible);
  EXPECT_NEAR(f.floor_power, 12.0, 1e-6);

  inst.budget.budget_fraction = 0.09;
  f = feasibility_check(inst);
  EXPECT_EQ(f.status, FeasibilityStatus::InfeasibleFloor);

  inst.budget.budget_fraction = 0.0;
  EXPECT_THROW(inst.budget.validate(), ValidationError);
  EXPECT_EQ(feasibility_check(inst).status, FeasibilityStatus::InfeasibleBudgetZero);
}

TEST(ConditionalSolve, SlackAtTop) {
  auto inst = two_core(0);
  inst.budget.budget_fraction = (16.0 + 16.0 + 20.0 + 10.0) / 100.0;
  const auto sol = conditional_solve(inst, 5);
  EXPECT_EQ(sol.d_value, 1.0);
  EXPECT_EQ(sol.think_times[0], 100.0);
  EXPECT_EQ(sol.think_times[1], 200.0);
  EXPECT_TRUE(sol.clamped_cores.empty());
}

// With P_m + P_s = 30 W at full memory speed, a 30 W budget leaves nothing
// for the cores: only d -> 0 meets it, and the parked-core floor lies just
// above the budget.
TEST(ConditionalSolve, TwoCoreAtThirtyWattsIsInfeasible) {
  const auto inst = two_core(30);
  EXPECT_THROW(conditional_solve(inst, 5), Infeasible);
  EXPECT_EQ(feasibility_check(inst).status, FeasibilityStatus::InfeasibleFloor);
}

TEST(ConditionalSolve, TwoCoreMatchesIndependentBisection) {
  for (double watts : {31.0, 35.0, 40.0, 50.0, 61.0}) {
    const auto inst = two_core(watts);
    const auto sol = conditional_solve(inst, 5);
    EXPECT_NEAR(sol.d_value, oracle_d(inst, 5), 1e-8) << "budget " << watts;
    EXPECT_LE(sol.power, inst.budget.watts() * (1 + 1e-12));
    EXPECT_NEAR(sol.power, inst.budget.watts(), 1e-6 * inst.budget.watts());
  }
}

TEST(ConditionalSolve, BelowStaticPowerIsInfeasible) {
  const auto inst = two_core(5);
  try {
    conditional_solve(inst, 5);
    FAIL() << "expected Infeasible";
  } catch (const Infeasible& e) {
    EXPECT_GT(e.floor_watts(), 30.0);
    EXPECT_DOUBLE_EQ(e.budget_watts(), 5.0);
    EXPECT_NE(std::string(e.what()).find("infeasible: floor="), std::string::npos);
  }
}

TEST(ConditionalSolve, BindingBudgetAndEqualSlowdown) {
  Rng rng(21);
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    const auto inst = random_instance(rng, 1 + static_cast<int>(rng.index(16)));
    const double s_b = inst.memory.s_b_grid[rng.index(inst.memory.levels())];
    ConditionalSolution sol;
    try {
      sol = conditional_solve(inst, s_b);
    } catch (const Infeasible&) {
      continue;
    }
    if (sol.d_value >= 1.0) continue;
    ++checked;
    const double b = inst.budget.watts();
    EXPECT_LE(std::abs(sol.power - b) / b, 1e-6);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      if (std::find(sol.clamped_cores.begin(), sol.clamped_cores.end(), inst.cores[i].core_id) !=
          sol.clamped_cores.end())
        continue;
      const double deg = degradation_ratio(inst.cores[i], sol.think_times[i], inst.memory, s_b);
      EXPECT_LE(std::abs(deg * sol.d_value - 1.0), 1e-6);
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(ConditionalSolve, PowerNondecreasingInD) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto inst = random_instance(rng, 8);
    const double s_b = inst.memory.s_b_grid[rng.index(inst.memory.levels())];
    double prev = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double p = testing::oracle_power_at(inst, k / 100.0, s_b);
      EXPECT_GE(p, prev);
      prev = p;
    }
  }
}

TEST(ConditionalSolve, ClampConsistency) {
  // A memory-heavy core cannot absorb a slow bus even at maximum frequency.
  Instance inst;
  inst.cores = {make_core(0, 10, 1, 3, 2), make_core(1, 1000, 1, 6, 3)};
  inst.memory = memory(2, 2, 30, {10, 40}, 30, 1);
  inst.budget = {100, 0.22, 10};
  inst.core_freq_grid = default_core_freq_grid();
  const auto sol = conditional_solve(inst, 40);
  ASSERT_LT(sol.d_value, 1.0);
  const double z_raw0 = (10 + 1 + response_time(inst.memory, 10)) / sol.d_value - 1 - response_time(inst.memory, 40);
  const bool clamped0 = std::find(sol.clamped_cores.begin(), sol.clamped_cores.end(), 0) != sol.clamped_cores.end();
  EXPECT_EQ(clamped0, z_raw0 < 10);
  if (clamped0) {
    EXPECT_LT(sol.worst_d, sol.d_value);
  }
}

TEST(NearestGridIndex, Examples) {
  const auto g = default_core_freq_grid();
  EXPECT_EQ(nearest_grid_index(g, 1.0), 9u);
  EXPECT_EQ(nearest_grid_index(g, 0.56), 0u);
  EXPECT_EQ(nearest_grid_index(g, 0.575), 1u);
  EXPECT_EQ(nearest_grid_index(g, 0.1), 0u);
}

TEST(FastcapSolve, SinglePointGridEqualsConditional) {
  const auto inst = two_core(45);
  const auto plan = fastcap_solve(inst);
  const auto sol = conditional_solve(inst, 5);
  EXPECT_EQ(plan.d_value, sol.d_value);
  EXPECT_EQ(plan.mem_freq_idx, 0u);
  EXPECT_EQ(plan.think_times, sol.think_times);
  const auto ex = exhaustive_solve(inst);
  EXPECT_EQ(ex.d_value, sol.d_value);
}

TEST(FastcapSolve, MatchesExhaustiveOnRandomInstances) {
  Rng rng(99);
  for (int t = 0; t < 100; ++t) {
    const auto inst = random_instance(rng, 16);
    const auto a = fastcap_solve(inst);
    const auto b = exhaustive_solve(inst);
    EXPECT_NEAR(a.d_value, b.d_value, 1e-9);
    EXPECT_NEAR(a.worst_d, b.worst_d, 1e-9);
    EXPECT_EQ(a.mem_freq_idx, b.mem_freq_idx);
    EXPECT_LE(a.evaluations, b.evaluations);
  }
}

TEST(FastcapSolve, CpuDominantPicksSlowestMemory) {
  std::vector<CoreProfile> cores;
  for (int i = 0; i < 8; ++i) cores.push_back(make_core(i, 5000 + 100 * i, 0, 5, 2.5));
  auto inst = default_instance(cores, 0.5);
  inst.memory.s_m = 1;
  const auto plan = fastcap_solve(inst);
  EXPECT_EQ(plan.mem_freq_idx, inst.memory.levels() - 1);
  EXPECT_EQ(exhaustive_solve(inst).mem_freq_idx, plan.mem_freq_idx);
}

TEST(FastcapSolve, AllGridPointsInfeasible) {
  Rng rng(3);
  auto inst = random_instance(rng, 4);
  inst.budget.budget_fraction = 0.05;
  EXPECT_THROW(fastcap_solve(inst), Infeasible);
  EXPECT_THROW(exhaustive_solve(inst), Infeasible);
}

TEST(FastcapSolve, NonUnimodalFallsBack) {
  // A hand-built grid whose objective has two peaks; the search must still
  // agree with the full scan.
  Rng rng(1234);
  int disagreements = 0;
  for (int t = 0; t < 200; ++t) {
    auto inst = random_instance(rng, 6);
    std::vector<double> grid = {10};
    for (int k = 1; k < 12; ++k) grid.push_back(grid.back() + rng.uniform(0.5, 8));
    inst.memory.s_b_grid = grid;
    inst.memory.s_b_min = 10;
    inst.memory.beta = rng.uniform(0.5, 2);
    try {
      const auto a = fastcap_solve(inst);
      const auto b = exhaustive_solve(inst);
      if (std::abs(a.worst_d - b.worst_d) > 1e-9) ++disagreements;
    } catch (const Infeasible&) {
    }
  }
  EXPECT_EQ(disagreements, 0);
}

TEST(Quantize, NearestBoundAndRepair) {
  Rng rng(77);
  for (int t = 0; t < 200; ++t) {
    const auto inst = random_instance(rng, 1 + static_cast<int>(rng.index(16)));
    SolverOptions nearest;
    SolverOptions repair;
    repair.quantize_mode = QuantizeMode::NearestThenRepairDown;
    FrequencyPlan a, b;
    try {
      a = fastcap_solve(inst, nearest);
      b = fastcap_solve(inst, repair);
    } catch (const Infeasible&) {
      continue;
    }
    // Bound: every core one step above its continuous ratio.
    double bound = inst.budget.p_static + memory_dynamic_power(inst.memory, a.s_b);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      const double ratio = inst.cores[i].z_min / a.think_times[i];
      const auto& g = inst.core_freq_grid;
      std::size_t up = 0;
      while (up + 1 < g.size() && g[up] < ratio) ++up;
      bound += inst.cores[i].p_max * std::pow(g[up], inst.cores[i].alpha);
    }
    EXPECT_LE(a.power_quantized, std::max(bound, inst.budget.watts()) + 1e-9);

    ASSERT_EQ(a.mem_freq_idx, b.mem_freq_idx);
    for (std::size_t i = 0; i < inst.size(); ++i) EXPECT_LE(b.core_freq_idx[i], a.core_freq_idx[i]);
    if (b.budget_met) {
      EXPECT_LE(b.power_quantized, inst.budget.watts());
    } else {
      for (auto k : b.core_freq_idx) EXPECT_EQ(k, 0u);
    }
  }
}

TEST(ProcessorBudgets, GroupCapIsRespected) {
  Rng rng(5);
  auto inst = random_instance(rng, 8, 0.9, 0.9);
  inst.processor_budgets.push_back({{0, 1, 2, 3}, 6.0});
  const auto sol = conditional_solve(inst, inst.memory.s_b_min);
  double group = 0.0;
  for (int i = 0; i < 4; ++i) group += core_dynamic_power(inst.cores[i], sol.think_times[i]);
  EXPECT_LE(group, 6.0 + 1e-9);

  SolverOptions repair;
  repair.quantize_mode = QuantizeMode::NearestThenRepairDown;
  const auto plan = fastcap_solve(inst, repair);
  double qgroup = 0.0;
  for (int i = 0; i < 4; ++i) qgroup += inst.cores[i].p_max * std::pow(inst.core_freq_grid[plan.core_freq_idx[i]], inst.cores[i].alpha);
  if (plan.budget_met) {
    EXPECT_LE(qgroup, 6.0);
  }
}

TEST(MultiController, WeightedResponseDrivesThinkTimes) {
  Rng rng(9);
  auto inst = random_instance(rng, 2, 0.5, 0.5);
  inst.budget.p_peak = 80;  // the default two-core peak cannot cover memory and static power
  inst.budget.budget_fraction = 0.4;
  ControllerAccessModel am;
  am.controllers = {{1.0, 1.0, 20.0}, {3.0, 2.0, 40.0}};
  am.access_prob = {{1.0, 0.0}, {0.1, 0.9}};
  inst.access_model = am;
  const double s_b = inst.memory.s_b_grid[3];
  const auto sol = conditional_solve(inst, s_b);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto t = z_from_d(inst.cores[i], sol.d_value, weighted_response_time(am, i, inst.memory.s_b_min),
                            weighted_response_time(am, i, s_b));
    EXPECT_DOUBLE_EQ(sol.think_times[i], t.z);
  }
}

}  // namespace
}  // namespace powercap
