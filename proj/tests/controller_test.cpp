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

#include "powercap/controller.hpp"
#include "powercap/workload.hpp"

namespace powercap {
namespace {

Instance mix(int n, std::uint64_t seed) {
  WorkloadClassSpec spec;
  return default_instance(synth_workload(spec, n, seed), 0.6);
}

SimConfig sim_for(int n, std::uint64_t seed) {
  SimConfig s;
  s.n_cores = n;
  s.rng_seed = seed;
  return s;
}

ControllerConfig short_epochs(QuantizeMode mode) {
  ControllerConfig c;
  c.epoch_len = 1e6;
  c.profiling_len = 1e5;
  c.quantize_mode = mode;
  return c;
}

TEST(PowerLawTracker, RefitsFromRecentRatios) {
  detail::PowerLawTracker t(2.5, 1.0, 4.0);
  const auto truth = [](double r) { return 6.0 * std::pow(r, 2.2); };
  t.add({1.0, truth(1.0)}, 0.1);
  EXPECT_NEAR(t(1.0), 6.0, 1e-12);  // anchored with the prior exponent
  t.add({0.8, truth(0.8)}, 0.1);
  t.refit();
  EXPECT_NEAR(t.exponent(), 2.2, 1e-9);
  EXPECT_NEAR(t.p_max(), 6.0, 1e-9);
  t.add({0.6, truth(0.6)}, 0.1);
  t.refit();
  EXPECT_NEAR(t.exponent(), 2.2, 1e-9);
}

TEST(PowerLawTracker, PhaseChangeDropsHistory) {
  detail::PowerLawTracker t(2.5, 1.0, 4.0);
  for (double r : {1.0, 0.8, 0.6}) t.add({r, 6.0 * std::pow(r, 2.2)}, 0.1);
  t.refit();
  // New program: twice the power, steeper curve.
  const auto next = [](double r) { return 12.0 * std::pow(r, 3.0); };
  t.add({0.6, next(0.6)}, 0.1);
  t.refit();  // one sample left: only the anchor moves
  EXPECT_NEAR(t(0.6), next(0.6), 1e-9);
  t.add({0.8, next(0.8)}, 0.1);
  t.refit();
  EXPECT_NEAR(t.exponent(), 3.0, 1e-9);
  EXPECT_NEAR(t.p_max(), 12.0, 1e-9);
}

TEST(RunCapped, UncappedRunsAtMaximum) {
  const auto inst = mix(8, 1);
  const auto tr = run_capped(inst, sim_for(8, 2), short_epochs(QuantizeMode::Nearest), 1.0, 5);
  ASSERT_EQ(tr.epochs.size(), 5u);
  for (const auto& e : tr.epochs) {
    EXPECT_EQ(e.plan.d_value, 1.0);
    for (auto k : e.plan.core_freq_idx) EXPECT_EQ(k, inst.core_freq_grid.size() - 1);
    EXPECT_EQ(e.plan.mem_freq_idx, 0u);
    for (double d : e.degradation) EXPECT_EQ(d, 1.0);
  }
  EXPECT_EQ(tr.summary.worst_degradation, 1.0);
  EXPECT_TRUE(tr.summary.violation_epochs.empty());
  EXPECT_NEAR(tr.baseline_power, tr.epochs[0].measured_power, 1e-9);
}

TEST(RunCapped, RepairKeepsPredictedPowerUnderBudget) {
  const auto inst = mix(8, 4);
  const auto tr = run_capped(inst, sim_for(8, 5), short_epochs(QuantizeMode::NearestThenRepairDown), 0.6, 12);
  for (std::size_t e = 1; e < tr.epochs.size(); ++e) {
    ASSERT_TRUE(tr.epochs[e].plan.budget_met);
    EXPECT_LE(tr.epochs[e].predicted_power, tr.budget_watts) << "epoch " << e;
  }
  EXPECT_GT(tr.summary.worst_degradation, 1.0);
  EXPECT_GE(tr.summary.worst_degradation, tr.summary.average_degradation);
}

TEST(RunCapped, DeterministicGivenSeeds) {
  const auto inst = mix(4, 6);
  const auto a = run_capped(inst, sim_for(4, 7), short_epochs(QuantizeMode::Nearest), 0.6, 6);
  const auto b = run_capped(inst, sim_for(4, 7), short_epochs(QuantizeMode::Nearest), 0.6, 6);
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    EXPECT_EQ(a.epochs[e].plan.core_freq_idx, b.epochs[e].plan.core_freq_idx);
    EXPECT_EQ(a.epochs[e].plan.d_value, b.epochs[e].plan.d_value);
    EXPECT_EQ(a.epochs[e].degradation, b.epochs[e].degradation);
  }
}

TEST(RunCapped, InfeasibleCarriesEpoch) {
  const auto inst = mix(4, 1);
  try {
    run_capped(inst, sim_for(4, 1), short_epochs(QuantizeMode::Nearest), 0.1, 3);
    FAIL() << "expected Infeasible";
  } catch (const Infeasible& e) {
    ASSERT_TRUE(e.epoch().has_value());
    EXPECT_EQ(*e.epoch(), 0);
    EXPECT_NE(std::string(e.what()).find("(epoch 0)"), std::string::npos);
  }
}

TEST(RunCapped, PhaseChangeIsTracked) {
  auto inst = mix(8, 9);
  auto swapped = inst.cores;
  std::reverse(swapped.begin(), swapped.end());
  const auto tr = run_capped(inst, sim_for(8, 3), short_epochs(QuantizeMode::NearestThenRepairDown), 0.6, 14,
                             {{7, swapped}});
  for (std::size_t e = 9; e < tr.epochs.size(); ++e)
    EXPECT_LE(tr.epochs[e].measured_power, tr.budget_watts * (1 + 1e-9)) << "epoch " << e;
}

TEST(RunCapped, TransitionOverheadCostsWork) {
  const auto inst = mix(4, 2);
  auto cheap = short_epochs(QuantizeMode::Nearest);
  auto costly = cheap;
  costly.transition_overhead = 5e4;
  const auto a = run_capped(inst, sim_for(4, 1), cheap, 0.6, 4);
  const auto b = run_capped(inst, sim_for(4, 1), costly, 0.6, 4);
  // The first epoch always switches away from all-max.
  EXPECT_GT(b.epochs[0].worst_degradation, a.epochs[0].worst_degradation);
}

TEST(RunCapped, MultiControllerUsesAccessModel) {
  const auto inst = mix(4, 3);
  auto sim = sim_for(4, 3);
  sim.controller_count = 2;
  sim.bank_weights.assign(16, 0.0);
  for (int b = 0; b < 16; ++b) sim.bank_weights[static_cast<std::size_t>(b)] = b % 2 == 0 ? 0.9 / 8 : 0.1 / 8;
  const auto tr = run_capped(inst, sim, short_epochs(QuantizeMode::NearestThenRepairDown), 0.6, 3);
  const auto& ctr = tr.epochs.back().counters;
  ASSERT_EQ(ctr.controllers.size(), 2u);
  EXPECT_GT(ctr.controllers[0].requests, ctr.controllers[1].requests);
}

TEST(ControllerConfig, Validation) {
  ControllerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.profiling_len = c.epoch_len;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.transition_overhead = -1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.refit_period = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

}  // namespace
}  // namespace powercap
