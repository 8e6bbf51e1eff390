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

#include "powercap/model.hpp"
#include "powercap/random.hpp"
#include "powercap/workload.hpp"

namespace powercap {
namespace {

CoreProfile core(double z, double c, double p, double a) {
  CoreProfile k;
  k.z_min = z;
  k.cache_time = c;
  k.p_max = p;
  k.alpha = a;
  return k;
}

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

TEST(ResponseTime, Examples) {
  EXPECT_DOUBLE_EQ(response_time(1, 1, 20, 5), 25.0);
  EXPECT_DOUBLE_EQ(response_time(2, 1.5, 20, 5), 55.0);
  EXPECT_DOUBLE_EQ(response_time(3, 2, 15, 10), 105.0);
}

TEST(ResponseTime, RejectsOutOfDomain) {
  EXPECT_THROW(response_time(0.5, 1, 20, 5), DomainError);
  EXPECT_THROW(response_time(1, 0.9, 20, 5), DomainError);
  EXPECT_THROW(response_time(1, 1, 20, 0), DomainError);
  EXPECT_THROW(response_time(1, 1, -1, 5), DomainError);
}

TEST(Turnaround, Examples) {
  EXPECT_DOUBLE_EQ(turnaround(100, 10, 25), 135.0);
  EXPECT_DOUBLE_EQ(turnaround(0, 0, 25), 25.0);
  EXPECT_DOUBLE_EQ(turnaround(50, 0, 0), 50.0);
}

TEST(DegradationRatio, Examples) {
  const auto c = core(100, 10, 16, 3);
  EXPECT_EQ(degradation_ratio(c, 100, 25, 25), 1.0);
  EXPECT_NEAR(degradation_ratio(c, 170, 35, 25), 215.0 / 135.0, 1e-15);
  EXPECT_NEAR(215.0 / 135.0, 1.5926, 1e-4);
  EXPECT_THROW(degradation_ratio(c, 90, 25, 25), DomainError);
}

TEST(DegradationRatio, MemoryOverloadAndBounds) {
  const auto c = core(100, 10, 16, 3);
  const auto m = memory(1, 1, 20, {5, 10, 15}, 20, 1);
  EXPECT_EQ(degradation_ratio(c, 100, m, 5), 1.0);
  EXPECT_NEAR(degradation_ratio(c, 100, m, 15), (110.0 + 35.0) / 135.0, 1e-15);
  EXPECT_THROW(degradation_ratio(c, 100, m, 4), DomainError);
}

TEST(CorePower, Examples) {
  EXPECT_DOUBLE_EQ(core_dynamic_power(core(100, 0, 16, 3), 100), 16.0);
  EXPECT_DOUBLE_EQ(core_dynamic_power(core(100, 0, 16, 3), 200), 2.0);
  EXPECT_NEAR(core_dynamic_power(core(100, 0, 10, 2.5), 125), 10 * std::pow(0.8, 2.5), 1e-12);
  EXPECT_NEAR(core_dynamic_power(core(100, 0, 10, 2.5), 125), 5.7243, 1e-4);
  EXPECT_THROW(core_dynamic_power(core(100, 0, 16, 3), 99), DomainError);
}

TEST(MemoryPower, Examples) {
  const auto m = memory(1, 1, 20, {5, 10, 20}, 20, 1);
  EXPECT_DOUBLE_EQ(memory_dynamic_power(m, 5), 20.0);
  EXPECT_DOUBLE_EQ(memory_dynamic_power(m, 20), 5.0);
  auto m2 = m;
  m2.beta = 1.2;
  EXPECT_NEAR(memory_dynamic_power(m2, 10), 8.7055, 1e-4);
  EXPECT_THROW(memory_dynamic_power(m, 4), DomainError);
}

TEST(TotalPower, Examples) {
  Instance inst;
  inst.cores = {core(100, 10, 16, 3), core(200, 10, 16, 3)};
  inst.cores[1].core_id = 1;
  inst.memory = memory(1, 1, 20, {5, 10}, 20, 1);
  inst.budget = {100, 0.5, 10};
  inst.core_freq_grid = default_core_freq_grid();
  const std::vector<double> at_max = {100, 200};
  EXPECT_EQ(total_power(inst, at_max, 5), 16.0 + 16.0 + 20.0 + 10.0);
  const std::vector<double> half = {200, 400};
  EXPECT_DOUBLE_EQ(total_power(inst, half, 10), 24.0);

  Instance empty = inst;
  empty.cores.clear();
  EXPECT_DOUBLE_EQ(total_power(empty, std::vector<double>{}, 5), 30.0);
  EXPECT_THROW(total_power(inst, std::vector<double>{100}, 5), DomainError);
}

TEST(ModelProperties, MonotonicityAndPeakIdentity) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const double q = rng.uniform(1, 4), u = rng.uniform(1, 3), s_m = rng.uniform(0, 40);
    const double s1 = rng.uniform(1, 20), s2 = s1 + rng.uniform(0.01, 20);
    EXPECT_LT(response_time(q, u, s_m, s1), response_time(q, u, s_m, s2));

    const auto c = core(rng.uniform(10, 1000), rng.uniform(0, 10), rng.uniform(1, 10), rng.uniform(1, 4));
    const double z1 = c.z_min * rng.uniform(1, 2), z2 = z1 * rng.uniform(1.001, 2);
    EXPECT_GT(core_dynamic_power(c, z1), core_dynamic_power(c, z2));

    Instance inst;
    const int n = 1 + static_cast<int>(rng.index(6));
    double peak = 0.0;
    for (int i = 0; i < n; ++i) {
      inst.cores.push_back(core(rng.uniform(10, 1000), rng.uniform(0, 10), rng.uniform(1, 10), rng.uniform(1, 4)));
      peak += inst.cores.back().p_max;
    }
    inst.memory = memory(q, u, s_m, {s1, s2}, rng.uniform(5, 30), rng.uniform(0.5, 2));
    inst.budget = {200, 0.5, rng.uniform(0, 20)};
    std::vector<double> z;
    for (const auto& k : inst.cores) z.push_back(k.z_min);
    EXPECT_DOUBLE_EQ(total_power(inst, z, s1), peak + inst.memory.p_max + inst.budget.p_static);
    EXPECT_GT(total_power(inst, z, s1), total_power(inst, z, s2));
    const auto i = rng.index(static_cast<std::size_t>(n));
    auto z_slow = z;
    z_slow[i] *= 1.5;
    EXPECT_GT(total_power(inst, z, s1), total_power(inst, z_slow, s1));
    for (const auto& k : inst.cores) EXPECT_EQ(degradation_ratio(k, k.z_min, inst.memory, s1), 1.0);
  }
}

TEST(FitPower, TwoPointExact) {
  const std::vector<PowerSample> a = {{1.0, 16}, {0.5, 2}};
  const auto f = fit_power_exponent(a);
  EXPECT_NEAR(f.p_max, 16, 1e-12);
  EXPECT_NEAR(f.exponent, 3, 1e-12);
  EXPECT_FALSE(f.clipped);
  const std::vector<PowerSample> b = {{1.0, 10}, {0.5, 5}};
  const auto g = fit_power_exponent(b);
  EXPECT_NEAR(g.p_max, 10, 1e-12);
  EXPECT_NEAR(g.exponent, 1, 1e-12);
}

// Independent oracle: coarse-to-fine grid search over (ln p_max, exponent)
// minimizing squared log error.
std::pair<double, double> brute_force_fit(const std::vector<PowerSample>& s) {
  const auto loss = [&](double lp, double e) {
    double acc = 0.0;
    for (const auto& x : s) {
      const double r = std::log(x.power) - lp - e * std::log(x.freq_ratio);
      acc += r * r;
    }
    return acc;
  };
  double lp_c = 2.0, e_c = 2.5, lp_w = 3.0, e_w = 3.0;
  for (int level = 0; level < 12; ++level) {
    double best = loss(lp_c, e_c), bl = lp_c, be = e_c;
    for (int i = -50; i <= 50; ++i)
      for (int j = -50; j <= 50; ++j) {
        const double lp = lp_c + lp_w * i / 50.0, e = e_c + e_w * j / 50.0;
        const double v = loss(lp, e);
        if (v < best) {
          best = v;
          bl = lp;
          be = e;
        }
      }
    lp_c = bl;
    e_c = be;
    lp_w /= 10.0;
    e_w /= 10.0;
  }
  return {std::exp(lp_c), e_c};
}

TEST(FitPower, ThreePointMatchesBruteForce) {
  const std::vector<PowerSample> s = {{1.0, 16.2}, {0.75, 6.9}, {0.5, 2.1}};
  const auto f = fit_power_exponent(s);
  const auto [p, e] = brute_force_fit(s);
  EXPECT_NEAR(f.p_max / p, 1.0, 1e-3);
  EXPECT_NEAR(f.exponent / e, 1.0, 1e-3);
  EXPECT_FALSE(f.clipped);
}

TEST(FitPower, RoundTrip) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const double p = rng.uniform(0.5, 50), e = rng.uniform(0.5, 4);
    const std::size_t k = 2 + rng.index(3);
    std::vector<PowerSample> s;
    for (std::size_t j = 0; j < k; ++j) {
      const double r = 0.4 + 0.15 * static_cast<double>(j) + rng.uniform(0, 0.05);
      s.push_back({r, p * std::pow(r, e)});
    }
    const auto f = fit_power_exponent(s);
    EXPECT_NEAR(f.p_max / p, 1.0, 1e-9);
    EXPECT_NEAR(f.exponent / e, 1.0, 1e-9);
  }
}

TEST(FitPower, ClipsAndFlags) {
  const std::vector<PowerSample> steep = {{1.0, 100}, {0.5, 1}};
  const auto f = fit_power_exponent(steep);
  EXPECT_TRUE(f.clipped);
  EXPECT_EQ(f.exponent, 4.0);
  const std::vector<PowerSample> flat = {{1.0, 10}, {0.5, 9.9}, {0.7, 9.95}};
  const auto g = fit_power_exponent(flat);
  EXPECT_TRUE(g.clipped);
  EXPECT_EQ(g.exponent, 0.5);
}

TEST(FitPower, Errors) {
  const std::vector<PowerSample> one = {{1.0, 10}};
  EXPECT_THROW(fit_power_exponent(one), FitError);
  const std::vector<PowerSample> same = {{0.5, 10}, {0.5, 11}};
  EXPECT_THROW(fit_power_exponent(same), FitError);
  const std::vector<PowerSample> zero = {{1.0, 10}, {0.5, 0}};
  EXPECT_THROW(fit_power_exponent(zero), FitError);
}

TEST(MinThinkTime, Examples) {
  EXPECT_DOUBLE_EQ(min_think_time(0.5, 1e6, 1e4, 1.0), 50.0);
  EXPECT_DOUBLE_EQ(min_think_time(0.5, 1e6, 1e4, 0.5), 25.0);
  EXPECT_THROW(min_think_time(0.5, 1e6, 0, 1.0), CounterError);
}

TEST(BusTiming, Examples) {
  EXPECT_DOUBLE_EQ(s_b_from_frequency(8, 800e6), 10.0);
  EXPECT_DOUBLE_EQ(s_b_from_frequency(8, 200e6), 40.0);
  EXPECT_THROW(s_b_from_frequency(0, 800e6), DomainError);
  EXPECT_THROW(s_b_from_frequency(8, -1), DomainError);

  const auto freqs = default_bus_freqs_mhz();
  ASSERT_EQ(freqs.size(), 10u);
  EXPECT_EQ(freqs.front(), 800.0);
  EXPECT_EQ(freqs.back(), 206.0);
  const auto grid = s_b_grid_from_bus_freqs(8, freqs);
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_DOUBLE_EQ(grid.front(), 10.0);
  for (std::size_t k = 1; k < grid.size(); ++k) EXPECT_GT(grid[k], grid[k - 1]);
}

TEST(CoreGrid, Defaults) {
  const auto g = default_core_freq_grid();
  ASSERT_EQ(g.size(), 10u);
  EXPECT_NEAR(g.front() * 4.0, 2.2, 1e-12);
  EXPECT_EQ(g.back(), 1.0);
}

TEST(Validation, Types) {
  auto c = core(100, 10, 16, 3);
  EXPECT_NO_THROW(c.validate());
  c.alpha = 4.5;
  EXPECT_THROW(c.validate(), ValidationError);
  auto m = memory(1, 1, 20, {5, 10}, 20, 1);
  EXPECT_NO_THROW(m.validate());
  m.s_b_grid = {10, 5};
  EXPECT_THROW(m.validate(), ValidationError);
  SystemBudget b{100, 1.2, 10};
  EXPECT_THROW(b.validate(), ValidationError);
  b.budget_fraction = 0.0;
  EXPECT_THROW(b.validate(), ValidationError);
}

}  // namespace
}  // namespace powercap
