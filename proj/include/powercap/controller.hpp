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

// Epoch-based closed-loop power capping on top of the simulator.
//
// Every epoch starts with a profiling window at the current frequencies. The
// counters from that window give the minimum think times and memory queue
// statistics, power samples refresh the per-component power laws, and the
// optimizer picks the frequencies used for the rest of the epoch.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "powercap/capper.hpp"
#include "powercap/errors.hpp"
#include "powercap/model.hpp"
#include "powercap/random.hpp"
#include "powercap/simulator.hpp"

namespace powercap {

struct ControllerConfig {
  double epoch_len = 5e6;
  double profiling_len = 3e5;
  double transition_overhead = 0.0;
  QuantizeMode quantize_mode = QuantizeMode::Nearest;
  int refit_period = 1;  // epochs between power-law refits
  double initial_alpha = 2.5;
  double initial_beta = 1.0;
  // Relative half-width of uniform multiplicative noise on power samples.
  double power_noise = 0.0;
  // A power sample this far (relative) from the current fit marks a phase
  // change and discards older samples.
  double phase_reset_threshold = 0.1;
  bool simulate_baseline = true;

  void validate() const {
    if (!(epoch_len > 0.0)) throw ValidationError("controller: epoch_len must be > 0");
    if (!(profiling_len > 0.0 && profiling_len < epoch_len))
      throw ValidationError("controller: profiling_len must be in (0, epoch_len)");
    if (!(transition_overhead >= 0.0)) throw ValidationError("controller: transition_overhead must be >= 0");
    if (refit_period < 1) throw ValidationError("controller: refit_period must be >= 1");
    if (!(initial_alpha >= 1.0 && initial_alpha <= 4.0))
      throw ValidationError("controller: initial_alpha must be in [1, 4]");
    if (!(initial_beta >= 0.5 && initial_beta <= 2.0))
      throw ValidationError("controller: initial_beta must be in [0.5, 2]");
    if (!(power_noise >= 0.0 && power_noise < 1.0)) throw ValidationError("controller: power_noise must be in [0, 1)");
    if (!(phase_reset_threshold > 0.0)) throw ValidationError("controller: phase_reset_threshold must be > 0");
  }
};

// Replaces the true core profiles from the given epoch on.
struct PhaseChange {
  int epoch = 0;
  std::vector<CoreProfile> cores;
};

struct EpochRecord {
  int epoch = 0;
  FrequencyPlan plan;
  double predicted_power = 0.0;  // controller's model at the applied plan
  double measured_power = 0.0;   // true power, time-averaged over the epoch
  std::vector<double> degradation;
  double worst_degradation = 1.0;
  double average_degradation = 1.0;
  EpochCounters counters;  // profiling window
  double solve_time_us = 0.0;
};

struct RunSummary {
  double mean_measured_power = 0.0;
  double mean_predicted_power = 0.0;
  double worst_degradation = 1.0;  // over cores, whole run
  double average_degradation = 1.0;
  std::vector<int> violation_epochs;  // measured power above budget
};

struct EpochTrace {
  double p_peak = 0.0;
  double budget_watts = 0.0;
  double baseline_power = 0.0;  // all cores and memory at maximum frequency
  std::vector<EpochRecord> epochs;
  RunSummary summary;
};

namespace detail {

// Power law kept current from the most recent samples at up to three
// distinct frequency ratios.
class PowerLawTracker {
 public:
  PowerLawTracker(double exponent, double min_exponent, double max_exponent)
      : exponent_(exponent), min_exponent_(min_exponent), max_exponent_(max_exponent) {}

  void add(PowerSample s, double reset_threshold) {
    if (history_.empty()) {
      anchor(s);
    } else {
      const auto same = std::find_if(history_.begin(), history_.end(),
                                     [&](const PowerSample& h) { return h.freq_ratio == s.freq_ratio; });
      const bool stale_same = same != history_.end() &&
                              std::abs(s.power - same->power) > reset_threshold * same->power;
      const double predicted = (*this)(s.freq_ratio);
      const bool stale_fit = fitted_ && std::abs(s.power - predicted) > reset_threshold * predicted;
      if (stale_same || stale_fit) {
        history_.clear();
        fitted_ = false;
        anchor(s);
      }
    }
    std::erase_if(history_, [&](const PowerSample& h) { return h.freq_ratio == s.freq_ratio; });
    history_.push_back(s);
    while (history_.size() > 3) history_.pop_front();
    if (history_.size() == 1) anchor(s);
  }

  void refit() {
    if (history_.size() < 2) return;
    const std::vector<PowerSample> v(history_.begin(), history_.end());
    const auto fit = fit_power_exponent(v, min_exponent_, max_exponent_);
    p_max_ = fit.p_max;
    exponent_ = fit.exponent;
    fitted_ = true;
  }

  double operator()(double ratio) const { return p_max_ * std::pow(ratio, exponent_); }
  double p_max() const { return p_max_; }
  double exponent() const { return exponent_; }

 private:
  void anchor(const PowerSample& s) { p_max_ = s.power / std::pow(s.freq_ratio, exponent_); }

  double p_max_ = 0.0;
  double exponent_;
  double min_exponent_;
  double max_exponent_;
  bool fitted_ = false;
  std::deque<PowerSample> history_;
};

inline double true_core_power(const CoreProfile& c, double ratio) { return c.p_max * std::pow(ratio, c.alpha); }

}  // namespace detail

// Runs the capping loop for n_epochs over a workload whose true parameters
// are given by `workload` (cores, memory power law, platform budget). The
// controller only sees counters and power samples.
inline EpochTrace run_capped(const Instance& workload, SimConfig sim_cfg, const ControllerConfig& ctrl,
                             double budget_fraction, int n_epochs, const std::vector<PhaseChange>& phases = {}) {
  ctrl.validate();
  if (n_epochs < 1) throw ValidationError("run_capped: n_epochs must be >= 1");
  Instance truth = workload;
  truth.budget.budget_fraction = budget_fraction;
  truth.validate();
  const std::size_t n = truth.cores.size();
  if (static_cast<std::size_t>(sim_cfg.n_cores) != n) throw ValidationError("run_capped: core count mismatch");
  for (const auto& ph : phases)
    if (ph.cores.size() != n) throw ValidationError("run_capped: phase change core count mismatch");
  sim_cfg.cache_time.clear();
  for (const auto& c : truth.cores) sim_cfg.cache_time.push_back(c.cache_time);

  const auto& grid = truth.core_freq_grid;
  const auto& mem_grid = truth.memory.s_b_grid;
  const double s_b_min = truth.memory.s_b_min;
  const double tpi_max = sim_cfg.tpi_max;

  std::vector<double> z_max(n);
  for (std::size_t i = 0; i < n; ++i) z_max[i] = truth.cores[i].z_min;
  Simulator sim(sim_cfg, z_max, s_b_min);
  std::optional<Simulator> baseline;
  if (ctrl.simulate_baseline) baseline.emplace(sim_cfg, z_max, s_b_min);
  Rng noise(sim_cfg.rng_seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<detail::PowerLawTracker> core_fit(n, detail::PowerLawTracker(ctrl.initial_alpha, 1.0, 4.0));
  detail::PowerLawTracker mem_fit(ctrl.initial_beta, 0.5, 2.0);

  std::vector<std::size_t> core_idx(n, grid.size() - 1);
  std::size_t mem_idx = 0;

  const auto true_power = [&](std::span<const std::size_t> ci, std::size_t mi) {
    double p = truth.budget.p_static + truth.memory.p_max * std::pow(s_b_min / mem_grid[mi], truth.memory.beta);
    for (std::size_t i = 0; i < n; ++i) p += detail::true_core_power(truth.cores[i], grid[ci[i]]);
    return p;
  };
  const auto noisy = [&](double p) {
    return ctrl.power_noise > 0.0 ? p * (1.0 + ctrl.power_noise * (2.0 * noise.uniform() - 1.0)) : p;
  };

  EpochTrace trace;
  trace.p_peak = truth.budget.p_peak;
  trace.budget_watts = truth.budget.watts();
  trace.baseline_power = true_power(std::vector<std::size_t>(n, grid.size() - 1), 0);

  std::vector<double> run_base(n, 0.0), run_capped_instr(n, 0.0);

  for (int e = 0; e < n_epochs; ++e) {
    const double t0 = e * ctrl.epoch_len;
    for (const auto& ph : phases) {
      if (ph.epoch != e) continue;
      for (std::size_t i = 0; i < n; ++i) {
        truth.cores[i] = ph.cores[i];
        truth.cores[i].core_id = static_cast<int>(i);
        sim.set_think_mean(i, truth.cores[i].z_min / grid[core_idx[i]]);
        sim.set_cache_time(i, truth.cores[i].cache_time);
        if (baseline) {
          baseline->set_think_mean(i, truth.cores[i].z_min);
          baseline->set_cache_time(i, truth.cores[i].cache_time);
        }
      }
    }

    std::vector<double> instr0(n), base0(n);
    for (std::size_t i = 0; i < n; ++i) {
      instr0[i] = sim.cumulative_instructions(i);
      if (baseline) base0[i] = baseline->cumulative_instructions(i);
    }

    // Profiling window at the frequencies left over from the previous epoch.
    sim.begin_window();
    sim.run_until(t0 + ctrl.profiling_len);
    const EpochCounters counters = sim.window_counters();
    const std::vector<std::size_t> prev_core_idx = core_idx;
    const std::size_t prev_mem_idx = mem_idx;

    for (std::size_t i = 0; i < n; ++i) {
      const double r = grid[core_idx[i]];
      core_fit[i].add({r, noisy(detail::true_core_power(truth.cores[i], r))}, ctrl.phase_reset_threshold);
    }
    {
      const double r = s_b_min / mem_grid[mem_idx];
      mem_fit.add({r, noisy(truth.memory.p_max * std::pow(r, truth.memory.beta))}, ctrl.phase_reset_threshold);
    }
    if (e % ctrl.refit_period == 0) {
      for (auto& f : core_fit) f.refit();
      mem_fit.refit();
    }

    // Controller's view of the system.
    Instance view;
    view.core_freq_grid = grid;
    view.budget = truth.budget;
    view.sentinel_z = truth.sentinel_z;
    view.cores.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = view.cores[i];
      const auto& cc = counters.cores[i];
      c.core_id = static_cast<int>(i);
      c.z_min = cc.tlm >= 1.0 && cc.think_time > 0.0 ? min_think_time(cc.tpi, cc.tic, cc.tlm, grid[core_idx[i]])
                                                     : truth.sentinel_z;
      c.cache_time = workload.cores[i].cache_time;
      c.p_max = core_fit[i].p_max();
      c.alpha = core_fit[i].exponent();
    }
    view.memory = truth.memory;
    view.memory.q_bank = std::max(1.0, counters.q_bank);
    view.memory.u_bus = std::max(1.0, counters.u_bus);
    view.memory.s_m = counters.s_m;
    view.memory.p_max = mem_fit.p_max();
    view.memory.beta = mem_fit.exponent();
    if (sim_cfg.controller_count > 1) {
      ControllerAccessModel am;
      std::vector<double> share(counters.controllers.size(), 0.0);
      double total = 0.0;
      for (std::size_t k = 0; k < counters.controllers.size(); ++k) {
        const auto& ck = counters.controllers[k];
        am.controllers.push_back({std::max(1.0, ck.q_bank), std::max(1.0, ck.u_bus), ck.s_m});
        for (std::size_t i = 0; i < n; ++i) share[k] += counters.access_counts[i][k];
        total += share[k];
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto& row = counters.access_counts[i];
        double sum = 0.0;
        for (double v : row) sum += v;
        std::vector<double> p(row.size());
        for (std::size_t k = 0; k < row.size(); ++k)
          p[k] = sum > 0.0 ? row[k] / sum : (total > 0.0 ? share[k] / total : 1.0 / static_cast<double>(row.size()));
        am.access_prob.push_back(std::move(p));
      }
      view.access_model = std::move(am);
    }

    SolverOptions opts;
    opts.quantize_mode = ctrl.quantize_mode;
    const auto t_solve = std::chrono::steady_clock::now();
    FrequencyPlan plan;
    try {
      plan = fastcap_solve(view, opts);
    } catch (const Infeasible& inf) {
      throw Infeasible(inf.floor_watts(), inf.budget_watts(), e);
    }
    const double solve_us =
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t_solve).count();

    // Apply for the remainder of the epoch.
    core_idx = plan.core_freq_idx;
    mem_idx = plan.mem_freq_idx;
    for (std::size_t i = 0; i < n; ++i) {
      sim.set_think_mean(i, truth.cores[i].z_min / grid[core_idx[i]]);
      sim.set_tpi(i, tpi_max / grid[core_idx[i]]);
      if (core_idx[i] != prev_core_idx[i]) sim.stall_core(i, ctrl.transition_overhead);
    }
    if (mem_idx != prev_mem_idx) {
      sim.set_bus_time(mem_grid[mem_idx]);
      sim.halt_memory(ctrl.transition_overhead);
    }
    sim.run_until(t0 + ctrl.epoch_len);
    if (baseline) baseline->run_until(t0 + ctrl.epoch_len);

    EpochRecord rec;
    rec.epoch = e;
    rec.plan = plan;
    rec.predicted_power = plan.power_quantized;
    const double remainder = ctrl.epoch_len - ctrl.profiling_len;
    rec.measured_power =
        (ctrl.profiling_len * true_power(prev_core_idx, prev_mem_idx) + remainder * true_power(core_idx, mem_idx)) /
        ctrl.epoch_len;
    rec.counters = counters;
    rec.solve_time_us = solve_us;
    rec.degradation.assign(n, 1.0);
    if (baseline) {
      double sum = 0.0, worst = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double done = sim.cumulative_instructions(i) - instr0[i];
        const double ref = baseline->cumulative_instructions(i) - base0[i];
        run_capped_instr[i] += done;
        run_base[i] += ref;
        rec.degradation[i] = done > 0.0 ? ref / done : std::numeric_limits<double>::infinity();
        sum += rec.degradation[i];
        worst = std::max(worst, rec.degradation[i]);
      }
      rec.worst_degradation = worst;
      rec.average_degradation = sum / static_cast<double>(n);
    }
    trace.epochs.push_back(std::move(rec));
  }

  auto& s = trace.summary;
  for (const auto& r : trace.epochs) {
    s.mean_measured_power += r.measured_power;
    s.mean_predicted_power += r.predicted_power;
    if (r.measured_power > trace.budget_watts) s.violation_epochs.push_back(r.epoch);
  }
  s.mean_measured_power /= n_epochs;
  s.mean_predicted_power /= n_epochs;
  if (baseline) {
    double sum = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double deg = run_capped_instr[i] > 0.0 ? run_base[i] / run_capped_instr[i]
                                                   : std::numeric_limits<double>::infinity();
      sum += deg;
      worst = std::max(worst, deg);
    }
    s.worst_degradation = worst;
    s.average_degradation = sum / static_cast<double>(n);
  }
  return trace;
}

}  // namespace powercap
