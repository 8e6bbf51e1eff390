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

// Performance and power model of a many-core server with a shared memory
// subsystem: closed queuing network turnaround times, per-component DVFS
// power laws, and the counter arithmetic that feeds them.
//
// Units throughout: time in nanoseconds, power in watts, frequency as a ratio
// of the component's maximum frequency.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "powercap/errors.hpp"

namespace powercap {

// Think time substituted for a core that issued no memory accesses in a
// counter window. Keeps the optimizer finite for fully CPU-bound cores.
inline constexpr double kCpuBoundSentinelNs = 1e6;

struct CoreProfile {
  int core_id = 0;
  double z_min = 0.0;       // minimum think time, at maximum core frequency
  double cache_time = 0.0;  // shared-cache component of each access
  double p_max = 0.0;       // frequency-dependent power at maximum frequency
  double alpha = 3.0;       // power-frequency exponent

  void validate() const {
    if (!(z_min > 0.0)) throw ValidationError("core " + std::to_string(core_id) + ": z_min must be > 0");
    if (!(cache_time >= 0.0))
      throw ValidationError("core " + std::to_string(core_id) + ": cache_time must be >= 0");
    if (!(p_max > 0.0)) throw ValidationError("core " + std::to_string(core_id) + ": p_max must be > 0");
    if (!(alpha >= 1.0 && alpha <= 4.0))
      throw ValidationError("core " + std::to_string(core_id) + ": alpha must be in [1, 4]");
  }

  bool operator==(const CoreProfile&) const = default;
};

struct MemoryProfile {
  double s_m = 0.0;                // mean bank access time
  double s_b_min = 0.0;            // bus transfer time at maximum bus frequency
  std::vector<double> s_b_grid;    // ascending candidate transfer times, [0] == s_b_min
  double q_bank = 1.0;             // mean bank queue seen by an arrival, self-inclusive
  double u_bus = 1.0;              // mean bus queue seen by a departure, self-inclusive
  double p_max = 0.0;              // frequency-dependent memory power at maximum frequency
  double beta = 1.0;               // power-frequency exponent

  std::size_t levels() const { return s_b_grid.size(); }

  void validate() const {
    if (s_b_grid.empty()) throw ValidationError("memory: s_b_grid must be nonempty");
    if (!(s_b_min > 0.0)) throw ValidationError("memory: s_b_min must be > 0");
    if (s_b_grid.front() != s_b_min) throw ValidationError("memory: s_b_grid[0] must equal s_b_min");
    for (std::size_t k = 1; k < s_b_grid.size(); ++k)
      if (!(s_b_grid[k] > s_b_grid[k - 1]))
        throw ValidationError("memory: s_b_grid must be strictly ascending");
    if (!(s_m >= 0.0)) throw ValidationError("memory: s_m must be >= 0");
    if (!(q_bank >= 1.0)) throw ValidationError("memory: q_bank must be >= 1");
    if (!(u_bus >= 1.0)) throw ValidationError("memory: u_bus must be >= 1");
    if (!(p_max >= 0.0)) throw ValidationError("memory: p_max must be >= 0");
    if (!(beta >= 0.5 && beta <= 2.0)) throw ValidationError("memory: beta must be in [0.5, 2]");
  }

  bool operator==(const MemoryProfile&) const = default;
};

struct SystemBudget {
  double p_peak = 0.0;           // peak full-system power
  double budget_fraction = 1.0;  // cap as a fraction of p_peak
  double p_static = 0.0;         // all frequency-independent power

  double watts() const { return budget_fraction * p_peak; }

  // Feasibility against p_static is checked by the capper, not here.
  void validate() const {
    if (!(p_peak > 0.0)) throw ValidationError("budget: p_peak must be > 0");
    if (!(budget_fraction > 0.0 && budget_fraction <= 1.0))
      throw ValidationError("budget: budget_fraction must be in (0, 1]");
    if (!(p_static >= 0.0)) throw ValidationError("budget: p_static must be >= 0");
  }

  bool operator==(const SystemBudget&) const = default;
};

// Per-controller queue statistics plus each core's probability of routing a
// request through each controller. Used when more than one memory controller
// is present; the response time seen by a core becomes a weighted average.
struct ControllerAccessModel {
  struct Controller {
    double q_bank = 1.0;
    double u_bus = 1.0;
    double s_m = 0.0;
    bool operator==(const Controller&) const = default;
  };
  std::vector<Controller> controllers;
  std::vector<std::vector<double>> access_prob;  // [core][controller]

  void validate(std::size_t n_cores) const {
    if (controllers.empty()) throw ValidationError("access model: no controllers");
    if (access_prob.size() != n_cores)
      throw ValidationError("access model: need one probability row per core");
    for (const auto& c : controllers)
      if (!(c.q_bank >= 1.0 && c.u_bus >= 1.0 && c.s_m >= 0.0))
        throw ValidationError("access model: controller statistics out of range");
    for (const auto& row : access_prob) {
      if (row.size() != controllers.size())
        throw ValidationError("access model: probability row width != controller count");
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("access model: probability outside [0, 1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("access model: row does not sum to 1");
    }
  }

  bool operator==(const ControllerAccessModel&) const = default;
};

// Optional extra cap on the summed dynamic power of a subset of cores
// (e.g. one processor package).
struct ProcessorBudget {
  std::vector<int> cores;  // indices into Instance::cores
  double watts = 0.0;
  bool operator==(const ProcessorBudget&) const = default;
};

struct Instance {
  std::vector<CoreProfile> cores;
  MemoryProfile memory;
  SystemBudget budget;
  std::vector<double> core_freq_grid;  // ascending ratios, last == 1.0
  std::optional<ControllerAccessModel> access_model;
  std::vector<ProcessorBudget> processor_budgets;
  double sentinel_z = kCpuBoundSentinelNs;

  std::size_t size() const { return cores.size(); }

  void validate() const {
    if (cores.empty()) throw ValidationError("instance: need at least one core");
    for (const auto& c : cores) c.validate();
    memory.validate();
    budget.validate();
    if (core_freq_grid.empty()) throw ValidationError("instance: core_freq_grid must be nonempty");
    for (std::size_t k = 0; k < core_freq_grid.size(); ++k) {
      if (!(core_freq_grid[k] > 0.0 && core_freq_grid[k] <= 1.0))
        throw ValidationError("instance: core frequency ratios must be in (0, 1]");
      if (k > 0 && !(core_freq_grid[k] > core_freq_grid[k - 1]))
        throw ValidationError("instance: core_freq_grid must be strictly ascending");
    }
    if (core_freq_grid.back() != 1.0) throw ValidationError("instance: core_freq_grid must end at 1.0");
    if (access_model) access_model->validate(cores.size());
    for (const auto& pb : processor_budgets) {
      if (!(pb.watts > 0.0)) throw ValidationError("instance: processor budget must be > 0");
      for (int i : pb.cores)
        if (i < 0 || static_cast<std::size_t>(i) >= cores.size())
          throw ValidationError("instance: processor budget references unknown core");
    }
    if (!(sentinel_z > 0.0)) throw ValidationError("instance: sentinel_z must be > 0");
  }

  bool operator==(const Instance&) const = default;
};

// ---------------------------------------------------------------------------
// Queuing model

// Mean memory response time under transfer blocking: Q (s_m + U s_b).
inline double response_time(double q_bank, double u_bus, double s_m, double s_b) {
  if (!(q_bank >= 1.0) || !(u_bus >= 1.0)) throw DomainError("response_time: Q and U must be >= 1");
  if (!(s_m >= 0.0)) throw DomainError("response_time: s_m must be >= 0");
  if (!(s_b > 0.0)) throw DomainError("response_time: s_b must be > 0");
  return q_bank * (s_m + u_bus * s_b);
}

inline double response_time(const MemoryProfile& mem, double s_b) {
  return response_time(mem.q_bank, mem.u_bus, mem.s_m, s_b);
}

// Time between two consecutive memory accesses of one core.
inline double turnaround(double z, double c, double r) { return z + c + r; }

// Turnaround at the given operating point relative to the all-maximum
// frequency turnaround. The reciprocal is the core's relative performance.
inline double degradation_ratio(const CoreProfile& core, double z, double r_now, double r_base) {
  if (z < core.z_min) throw DomainError("degradation_ratio: z below z_min");
  return turnaround(z, core.cache_time, r_now) / turnaround(core.z_min, core.cache_time, r_base);
}

inline double degradation_ratio(const CoreProfile& core, double z, const MemoryProfile& mem, double s_b) {
  if (s_b < mem.s_b_min) throw DomainError("degradation_ratio: s_b below s_b_min");
  return degradation_ratio(core, z, response_time(mem, s_b), response_time(mem, mem.s_b_min));
}

// ---------------------------------------------------------------------------
// Power model

inline double core_dynamic_power(const CoreProfile& core, double z) {
  if (z < core.z_min) throw DomainError("core_dynamic_power: z below z_min");
  return core.p_max * std::pow(core.z_min / z, core.alpha);
}

inline double memory_dynamic_power(const MemoryProfile& mem, double s_b) {
  if (s_b < mem.s_b_min) throw DomainError("memory_dynamic_power: s_b below s_b_min");
  return mem.p_max * std::pow(mem.s_b_min / s_b, mem.beta);
}

inline double total_power(const Instance& inst, std::span<const double> z, double s_b) {
  if (z.size() != inst.cores.size()) throw DomainError("total_power: think-time vector length mismatch");
  double p = memory_dynamic_power(inst.memory, s_b) + inst.budget.p_static;
  for (std::size_t i = 0; i < z.size(); ++i) p += core_dynamic_power(inst.cores[i], z[i]);
  return p;
}

// ---------------------------------------------------------------------------
// Power-law fitting

struct PowerSample {
  double freq_ratio = 1.0;
  double power = 0.0;
};

struct PowerFit {
  double p_max = 0.0;
  double exponent = 0.0;
  bool clipped = false;  // exponent was pulled back into the admissible band

  double operator()(double freq_ratio) const { return p_max * std::pow(freq_ratio, exponent); }
};

inline constexpr double kMinFitExponent = 0.5;
inline constexpr double kMaxFitExponent = 4.0;

// Fits power = p_max * ratio^exponent. Two samples are solved exactly; more
// are fitted by least squares in log-log space.
inline PowerFit fit_power_exponent(std::span<const PowerSample> samples,
                                   double min_exponent = kMinFitExponent,
                                   double max_exponent = kMaxFitExponent) {
  std::set<double> distinct;
  for (const auto& s : samples) {
    if (!(s.power > 0.0)) throw FitError("fit_power_exponent: powers must be > 0");
    if (!(s.freq_ratio > 0.0 && s.freq_ratio <= 1.0))
      throw FitError("fit_power_exponent: frequency ratios must be in (0, 1]");
    distinct.insert(s.freq_ratio);
  }
  if (distinct.size() < 2) throw FitError("fit_power_exponent: need at least two distinct ratios");

  PowerFit fit;
  if (samples.size() == 2) {
    const auto& a = samples[0];
    const auto& b = samples[1];
    fit.exponent = std::log(a.power / b.power) / std::log(a.freq_ratio / b.freq_ratio);
    fit.p_max = a.power / std::pow(a.freq_ratio, fit.exponent);
  } else {
    const double n = static_cast<double>(samples.size());
    double mx = 0.0, my = 0.0;
    for (const auto& s : samples) {
      mx += std::log(s.freq_ratio);
      my += std::log(s.power);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (const auto& s : samples) {
      const double dx = std::log(s.freq_ratio) - mx;
      sxy += dx * (std::log(s.power) - my);
      sxx += dx * dx;
    }
    fit.exponent = sxy / sxx;
    fit.p_max = std::exp(my - fit.exponent * mx);
  }

  if (fit.exponent < min_exponent || fit.exponent > max_exponent) {
    fit.exponent = std::clamp(fit.exponent, min_exponent, max_exponent);
    fit.clipped = true;
    // Best intercept for the pinned exponent.
    double acc = 0.0;
    for (const auto& s : samples) acc += std::log(s.power) - fit.exponent * std::log(s.freq_ratio);
    fit.p_max = std::exp(acc / static_cast<double>(samples.size()));
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Counter arithmetic

// Minimum think time from a profiling window: the mean think time observed at
// the profiling frequency, scaled down to what the core would see at maximum
// frequency (think time shrinks in proportion to the frequency ratio).
inline double min_think_time(double tpi, double tic, double tlm, double prof_freq_ratio) {
  if (tlm < 1.0) throw CounterError("min_think_time: no memory accesses in window");
  if (!(tpi > 0.0)) throw DomainError("min_think_time: tpi must be > 0");
  if (tic < tlm) throw DomainError("min_think_time: fewer instructions than memory accesses");
  if (!(prof_freq_ratio > 0.0 && prof_freq_ratio <= 1.0))
    throw DomainError("min_think_time: frequency ratio must be in (0, 1]");
  return tpi * (tic / tlm) * prof_freq_ratio;
}

// Transfer time of a fixed-size burst, in ns.
inline double s_b_from_frequency(double transfer_cycles, double bus_freq_hz) {
  if (!(transfer_cycles > 0.0) || !(bus_freq_hz > 0.0))
    throw DomainError("s_b_from_frequency: inputs must be > 0");
  return transfer_cycles / bus_freq_hz * 1e9;
}

// ---------------------------------------------------------------------------
// Default platform grids

// Ten equally spaced core frequencies over 2.2-4.0 GHz, as ratios of 4.0 GHz.
inline std::vector<double> default_core_freq_grid() {
  std::vector<double> grid;
  for (int k = 0; k < 10; ++k) grid.push_back((11.0 + k) / 20.0);
  return grid;
}

// Bus frequencies from 800 MHz down in 66 MHz steps, ten levels.
inline std::vector<double> default_bus_freqs_mhz() {
  std::vector<double> f;
  for (int k = 0; k < 10; ++k) f.push_back(800.0 - 66.0 * k);
  return f;
}

// Ascending transfer-time grid for the given bus frequencies (descending MHz).
inline std::vector<double> s_b_grid_from_bus_freqs(double transfer_cycles, std::span<const double> freqs_mhz) {
  std::vector<double> grid;
  grid.reserve(freqs_mhz.size());
  for (double f : freqs_mhz) grid.push_back(s_b_from_frequency(transfer_cycles, f * 1e6));
  std::sort(grid.begin(), grid.end());
  return grid;
}

}  // namespace powercap
