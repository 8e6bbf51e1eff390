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

// Synthetic workload profiles and default platform parameters.
//
// Classes mirror the usual benchmark-suite taxonomy: compute-intensive (ILP),
// balanced (MID), memory-intensive (MEM) and mixed (MIX). Memory intensity,
// i.e. shorter think time between misses, orders ILP < MID < MEM. The numeric
// ranges are synthetic stand-ins, not measurements.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "powercap/errors.hpp"
#include "powercap/model.hpp"
#include "powercap/random.hpp"

namespace powercap {

enum class WorkloadClass { ILP, MID, MEM, MIX };

inline std::string to_string(WorkloadClass c) {
  switch (c) {
    case WorkloadClass::ILP: return "ILP";
    case WorkloadClass::MID: return "MID";
    case WorkloadClass::MEM: return "MEM";
    case WorkloadClass::MIX: return "MIX";
  }
  return "?";
}

inline WorkloadClass workload_class_from_string(const std::string& s) {
  if (s == "ILP") return WorkloadClass::ILP;
  if (s == "MID") return WorkloadClass::MID;
  if (s == "MEM") return WorkloadClass::MEM;
  if (s == "MIX") return WorkloadClass::MIX;
  throw ValidationError("unknown workload class '" + s + "' (expected ILP, MID, MEM or MIX)");
}

struct ProfileRanges {
  double z_lo, z_hi;  // minimum think time, ns
  double c_lo, c_hi;  // cache time, ns
  double p_lo, p_hi;  // core dynamic power at max frequency, W
  double a_lo, a_hi;  // power exponent

  bool operator==(const ProfileRanges&) const = default;
};

struct WorkloadClassSpec {
  WorkloadClass cls = WorkloadClass::MIX;
  // Indexed by ILP, MID, MEM.
  std::array<ProfileRanges, 3> ranges = {{
      {400.0, 1600.0, 5.0, 10.0, 4.0, 5.5, 2.4, 3.0},
      {100.0, 300.0, 5.0, 10.0, 3.0, 4.5, 2.2, 2.8},
      {15.0, 60.0, 5.0, 10.0, 2.0, 3.5, 2.0, 2.6},
  }};

  void validate() const {
    for (const auto& r : ranges) {
      if (!(r.z_lo > 0.0 && r.z_hi >= r.z_lo)) throw ValidationError("workload: bad think-time range");
      if (!(r.c_lo >= 0.0 && r.c_hi >= r.c_lo)) throw ValidationError("workload: bad cache-time range");
      if (!(r.p_lo > 0.0 && r.p_hi >= r.p_lo)) throw ValidationError("workload: bad power range");
      if (!(r.a_lo >= 1.0 && r.a_hi >= r.a_lo && r.a_hi <= 4.0))
        throw ValidationError("workload: exponent range must lie in [1, 4]");
    }
  }

  bool operator==(const WorkloadClassSpec&) const = default;
};

namespace detail {

inline CoreProfile draw_profile(const ProfileRanges& r, Rng& rng) {
  CoreProfile p;
  p.z_min = rng.uniform(r.z_lo, r.z_hi);
  p.cache_time = rng.uniform(r.c_lo, r.c_hi);
  p.p_max = rng.uniform(r.p_lo, r.p_hi);
  p.alpha = rng.uniform(r.a_lo, r.a_hi);
  return p;
}

inline std::size_t class_slot(WorkloadClass c) { return static_cast<std::size_t>(c); }

}  // namespace detail

// Core profiles for a workload of the given class. When n_cores is a multiple
// of four the workload is four archetypes with n/4 copies each (a MIX gets one
// archetype per base class plus one from a randomly chosen class); otherwise
// each core is drawn independently.
inline std::vector<CoreProfile> synth_workload(const WorkloadClassSpec& spec, int n_cores, std::uint64_t seed) {
  spec.validate();
  if (n_cores < 1) throw ValidationError("workload: n_cores must be >= 1");
  Rng rng(seed);
  const auto pick_class = [&](std::size_t archetype) {
    if (spec.cls != WorkloadClass::MIX) return detail::class_slot(spec.cls);
    return archetype < 3 ? archetype : rng.index(3);
  };

  std::vector<CoreProfile> cores;
  cores.reserve(static_cast<std::size_t>(n_cores));
  if (n_cores % 4 == 0) {
    std::array<CoreProfile, 4> archetypes;
    for (std::size_t a = 0; a < 4; ++a) archetypes[a] = detail::draw_profile(spec.ranges[pick_class(a)], rng);
    const int copies = n_cores / 4;
    for (int i = 0; i < n_cores; ++i) cores.push_back(archetypes[static_cast<std::size_t>(i / copies)]);
  } else {
    for (int i = 0; i < n_cores; ++i) {
      const std::size_t slot = spec.cls == WorkloadClass::MIX ? rng.index(3) : detail::class_slot(spec.cls);
      cores.push_back(detail::draw_profile(spec.ranges[slot], rng));
    }
  }
  for (int i = 0; i < n_cores; ++i) cores[static_cast<std::size_t>(i)].core_id = i;
  return cores;
}

// ---------------------------------------------------------------------------
// Platform defaults

// Observed full-system peak power for the evaluated core counts; other
// counts are interpolated linearly between neighbours.
inline double default_peak_power(int n_cores) {
  constexpr std::array<std::pair<int, double>, 4> table = {{{4, 60.0}, {16, 120.0}, {32, 210.0}, {64, 375.0}}};
  if (n_cores <= table.front().first) return table.front().second * n_cores / table.front().first;
  for (std::size_t k = 1; k < table.size(); ++k) {
    if (n_cores <= table[k].first) {
      const auto [n0, p0] = table[k - 1];
      const auto [n1, p1] = table[k];
      return p0 + (p1 - p0) * (n_cores - n0) / static_cast<double>(n1 - n0);
    }
  }
  return table.back().second * n_cores / table.back().first;
}

inline double default_static_power(int n_cores) { return 10.0 + 0.6 * n_cores; }
inline double default_memory_power(int n_cores) { return 20.0 + 0.6 * n_cores; }

inline constexpr double kDefaultTransferCycles = 8.0;
inline constexpr double kDefaultBankAccessNs = 30.0;

// Memory profile on the default bus-frequency grid; Q = U = 1 until counters
// say otherwise.
inline MemoryProfile default_memory(int n_cores) {
  MemoryProfile m;
  const auto freqs = default_bus_freqs_mhz();
  m.s_b_grid = s_b_grid_from_bus_freqs(kDefaultTransferCycles, freqs);
  m.s_b_min = m.s_b_grid.front();
  m.s_m = kDefaultBankAccessNs;
  m.q_bank = 1.0;
  m.u_bus = 1.0;
  m.p_max = default_memory_power(n_cores);
  m.beta = 1.0;
  return m;
}

inline Instance default_instance(std::vector<CoreProfile> cores, double budget_fraction) {
  const int n = static_cast<int>(cores.size());
  Instance inst;
  inst.cores = std::move(cores);
  inst.memory = default_memory(n);
  inst.budget = {default_peak_power(n), budget_fraction, default_static_power(n)};
  inst.core_freq_grid = default_core_freq_grid();
  return inst;
}

}  // namespace powercap
