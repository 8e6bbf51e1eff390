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

// Discrete-event simulation of the closed queuing network formed by N cores,
// B memory banks and a shared bus per memory controller.
//
// Each core cycles: think -> cache access -> bank queue -> bank service ->
// bus transfer -> think. A bank that finished a request stays blocked until
// that request has been transferred over the bus (transfer blocking). The bus
// is granted first-come-first-served in service-completion order.

#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "powercap/errors.hpp"
#include "powercap/model.hpp"
#include "powercap/random.hpp"

namespace powercap {

enum class ThinkDistribution { Deterministic, Exponential };
enum class ServiceDistribution { Deterministic, Exponential };

struct SimConfig {
  int n_cores = 1;
  int bank_count = 16;
  int controller_count = 1;
  std::vector<int> bank_controller;  // bank -> controller; empty means b % controller_count
  ThinkDistribution think_distribution = ThinkDistribution::Exponential;
  std::vector<double> bank_weights;  // empty means uniform bank selection
  ServiceDistribution bank_service = ServiceDistribution::Deterministic;
  double s_m = 30.0;              // mean bank service time
  std::vector<double> cache_time;  // per core; empty means zero
  double tpi_max = 0.5;            // ns per instruction at maximum frequency
  std::uint64_t rng_seed = 1;
  double warmup = 0.0;
  bool record_trace = false;
  bool check_invariants = true;

  int controller_of(int bank) const {
    return bank_controller.empty() ? bank % controller_count : bank_controller[static_cast<std::size_t>(bank)];
  }

  void validate() const {
    if (n_cores < 1) throw ValidationError("sim: n_cores must be >= 1");
    if (bank_count < 1) throw ValidationError("sim: bank_count must be >= 1");
    if (controller_count < 1) throw ValidationError("sim: controller_count must be >= 1");
    if (!bank_controller.empty()) {
      if (bank_controller.size() != static_cast<std::size_t>(bank_count))
        throw ValidationError("sim: bank_controller needs one entry per bank");
      for (int c : bank_controller)
        if (c < 0 || c >= controller_count) throw ValidationError("sim: bank mapped to unknown controller");
    }
    for (int c = 0; c < controller_count; ++c) {
      bool has_bank = false;
      for (int b = 0; b < bank_count; ++b) has_bank |= controller_of(b) == c;
      if (!has_bank) throw ValidationError("sim: controller " + std::to_string(c) + " has no banks");
    }
    if (!bank_weights.empty()) {
      if (bank_weights.size() != static_cast<std::size_t>(bank_count))
        throw ValidationError("sim: bank_weights needs one entry per bank");
      double sum = 0.0;
      for (double w : bank_weights) {
        if (!(w >= 0.0)) throw ValidationError("sim: bank weights must be >= 0");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("sim: bank weights must sum to 1");
    }
    if (!(s_m >= 0.0)) throw ValidationError("sim: s_m must be >= 0");
    if (!cache_time.empty() && cache_time.size() != static_cast<std::size_t>(n_cores))
      throw ValidationError("sim: cache_time needs one entry per core");
    for (double c : cache_time)
      if (!(c >= 0.0)) throw ValidationError("sim: cache times must be >= 0");
    if (!(tpi_max > 0.0)) throw ValidationError("sim: tpi_max must be > 0");
    if (!(warmup >= 0.0)) throw ValidationError("sim: warmup must be >= 0");
  }
};

struct CoreCounters {
  double tpi = 0.0;              // time per instruction in the window
  double tic = 0.0;              // instructions executed
  double tlm = 0.0;              // memory accesses issued
  double mean_turnaround = 0.0;  // mean time between consecutive data returns
  double think_time = 0.0;       // total think time completed

  bool operator==(const CoreCounters&) const = default;
};

struct ControllerCounters {
  double q_bank = 1.0;
  double u_bus = 1.0;
  double s_m = 0.0;
  double r_measured = 0.0;
  double bus_busy = 0.0;  // transfer time started in the window
  std::uint64_t requests = 0;

  bool operator==(const ControllerCounters&) const = default;
};

struct EpochCounters {
  std::vector<CoreCounters> cores;
  double q_bank = 1.0;      // arrival-sampled, self-inclusive
  double u_bus = 1.0;       // departure-sampled, self-inclusive
  double s_m = 0.0;         // measured mean bank service time
  double r_measured = 0.0;  // mean bank-arrival to transfer-done time
  std::uint64_t requests = 0;
  std::vector<ControllerCounters> controllers;
  std::vector<std::vector<double>> access_counts;  // [core][controller], arrivals
  double window = 0.0;

  bool operator==(const EpochCounters&) const = default;
};

enum class TraceKind : std::uint8_t { BankArrival, ServiceStart, ServiceDone, BusGrant, TransferDone };

struct TraceEvent {
  double time = 0.0;
  TraceKind kind = TraceKind::BankArrival;
  int core = -1;
  int bank = -1;
  int controller = -1;
  // Population snapshot after the event.
  int at_cores = 0;
  int at_banks = 0;
  int at_bus = 0;

  bool operator==(const TraceEvent&) const = default;
};

class Simulator {
 public:
  Simulator(SimConfig cfg, std::vector<double> think_means, double s_b)
      : cfg_(std::move(cfg)), rng_(cfg_.rng_seed) {
    cfg_.validate();
    const auto n = static_cast<std::size_t>(cfg_.n_cores);
    if (think_means.size() != n) throw ValidationError("sim: need one think time per core");
    for (double z : think_means)
      if (!(z >= 0.0)) throw ValidationError("sim: think times must be >= 0");
    if (!(s_b > 0.0)) throw ValidationError("sim: s_b must be > 0");
    s_b_ = s_b;
    cores_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      cores_[i].think_mean = think_means[i];
      cores_[i].cache_time = cfg_.cache_time.empty() ? 0.0 : cfg_.cache_time[i];
      cores_[i].tpi = cfg_.tpi_max;
    }
    banks_.resize(static_cast<std::size_t>(cfg_.bank_count));
    buses_.resize(static_cast<std::size_t>(cfg_.controller_count));
    window_.reset(n, buses_.size());
    at_cores_ = cfg_.n_cores;
    for (std::size_t i = 0; i < n; ++i) start_cycle(static_cast<int>(i));
  }

  double now() const { return now_; }
  int n_cores() const { return cfg_.n_cores; }
  const SimConfig& config() const { return cfg_; }

  // Operating-point changes take effect from each core's next think interval.
  void set_think_mean(std::size_t core, double z) {
    if (!(z >= 0.0)) throw ValidationError("sim: think time must be >= 0");
    cores_.at(core).think_mean = z;
  }
  void set_tpi(std::size_t core, double tpi) {
    if (!(tpi > 0.0)) throw ValidationError("sim: tpi must be > 0");
    cores_.at(core).tpi = tpi;
  }
  void set_cache_time(std::size_t core, double c) { cores_.at(core).cache_time = c; }
  void set_bus_time(double s_b) {
    if (!(s_b > 0.0)) throw ValidationError("sim: s_b must be > 0");
    s_b_ = s_b;
  }
  double bus_time() const { return s_b_; }

  // Frequency-transition dead time: the core executes nothing for `ns`
  // before its next think interval.
  void stall_core(std::size_t core, double ns) { cores_.at(core).pending_stall += ns; }

  // No bank service or bus transfer may start before now + ns.
  void halt_memory(double ns) {
    if (!(ns > 0.0)) return;
    halted_until_ = std::max(halted_until_, now_ + ns);
    push(halted_until_, EventType::Resume, 0);
  }

  void run_until(double t_end) {
    while (!events_.empty() && events_.top().time <= t_end) {
      const Event ev = events_.top();
      events_.pop();
      now_ = ev.time;
      dispatch(ev);
      if (cfg_.check_invariants && at_cores_ + at_banks_ + at_bus_ != cfg_.n_cores)
        throw std::logic_error("sim: population not conserved");
    }
    now_ = std::max(now_, t_end);
  }

  void begin_window() {
    window_.reset(cores_.size(), buses_.size());
    window_start_ = now_;
  }

  EpochCounters window_counters() const {
    EpochCounters out;
    const auto& w = window_;
    out.window = now_ - window_start_;
    out.cores.resize(cores_.size());
    for (std::size_t i = 0; i < cores_.size(); ++i) {
      auto& c = out.cores[i];
      const auto& wc = w.cores[i];
      c.tic = wc.instructions;
      c.tlm = static_cast<double>(wc.accesses);
      c.think_time = wc.think_time;
      c.tpi = wc.instructions > 0.0 ? wc.think_time / wc.instructions : cores_[i].tpi;
      c.mean_turnaround = wc.turnarounds > 0 ? wc.turnaround_sum / static_cast<double>(wc.turnarounds) : 0.0;
    }
    Acc q, u, s, r;
    out.controllers.resize(buses_.size());
    for (std::size_t k = 0; k < buses_.size(); ++k) {
      const auto& wk = w.ctrl[k];
      auto& ck = out.controllers[k];
      ck.q_bank = wk.q.mean_or(1.0);
      ck.u_bus = wk.u.mean_or(1.0);
      ck.s_m = wk.service.mean_or(cfg_.s_m);
      ck.r_measured = wk.response.mean_or(0.0);
      ck.bus_busy = wk.bus_busy;
      ck.requests = wk.response.n;
      q += wk.q;
      u += wk.u;
      s += wk.service;
      r += wk.response;
    }
    out.q_bank = q.mean_or(1.0);
    out.u_bus = u.mean_or(1.0);
    out.s_m = s.mean_or(cfg_.s_m);
    out.r_measured = r.mean_or(0.0);
    out.requests = r.n;
    out.access_counts = w.access_counts;
    return out;
  }

  // Monotone per-core instruction total since construction.
  double cumulative_instructions(std::size_t core) const { return cores_.at(core).total_instructions; }

  const std::vector<TraceEvent>& trace() const { return trace_; }

 private:
  enum class EventType : std::uint8_t { Arrival, ServiceDone, TransferDone, Resume };

  struct Event {
    double time;
    std::uint64_t seq;
    EventType type;
    int who;  // core for Arrival, bank for ServiceDone, controller for TransferDone
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };

  struct Core {
    double think_mean = 0.0;
    double cache_time = 0.0;
    double tpi = 1.0;
    double pending_stall = 0.0;
    double cycle_start = 0.0;       // last data return
    double pending_think = 0.0;     // think part of the in-flight cycle
    double pending_tpi = 1.0;
    double arrival_time = 0.0;      // bank arrival of the outstanding request
    int bank = -1;
    double total_instructions = 0.0;
    bool started = false;
  };

  struct Bank {
    std::deque<int> waiting;
    int in_service = -1;
    int blocked = -1;  // served request awaiting the bus
  };

  struct Bus {
    std::deque<int> queue;  // banks with a completed request, service-completion order
    int transferring = -1;  // bank whose request is on the bus
  };

  struct Acc {
    double sum = 0.0;
    std::uint64_t n = 0;
    void add(double x) { sum += x; ++n; }
    double mean_or(double fallback) const { return n ? sum / static_cast<double>(n) : fallback; }
    Acc& operator+=(const Acc& o) { sum += o.sum; n += o.n; return *this; }
  };

  struct Window {
    struct PerCore {
      double instructions = 0.0;
      double think_time = 0.0;
      std::uint64_t accesses = 0;
      double turnaround_sum = 0.0;
      std::uint64_t turnarounds = 0;
    };
    struct PerController {
      Acc q, u, service, response;
      double bus_busy = 0.0;
    };
    std::vector<PerCore> cores;
    std::vector<PerController> ctrl;
    std::vector<std::vector<double>> access_counts;

    void reset(std::size_t n, std::size_t k) {
      cores.assign(n, {});
      ctrl.assign(k, {});
      access_counts.assign(n, std::vector<double>(k, 0.0));
    }
  };

  void push(double t, EventType type, int who) { events_.push(Event{t, seq_++, type, who}); }

  void record(TraceKind kind, int core, int bank, int controller) {
    if (!cfg_.record_trace) return;
    trace_.push_back({now_, kind, core, bank, controller, at_cores_, at_banks_, at_bus_});
  }

  double draw_think(const Core& c) {
    if (cfg_.think_distribution == ThinkDistribution::Deterministic) return c.think_mean;
    return c.think_mean > 0.0 ? rng_.exponential(c.think_mean) : 0.0;
  }

  double draw_service() {
    if (cfg_.bank_service == ServiceDistribution::Deterministic) return cfg_.s_m;
    return cfg_.s_m > 0.0 ? rng_.exponential(cfg_.s_m) : 0.0;
  }

  int pick_bank() {
    if (cfg_.bank_weights.empty()) return static_cast<int>(rng_.index(banks_.size()));
    return static_cast<int>(rng_.weighted(cfg_.bank_weights));
  }

  // Core i has its data back (or is starting): think, then access the cache,
  // then arrive at a bank.
  void start_cycle(int i) {
    auto& c = cores_[static_cast<std::size_t>(i)];
    if (c.started) {
      auto& wc = window_.cores[static_cast<std::size_t>(i)];
      wc.turnaround_sum += now_ - c.cycle_start;
      ++wc.turnarounds;
    }
    c.started = true;
    c.cycle_start = now_;
    c.pending_think = draw_think(c);
    c.pending_tpi = c.tpi;
    const double stall = c.pending_stall;
    c.pending_stall = 0.0;
    push(now_ + stall + c.pending_think + c.cache_time, EventType::Arrival, i);
  }

  void on_arrival(int i) {
    auto& c = cores_[static_cast<std::size_t>(i)];
    const double instr = c.pending_think / c.pending_tpi;
    c.total_instructions += instr;
    auto& wc = window_.cores[static_cast<std::size_t>(i)];
    wc.instructions += instr;
    wc.think_time += c.pending_think;
    ++wc.accesses;

    const int b = pick_bank();
    auto& bank = banks_[static_cast<std::size_t>(b)];
    c.bank = b;
    c.arrival_time = now_;
    bank.waiting.push_back(i);
    --at_cores_;
    ++at_banks_;
    const int k = cfg_.controller_of(b);
    const double present = static_cast<double>(bank.waiting.size()) + (bank.in_service >= 0 ? 1.0 : 0.0) +
                           (bank.blocked >= 0 ? 1.0 : 0.0);
    window_.ctrl[static_cast<std::size_t>(k)].q.add(present);
    window_.access_counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] += 1.0;
    record(TraceKind::BankArrival, i, b, k);
    try_start_service(b);
  }

  bool memory_halted() const { return now_ < halted_until_; }

  void try_start_service(int b) {
    auto& bank = banks_[static_cast<std::size_t>(b)];
    if (bank.in_service >= 0 || bank.blocked >= 0 || bank.waiting.empty() || memory_halted()) return;
    const int i = bank.waiting.front();
    bank.waiting.pop_front();
    bank.in_service = i;
    const double service = draw_service();
    window_.ctrl[static_cast<std::size_t>(cfg_.controller_of(b))].service.add(service);
    record(TraceKind::ServiceStart, i, b, cfg_.controller_of(b));
    push(now_ + service, EventType::ServiceDone, b);
  }

  void on_service_done(int b) {
    auto& bank = banks_[static_cast<std::size_t>(b)];
    const int i = bank.in_service;
    if (bank.blocked >= 0) throw std::logic_error("sim: bank served while blocked");
    bank.in_service = -1;
    bank.blocked = i;
    --at_banks_;
    ++at_bus_;
    const int k = cfg_.controller_of(b);
    auto& bus = buses_[static_cast<std::size_t>(k)];
    bus.queue.push_back(b);
    const double waiting = static_cast<double>(bus.queue.size()) + (bus.transferring >= 0 ? 1.0 : 0.0);
    window_.ctrl[static_cast<std::size_t>(k)].u.add(waiting);
    record(TraceKind::ServiceDone, i, b, k);
    try_start_transfer(k);
  }

  void try_start_transfer(int k) {
    auto& bus = buses_[static_cast<std::size_t>(k)];
    if (bus.transferring >= 0 || bus.queue.empty() || memory_halted()) return;
    const int b = bus.queue.front();
    bus.queue.pop_front();
    bus.transferring = b;
    window_.ctrl[static_cast<std::size_t>(k)].bus_busy += s_b_;
    record(TraceKind::BusGrant, banks_[static_cast<std::size_t>(b)].blocked, b, k);
    push(now_ + s_b_, EventType::TransferDone, k);
  }

  void on_transfer_done(int k) {
    auto& bus = buses_[static_cast<std::size_t>(k)];
    const int b = bus.transferring;
    bus.transferring = -1;
    auto& bank = banks_[static_cast<std::size_t>(b)];
    const int i = bank.blocked;
    bank.blocked = -1;
    --at_bus_;
    ++at_cores_;
    auto& c = cores_[static_cast<std::size_t>(i)];
    window_.ctrl[static_cast<std::size_t>(k)].response.add(now_ - c.arrival_time);
    record(TraceKind::TransferDone, i, b, k);
    try_start_service(b);
    try_start_transfer(k);
    start_cycle(i);
  }

  void on_resume() {
    if (memory_halted()) return;
    for (int b = 0; b < static_cast<int>(banks_.size()); ++b) try_start_service(b);
    for (int k = 0; k < static_cast<int>(buses_.size()); ++k) try_start_transfer(k);
  }

  void dispatch(const Event& ev) {
    switch (ev.type) {
      case EventType::Arrival: on_arrival(ev.who); break;
      case EventType::ServiceDone: on_service_done(ev.who); break;
      case EventType::TransferDone: on_transfer_done(ev.who); break;
      case EventType::Resume: on_resume(); break;
    }
  }

  SimConfig cfg_;
  Rng rng_;
  double s_b_ = 1.0;
  double now_ = 0.0;
  double window_start_ = 0.0;
  double halted_until_ = 0.0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::vector<Core> cores_;
  std::vector<Bank> banks_;
  std::vector<Bus> buses_;
  Window window_;
  int at_cores_ = 0;
  int at_banks_ = 0;
  int at_bus_ = 0;
  std::vector<TraceEvent> trace_;
};

// Simulates a fixed operating point and returns the counters collected after
// the warmup period.
inline EpochCounters run_fixed(const SimConfig& cfg, const std::vector<double>& z, double s_b, double duration) {
  if (!(duration > cfg.warmup)) throw ValidationError("run_fixed: duration must exceed warmup");
  Simulator sim(cfg, z, s_b);
  sim.run_until(cfg.warmup);
  sim.begin_window();
  sim.run_until(duration);
  return sim.window_counters();
}

// ---------------------------------------------------------------------------
// Queuing-approximation check

struct ApproximationPoint {
  SimConfig config;
  std::vector<double> z;
  double s_b = 10.0;
  double duration = 1e6;
};

struct ApproximationRow {
  int n_cores = 0;
  int bank_count = 0;
  double mean_think = 0.0;
  double utilization = 0.0;  // bus busy fraction
  double q_bank = 1.0;
  double u_bus = 1.0;
  double s_m = 0.0;
  double r_measured = 0.0;
  double r_model = 0.0;
  double relative_error = 0.0;
};

// Runs each grid point and compares the measured mean response time with
// Q (s_m + U s_b) evaluated on the measured Q, U and s_m.
inline std::vector<ApproximationRow> approximation_report(const std::vector<ApproximationPoint>& grid) {
  std::vector<ApproximationRow> rows;
  rows.reserve(grid.size());
  for (const auto& pt : grid) {
    const auto c = run_fixed(pt.config, pt.z, pt.s_b, pt.duration);
    ApproximationRow row;
    row.n_cores = pt.config.n_cores;
    row.bank_count = pt.config.bank_count;
    double zsum = 0.0;
    for (double z : pt.z) zsum += z;
    row.mean_think = zsum / static_cast<double>(pt.z.size());
    double busy = 0.0;
    for (const auto& k : c.controllers) busy += k.bus_busy;
    row.utilization = busy / (c.window * static_cast<double>(c.controllers.size()));
    row.q_bank = c.q_bank;
    row.u_bus = c.u_bus;
    row.s_m = c.s_m;
    row.r_measured = c.r_measured;
    row.r_model = response_time(c.q_bank, c.u_bus, c.s_m, pt.s_b);
    row.relative_error = c.r_measured > 0.0 ? std::abs(row.r_model - c.r_measured) / c.r_measured : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace powercap
