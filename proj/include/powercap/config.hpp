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

// Run configuration documents (JSON).
//
// Every key is optional and falls back to the defaults below. Unknown keys
// are rejected so that typos do not silently become defaults. Errors carry
// either a line:column (syntax) or the dotted key path (schema).

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "powercap/capper.hpp"
#include "powercap/controller.hpp"
#include "powercap/errors.hpp"
#include "powercap/model.hpp"
#include "powercap/policies.hpp"
#include "powercap/simulator.hpp"
#include "powercap/workload.hpp"

namespace powercap {

struct WorkloadSource {
  WorkloadClassSpec spec;
  int n_cores = 16;

  bool operator==(const WorkloadSource&) const = default;
};

struct BenchConfig {
  std::vector<int> n = {16, 32, 64};
  int repetitions = 50;

  bool operator==(const BenchConfig&) const = default;
};

struct RunConfig {
  std::string scenario = "default";
  std::uint64_t seed = 1;  // drives workload synthesis and the simulator
  std::optional<Instance> instance;  // explicit instance; else synthesized from `workload`
  WorkloadSource workload;
  double budget_fraction = 0.6;
  std::vector<double> budgets;  // sweep for compare; empty means {budget_fraction}
  SolverOptions solver;
  SimConfig sim;  // n_cores, cache_time and rng_seed are derived at run time
  ControllerConfig controller;
  int n_epochs = 100;
  std::optional<int> phase_swap_epoch;  // reverse the core profile order at this epoch
  std::vector<std::string> policies = {"fastcap", "cpu_only", "eql_pwr", "eql_freq", "maxbips"};
  int instances = 1;  // randomized instances per budget for compare
  double enumeration_cap = kDefaultEnumerationCap;
  BenchConfig bench;
  std::string out_dir = "out";
  bool report_timing = false;

  // Instance used by solve/simulate: the explicit one, or a synthesized
  // workload on the default platform, with the configured budget fraction.
  Instance effective_instance(std::uint64_t workload_seed) const {
    Instance inst = instance ? *instance
                             : default_instance(synth_workload(workload.spec, workload.n_cores, workload_seed),
                                                budget_fraction);
    return inst;
  }
  Instance effective_instance() const { return effective_instance(seed); }

  void validate() const;

  bool operator==(const RunConfig& o) const {
    // SolverOptions and ControllerConfig carry no operator==; compare fieldwise.
    const auto solver_eq = solver.d_tolerance == o.solver.d_tolerance &&
                           solver.quantize_mode == o.solver.quantize_mode &&
                           solver.exhaustive_threshold == o.solver.exhaustive_threshold;
    const auto& a = controller;
    const auto& b = o.controller;
    const auto ctrl_eq = a.epoch_len == b.epoch_len && a.profiling_len == b.profiling_len &&
                         a.transition_overhead == b.transition_overhead && a.quantize_mode == b.quantize_mode &&
                         a.refit_period == b.refit_period && a.initial_alpha == b.initial_alpha &&
                         a.initial_beta == b.initial_beta && a.power_noise == b.power_noise &&
                         a.phase_reset_threshold == b.phase_reset_threshold &&
                         a.simulate_baseline == b.simulate_baseline;
    const auto& s = sim;
    const auto& t = o.sim;
    const auto sim_eq = s.bank_count == t.bank_count && s.controller_count == t.controller_count &&
                        s.bank_controller == t.bank_controller && s.think_distribution == t.think_distribution &&
                        s.bank_weights == t.bank_weights && s.bank_service == t.bank_service && s.s_m == t.s_m &&
                        s.tpi_max == t.tpi_max && s.warmup == t.warmup;
    return scenario == o.scenario && seed == o.seed && instance == o.instance && workload == o.workload &&
           budget_fraction == o.budget_fraction && budgets == o.budgets && solver_eq && sim_eq && ctrl_eq &&
           n_epochs == o.n_epochs && phase_swap_epoch == o.phase_swap_epoch && policies == o.policies &&
           instances == o.instances && enumeration_cap == o.enumeration_cap && bench == o.bench &&
           out_dir == o.out_dir && report_timing == o.report_timing;
  }
};

inline const std::vector<std::string>& known_policies() {
  static const std::vector<std::string> names = {"fastcap", "cpu_only", "eql_pwr", "eql_freq", "maxbips"};
  return names;
}

inline void RunConfig::validate() const {
  if (scenario.empty()) throw ValidationError("scenario: must be nonempty");
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0))
    throw ValidationError("budget_fraction: must be in (0, 1], got " + std::to_string(budget_fraction));
  for (double b : budgets)
    if (!(b > 0.0 && b <= 1.0)) throw ValidationError("budgets: entries must be in (0, 1]");
  if (instance) instance->validate();
  workload.spec.validate();
  if (workload.n_cores < 1) throw ValidationError("workload.n_cores: must be >= 1");
  if (!(solver.d_tolerance > 0.0 && solver.d_tolerance < 1.0))
    throw ValidationError("solver.d_tolerance: must be in (0, 1)");
  SimConfig probe = sim;
  probe.n_cores = instance ? static_cast<int>(instance->size()) : workload.n_cores;
  probe.validate();
  controller.validate();
  if (n_epochs < 1) throw ValidationError("n_epochs: must be >= 1");
  if (phase_swap_epoch && (*phase_swap_epoch < 0 || *phase_swap_epoch >= n_epochs))
    throw ValidationError("phase_swap_epoch: must be in [0, n_epochs)");
  if (policies.empty()) throw ValidationError("policies: must be nonempty");
  for (const auto& p : policies)
    if (std::find(known_policies().begin(), known_policies().end(), p) == known_policies().end())
      throw ValidationError("policies: unknown policy '" + p + "'");
  if (instances < 1) throw ValidationError("instances: must be >= 1");
  if (!(enumeration_cap > 0.0)) throw ValidationError("enumeration_cap: must be > 0");
  if (bench.n.empty()) throw ValidationError("bench.n: must be nonempty");
  for (int n : bench.n)
    if (n < 1) throw ValidationError("bench.n: entries must be >= 1");
  if (bench.repetitions < 1) throw ValidationError("bench.repetitions: must be >= 1");
  if (out_dir.empty()) throw ValidationError("out_dir: must be nonempty");
}

namespace detail {

using json = nlohmann::ordered_json;

// Object view that records which keys were consumed and reports the dotted
// path of anything malformed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where() + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(child(key) + ": " + type_hint<T>() + " expected");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ValidationError(child(k) + ": unknown key");
  }

 private:
  template <typename T>
  static std::string type_hint() {
    if constexpr (std::is_same_v<T, bool>) return "boolean";
    else if constexpr (std::is_same_v<T, std::string>) return "string";
    else if constexpr (std::is_integral_v<T>) return "integer";
    else if constexpr (std::is_floating_point_v<T>) return "number";
    else return "array";
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E>
E enum_from(const std::string& s, const std::vector<std::pair<std::string, E>>& table, const std::string& path) {
  for (const auto& [name, v] : table)
    if (name == s) return v;
  std::string expected;
  for (const auto& [name, v] : table) expected += (expected.empty() ? "" : ", ") + name;
  throw ValidationError(path + ": unknown value '" + s + "' (expected " + expected + ")");
}

template <typename E>
std::string enum_name(E v, const std::vector<std::pair<std::string, E>>& table) {
  for (const auto& [name, x] : table)
    if (x == v) return name;
  return "?";
}

inline const std::vector<std::pair<std::string, QuantizeMode>>& quantize_names() {
  static const std::vector<std::pair<std::string, QuantizeMode>> t = {
      {"nearest", QuantizeMode::Nearest}, {"nearest_then_repair_down", QuantizeMode::NearestThenRepairDown}};
  return t;
}
inline const std::vector<std::pair<std::string, ThinkDistribution>>& think_names() {
  static const std::vector<std::pair<std::string, ThinkDistribution>> t = {
      {"deterministic", ThinkDistribution::Deterministic}, {"exponential", ThinkDistribution::Exponential}};
  return t;
}
inline const std::vector<std::pair<std::string, ServiceDistribution>>& service_names() {
  static const std::vector<std::pair<std::string, ServiceDistribution>> t = {
      {"deterministic", ServiceDistribution::Deterministic}, {"exponential", ServiceDistribution::Exponential}};
  return t;
}

template <typename E>
void get_enum(Reader& r, const char* key, E& out, const std::vector<std::pair<std::string, E>>& table) {
  std::string s = enum_name(out, table);
  r.get(key, s);
  out = enum_from(s, table, r.child(key));
}

inline CoreProfile read_core(const json& j, const std::string& path, int idx) {
  Reader r(j, path);
  CoreProfile c;
  c.core_id = idx;
  r.get("z_min", c.z_min);
  r.get("cache_time", c.cache_time);
  r.get("p_max", c.p_max);
  r.get("alpha", c.alpha);
  r.finish();
  return c;
}

inline Instance read_instance(const json& j, const std::string& path) {
  Reader r(j, path);
  Instance inst;
  inst.core_freq_grid = default_core_freq_grid();
  if (const json* cores = r.sub("cores")) {
    if (!cores->is_array()) throw ValidationError(r.child("cores") + ": array expected");
    for (std::size_t i = 0; i < cores->size(); ++i)
      inst.cores.push_back(read_core((*cores)[i], r.child("cores") + "[" + std::to_string(i) + "]",
                                     static_cast<int>(i)));
  }
  const int n = static_cast<int>(inst.cores.size());
  inst.memory = default_memory(std::max(n, 1));
  if (const json* m = r.sub("memory")) {
    Reader mr(*m, r.child("memory"));
    mr.get("s_m", inst.memory.s_m);
    mr.get("s_b_grid", inst.memory.s_b_grid);
    inst.memory.s_b_min = inst.memory.s_b_grid.empty() ? 0.0 : inst.memory.s_b_grid.front();
    mr.get("q_bank", inst.memory.q_bank);
    mr.get("u_bus", inst.memory.u_bus);
    mr.get("p_max", inst.memory.p_max);
    mr.get("beta", inst.memory.beta);
    mr.finish();
  }
  inst.budget = {default_peak_power(std::max(n, 1)), 0.6, default_static_power(std::max(n, 1))};
  if (const json* b = r.sub("budget")) {
    Reader br(*b, r.child("budget"));
    br.get("p_peak", inst.budget.p_peak);
    br.get("budget_fraction", inst.budget.budget_fraction);
    br.get("p_static", inst.budget.p_static);
    br.finish();
  }
  r.get("core_freq_grid", inst.core_freq_grid);
  if (const json* am = r.sub("access_model")) {
    Reader ar(*am, r.child("access_model"));
    ControllerAccessModel model;
    if (const json* cs = ar.sub("controllers")) {
      if (!cs->is_array()) throw ValidationError(ar.child("controllers") + ": array expected");
      for (std::size_t k = 0; k < cs->size(); ++k) {
        Reader cr((*cs)[k], ar.child("controllers") + "[" + std::to_string(k) + "]");
        ControllerAccessModel::Controller c;
        cr.get("q_bank", c.q_bank);
        cr.get("u_bus", c.u_bus);
        cr.get("s_m", c.s_m);
        cr.finish();
        model.controllers.push_back(c);
      }
    }
    ar.get("access_prob", model.access_prob);
    ar.finish();
    inst.access_model = std::move(model);
  }
  if (const json* pbs = r.sub("processor_budgets")) {
    if (!pbs->is_array()) throw ValidationError(r.child("processor_budgets") + ": array expected");
    for (std::size_t k = 0; k < pbs->size(); ++k) {
      Reader pr((*pbs)[k], r.child("processor_budgets") + "[" + std::to_string(k) + "]");
      ProcessorBudget pb;
      pr.get("cores", pb.cores);
      pr.get("watts", pb.watts);
      pr.finish();
      inst.processor_budgets.push_back(std::move(pb));
    }
  }
  r.get("sentinel_z", inst.sentinel_z);
  r.finish();
  return inst;
}

inline json write_instance(const Instance& inst) {
  json j;
  j["cores"] = json::array();
  for (const auto& c : inst.cores)
    j["cores"].push_back({{"z_min", c.z_min}, {"cache_time", c.cache_time}, {"p_max", c.p_max}, {"alpha", c.alpha}});
  j["memory"] = {{"s_m", inst.memory.s_m},       {"s_b_grid", inst.memory.s_b_grid},
                 {"q_bank", inst.memory.q_bank}, {"u_bus", inst.memory.u_bus},
                 {"p_max", inst.memory.p_max},   {"beta", inst.memory.beta}};
  j["budget"] = {{"p_peak", inst.budget.p_peak},
                 {"budget_fraction", inst.budget.budget_fraction},
                 {"p_static", inst.budget.p_static}};
  j["core_freq_grid"] = inst.core_freq_grid;
  if (inst.access_model) {
    json am;
    am["controllers"] = json::array();
    for (const auto& c : inst.access_model->controllers)
      am["controllers"].push_back({{"q_bank", c.q_bank}, {"u_bus", c.u_bus}, {"s_m", c.s_m}});
    am["access_prob"] = inst.access_model->access_prob;
    j["access_model"] = am;
  }
  if (!inst.processor_budgets.empty()) {
    j["processor_budgets"] = json::array();
    for (const auto& pb : inst.processor_budgets) j["processor_budgets"].push_back({{"cores", pb.cores}, {"watts", pb.watts}});
  }
  j["sentinel_z"] = inst.sentinel_z;
  return j;
}

inline std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is one past the offending character.
    std::string msg = e.what();
    const auto pos = msg.find("- ");
    if (pos != std::string::npos) msg = msg.substr(pos + 2);
    throw ValidationError("config syntax error at " + detail::line_context(text, e.byte ? e.byte - 1 : 0) + ": " +
                          msg);
  }
  RunConfig cfg;
  detail::Reader r(j, "");
  r.get("scenario", cfg.scenario);
  r.get("seed", cfg.seed);
  if (const detail::json* inst = r.sub("instance")) cfg.instance = detail::read_instance(*inst, "instance");
  if (const detail::json* w = r.sub("workload")) {
    detail::Reader wr(*w, "workload");
    std::string cls = to_string(cfg.workload.spec.cls);
    wr.get("class", cls);
    try {
      cfg.workload.spec.cls = workload_class_from_string(cls);
    } catch (const ValidationError& e) {
      throw ValidationError("workload.class: " + std::string(e.what()));
    }
    wr.get("n_cores", cfg.workload.n_cores);
    if (const detail::json* ranges = wr.sub("ranges")) {
      detail::Reader rr(*ranges, "workload.ranges");
      const char* names[3] = {"ILP", "MID", "MEM"};
      for (std::size_t k = 0; k < 3; ++k) {
        std::vector<double> v;
        rr.get(names[k], v);
        if (v.empty()) continue;
        if (v.size() != 8)
          throw ValidationError(rr.child(names[k]) + ": expected [z_lo, z_hi, c_lo, c_hi, p_lo, p_hi, a_lo, a_hi]");
        cfg.workload.spec.ranges[k] = {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
      }
      rr.finish();
    }
    wr.finish();
  }
  r.get("budget_fraction", cfg.budget_fraction);
  r.get("budgets", cfg.budgets);
  if (const detail::json* s = r.sub("solver")) {
    detail::Reader sr(*s, "solver");
    sr.get("d_tolerance", cfg.solver.d_tolerance);
    detail::get_enum(sr, "quantize_mode", cfg.solver.quantize_mode, detail::quantize_names());
    sr.get("exhaustive_threshold", cfg.solver.exhaustive_threshold);
    sr.finish();
  }
  if (const detail::json* s = r.sub("sim")) {
    detail::Reader sr(*s, "sim");
    sr.get("bank_count", cfg.sim.bank_count);
    sr.get("controller_count", cfg.sim.controller_count);
    sr.get("bank_controller", cfg.sim.bank_controller);
    detail::get_enum(sr, "think_distribution", cfg.sim.think_distribution, detail::think_names());
    sr.get("bank_weights", cfg.sim.bank_weights);
    detail::get_enum(sr, "bank_service", cfg.sim.bank_service, detail::service_names());
    sr.get("s_m", cfg.sim.s_m);
    sr.get("tpi_max", cfg.sim.tpi_max);
    sr.get("warmup", cfg.sim.warmup);
    sr.finish();
  }
  if (const detail::json* c = r.sub("controller")) {
    detail::Reader cr(*c, "controller");
    auto& cc = cfg.controller;
    cr.get("epoch_len", cc.epoch_len);
    cr.get("profiling_len", cc.profiling_len);
    cr.get("transition_overhead", cc.transition_overhead);
    detail::get_enum(cr, "quantize_mode", cc.quantize_mode, detail::quantize_names());
    cr.get("refit_period", cc.refit_period);
    cr.get("initial_alpha", cc.initial_alpha);
    cr.get("initial_beta", cc.initial_beta);
    cr.get("power_noise", cc.power_noise);
    cr.get("phase_reset_threshold", cc.phase_reset_threshold);
    cr.get("simulate_baseline", cc.simulate_baseline);
    cr.finish();
  }
  r.get("n_epochs", cfg.n_epochs);
  if (const detail::json* p = r.sub("phase_swap_epoch"); p && !p->is_null()) {
    int e = 0;
    r.get("phase_swap_epoch", e);
    cfg.phase_swap_epoch = e;
  }
  r.get("policies", cfg.policies);
  r.get("instances", cfg.instances);
  r.get("enumeration_cap", cfg.enumeration_cap);
  if (const detail::json* b = r.sub("bench")) {
    detail::Reader br(*b, "bench");
    br.get("n", cfg.bench.n);
    br.get("repetitions", cfg.bench.repetitions);
    br.finish();
  }
  r.get("out_dir", cfg.out_dir);
  r.get("report_timing", cfg.report_timing);
  r.finish();
  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

// Full effective configuration, every field explicit.
inline std::string dump_run_config(const RunConfig& cfg) {
  using detail::json;
  json j;
  j["scenario"] = cfg.scenario;
  j["seed"] = cfg.seed;
  if (cfg.instance) j["instance"] = detail::write_instance(*cfg.instance);
  json ranges;
  const char* names[3] = {"ILP", "MID", "MEM"};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& r = cfg.workload.spec.ranges[k];
    ranges[names[k]] = {r.z_lo, r.z_hi, r.c_lo, r.c_hi, r.p_lo, r.p_hi, r.a_lo, r.a_hi};
  }
  j["workload"] = {{"class", to_string(cfg.workload.spec.cls)}, {"n_cores", cfg.workload.n_cores}, {"ranges", ranges}};
  j["budget_fraction"] = cfg.budget_fraction;
  j["budgets"] = cfg.budgets;
  j["solver"] = {{"d_tolerance", cfg.solver.d_tolerance},
                 {"quantize_mode", detail::enum_name(cfg.solver.quantize_mode, detail::quantize_names())},
                 {"exhaustive_threshold", cfg.solver.exhaustive_threshold}};
  const auto& s = cfg.sim;
  j["sim"] = {{"bank_count", s.bank_count},
              {"controller_count", s.controller_count},
              {"bank_controller", s.bank_controller},
              {"think_distribution", detail::enum_name(s.think_distribution, detail::think_names())},
              {"bank_weights", s.bank_weights},
              {"bank_service", detail::enum_name(s.bank_service, detail::service_names())},
              {"s_m", s.s_m},
              {"tpi_max", s.tpi_max},
              {"warmup", s.warmup}};
  const auto& c = cfg.controller;
  j["controller"] = {{"epoch_len", c.epoch_len},
                     {"profiling_len", c.profiling_len},
                     {"transition_overhead", c.transition_overhead},
                     {"quantize_mode", detail::enum_name(c.quantize_mode, detail::quantize_names())},
                     {"refit_period", c.refit_period},
                     {"initial_alpha", c.initial_alpha},
                     {"initial_beta", c.initial_beta},
                     {"power_noise", c.power_noise},
                     {"phase_reset_threshold", c.phase_reset_threshold},
                     {"simulate_baseline", c.simulate_baseline}};
  j["n_epochs"] = cfg.n_epochs;
  j["phase_swap_epoch"] = cfg.phase_swap_epoch ? json(*cfg.phase_swap_epoch) : json(nullptr);
  j["policies"] = cfg.policies;
  j["instances"] = cfg.instances;
  j["enumeration_cap"] = cfg.enumeration_cap;
  j["bench"] = {{"n", cfg.bench.n}, {"repetitions", cfg.bench.repetitions}};
  j["out_dir"] = cfg.out_dir;
  j["report_timing"] = cfg.report_timing;
  return j.dump(2) + "\n";
}

}  // namespace powercap
