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

// powercap: solve / simulate / compare / bench driver.
//
// Exit codes: 0 success, 1 usage or validation error, 2 infeasible budget.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "powercap/powercap.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace powercap;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool dump = false;
};

RunConfig load(const CommonArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.out.empty()) cfg.out_dir = a.out;
  cfg.validate();
  return cfg;
}

std::filesystem::path out_file(const RunConfig& cfg, const std::string& suffix) {
  return std::filesystem::path(cfg.out_dir) / (cfg.scenario + "_" + suffix);
}

int cmd_solve(const RunConfig& cfg) {
  const Instance inst = cfg.effective_instance();
  inst.validate();
  const auto plan = fastcap_solve(inst, cfg.solver);
  json j;
  j["scenario"] = cfg.scenario;
  j["d"] = plan.d_value;
  j["worst_d"] = plan.worst_d;
  j["s_b"] = plan.s_b;
  j["mem_freq_idx"] = plan.mem_freq_idx;
  j["core_freq_idx"] = plan.core_freq_idx;
  std::vector<double> ratios;
  for (std::size_t k : plan.core_freq_idx) ratios.push_back(inst.core_freq_grid[k]);
  j["core_freq_ratio"] = ratios;
  j["think_times"] = plan.think_times;
  j["clamped_cores"] = plan.clamped_cores;
  j["power_continuous"] = plan.power_continuous;
  j["power_quantized"] = plan.power_quantized;
  j["budget_watts"] = inst.budget.watts();
  j["budget_met"] = plan.budget_met;
  j["quantize_mode"] = to_string(cfg.solver.quantize_mode);
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

std::vector<CoreProfile> reversed(std::vector<CoreProfile> cores) {
  std::reverse(cores.begin(), cores.end());
  return cores;
}

int cmd_simulate(const RunConfig& cfg) {
  const Instance inst = cfg.effective_instance();
  inst.validate();
  SimConfig sim = cfg.sim;
  sim.n_cores = static_cast<int>(inst.size());
  sim.rng_seed = cfg.seed;
  ControllerConfig ctrl = cfg.controller;
  std::vector<PhaseChange> phases;
  if (cfg.phase_swap_epoch) phases.push_back({*cfg.phase_swap_epoch, reversed(inst.cores)});
  const auto trace = run_capped(inst, sim, ctrl, inst.budget.budget_fraction, cfg.n_epochs, phases);

  std::vector<ResultRow> rows;
  ResultRow base;
  base.scenario = cfg.scenario;
  base.policy = "baseline";
  base.epoch = -1;
  base.normalized_power = trace.baseline_power / trace.p_peak;
  base.d = 1.0;
  base.worst_degradation = 1.0;
  base.average_degradation = 1.0;
  base.core_freq_idx.assign(inst.size(), inst.core_freq_grid.size() - 1);
  base.mem_freq_idx = 0;
  rows.push_back(base);
  for (const auto& e : trace.epochs) {
    ResultRow r;
    r.scenario = cfg.scenario;
    r.policy = "fastcap";
    r.epoch = e.epoch;
    r.normalized_power = e.measured_power / trace.p_peak;
    r.d = e.plan.d_value;
    r.worst_degradation = e.worst_degradation;
    r.average_degradation = e.average_degradation;
    r.core_freq_idx = e.plan.core_freq_idx;
    r.mem_freq_idx = e.plan.mem_freq_idx;
    if (cfg.report_timing) r.solver_wall_time_us = e.solve_time_us;
    rows.push_back(std::move(r));
  }

  const auto& s = trace.summary;
  json summary;
  summary["scenario"] = cfg.scenario;
  summary["n_cores"] = inst.size();
  summary["n_epochs"] = cfg.n_epochs;
  summary["p_peak"] = trace.p_peak;
  summary["budget_watts"] = trace.budget_watts;
  summary["baseline_power"] = trace.baseline_power;
  summary["mean_measured_power"] = s.mean_measured_power;
  summary["mean_predicted_power"] = s.mean_predicted_power;
  summary["normalized_mean_measured_power"] = s.mean_measured_power / trace.p_peak;
  summary["normalized_mean_predicted_power"] = s.mean_predicted_power / trace.p_peak;
  summary["worst_degradation"] = s.worst_degradation;
  summary["average_degradation"] = s.average_degradation;
  summary["violation_epochs"] = s.violation_epochs;

  const auto csv_path = out_file(cfg, "simulate.csv");
  write_file_atomic(csv_path, to_csv(rows));
  write_file_atomic(out_file(cfg, "summary.json"), summary.dump(2) + "\n");
  std::cout << csv_path.string() << "\n";
  return kExitOk;
}

PolicyResult run_policy(const std::string& name, const Instance& inst, const RunConfig& cfg) {
  if (name == "fastcap") return solve_fastcap_policy(inst, cfg.solver.quantize_mode);
  if (name == "cpu_only") return solve_cpu_only(inst);
  if (name == "eql_pwr") return solve_eql_pwr(inst);
  if (name == "eql_freq") return solve_eql_freq(inst);
  return solve_maxbips(inst, ThroughputWeights::from_instance(inst), cfg.enumeration_cap);
}

std::string budget_label(double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", b);
  return buf;
}

int cmd_compare(const RunConfig& cfg) {
  const std::vector<double> budgets = cfg.budgets.empty() ? std::vector<double>{cfg.budget_fraction} : cfg.budgets;
  const int instances = cfg.instance ? 1 : cfg.instances;
  std::vector<ResultRow> rows;
  for (double b : budgets) {
    for (int k = 0; k < instances; ++k) {
      Instance inst = cfg.effective_instance(cfg.seed + static_cast<std::uint64_t>(k));
      inst.budget.budget_fraction = b;
      inst.validate();
      const std::string id = cfg.scenario + "/b" + budget_label(b) + "/i" + std::to_string(k);
      for (const auto& p : cfg.policies) {
        ResultRow r;
        r.scenario = id;
        r.policy = p;
        r.epoch = 0;
        try {
          const auto t0 = std::chrono::steady_clock::now();
          const auto res = run_policy(p, inst, cfg);
          const double us =
              std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
          r.normalized_power = res.power / inst.budget.p_peak;
          r.d = res.d_equivalent;
          r.worst_degradation = res.worst_degradation;
          r.average_degradation = res.average_degradation;
          r.core_freq_idx = res.core_freq_idx;
          r.mem_freq_idx = res.mem_freq_idx;
          if (cfg.report_timing) r.solver_wall_time_us = us;
        } catch (const EnumerationTooLarge&) {
          r.status = "skipped:EnumerationTooLarge";
        } catch (const Infeasible&) {
          r.status = "skipped:Infeasible";
        }
        rows.push_back(std::move(r));
      }
    }
  }
  const auto path = out_file(cfg, "compare.csv");
  write_file_atomic(path, to_csv(rows));
  std::cout << path.string() << "\n";
  return kExitOk;
}

int cmd_bench(const RunConfig& cfg) {
  const auto rows = bench_solver(cfg.bench.n, cfg.bench.repetitions, cfg.seed, cfg.solver);
  std::string csv = "n_cores,repetitions,mean_us,median_us,growth_ratio\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.n_cores) + "," + std::to_string(r.repetitions) + "," +
           detail::fmt_double(r.mean_us) + "," + detail::fmt_double(r.median_us) + "," +
           (r.growth_ratio > 0.0 ? detail::fmt_double(r.growth_ratio) : std::string()) + "\n";
  }
  const auto path = out_file(cfg, "bench.csv");
  write_file_atomic(path, csv);
  std::cout << csv;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-system power capping: optimizer, simulator and policy comparison"};
  app.require_subcommand(1);

  CommonArgs args;
  std::vector<int> bench_n;
  std::optional<int> bench_reps;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "Run configuration (JSON)");
    sub->add_option("--out", args.out, "Output directory");
    sub->add_option("--seed", args.seed, "Override the configuration seed");
    sub->add_flag("--dump-effective-config", args.dump, "Print the effective configuration and exit");
  };
  auto* solve = app.add_subcommand("solve", "Solve one instance and print the plan");
  auto* simulate = app.add_subcommand("simulate", "Run the closed control loop in the simulator");
  auto* compare = app.add_subcommand("compare", "Compare capping policies");
  auto* bench = app.add_subcommand("bench", "Time the solver across core counts");
  for (auto* s : {solve, simulate, compare, bench}) add_common(s);
  bench->add_option("--n", bench_n, "Core counts");
  bench->add_option("--repetitions", bench_reps, "Instances per core count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = load(args);
    if (*bench) {
      if (!bench_n.empty()) cfg.bench.n = bench_n;
      if (bench_reps) cfg.bench.repetitions = *bench_reps;
      cfg.validate();
    }
    if (args.dump) {
      std::cout << dump_run_config(cfg);
      return kExitOk;
    }
    if (*solve) return cmd_solve(cfg);
    if (*simulate) return cmd_simulate(cfg);
    if (*compare) return cmd_compare(cfg);
    return cmd_bench(cfg);
  } catch (const Infeasible& e) {
    std::cerr << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
