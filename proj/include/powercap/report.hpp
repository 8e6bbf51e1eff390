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

// Result rows and CSV emission. Column order is part of the file format.

#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "powercap/errors.hpp"

namespace powercap {

struct ResultRow {
  std::string scenario;
  std::string policy;
  long epoch = 0;  // -1 marks the all-max baseline row
  double normalized_power = 0.0;  // power / peak power
  double d = 0.0;
  double worst_degradation = 0.0;
  double average_degradation = 0.0;
  std::vector<std::size_t> core_freq_idx;
  std::size_t mem_freq_idx = 0;
  std::optional<double> solver_wall_time_us;  // only when timing is requested
  std::string status = "ok";

  bool operator==(const ResultRow&) const = default;
};

inline const char* result_csv_header() {
  return "scenario,policy,epoch,normalized_power,d,worst_degradation,average_degradation,core_freq_idx,"
         "mem_freq_idx,solver_wall_time_us,status";
}

namespace detail {

// Shortest text that reads back to the same double; locale independent.
inline std::string fmt_double(double v) {
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string to_csv_line(const ResultRow& r) {
  std::string idx;
  for (std::size_t k = 0; k < r.core_freq_idx.size(); ++k) {
    if (k) idx += ';';
    idx += std::to_string(r.core_freq_idx[k]);
  }
  const bool skipped = r.status != "ok";
  const auto num = [&](double v) { return skipped ? std::string() : detail::fmt_double(v); };
  std::string line = detail::csv_field(r.scenario) + "," + detail::csv_field(r.policy) + "," +
                     std::to_string(r.epoch) + "," + num(r.normalized_power) + "," + num(r.d) + "," +
                     num(r.worst_degradation) + "," + num(r.average_degradation) + "," + idx + "," +
                     (skipped ? std::string() : std::to_string(r.mem_freq_idx)) + "," +
                     (r.solver_wall_time_us ? detail::fmt_double(*r.solver_wall_time_us) : std::string()) + "," +
                     detail::csv_field(r.status);
  return line;
}

inline std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(result_csv_header()) + "\n";
  for (const auto& r : rows) out += to_csv_line(r) + "\n";
  return out;
}

// Writes via a sibling temporary and rename so readers never see a partial
// file. Creates missing parent directories.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename to '" + path.string() + "': " + ec.message());
}

}  // namespace powercap
