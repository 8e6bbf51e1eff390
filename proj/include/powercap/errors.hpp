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

#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>

namespace powercap {

// Argument outside the mathematical domain of a model formula.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Power-model fit could not be computed from the given samples.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Counter window cannot produce a parameter (e.g. no memory accesses).
class CounterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration or structural validation failure.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The power budget cannot be met at any admissible operating point.
class Infeasible : public std::runtime_error {
 public:
  Infeasible(double floor_watts, double budget_watts,
             std::optional<std::int64_t> epoch = std::nullopt)
      : std::runtime_error(format(floor_watts, budget_watts, epoch)),
        floor_watts_(floor_watts),
        budget_watts_(budget_watts),
        epoch_(epoch) {}

  double floor_watts() const { return floor_watts_; }
  double budget_watts() const { return budget_watts_; }
  std::optional<std::int64_t> epoch() const { return epoch_; }

 private:
  static std::string format(double floor_watts, double budget_watts,
                            std::optional<std::int64_t> epoch) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "infeasible: floor=%.4fW budget=%.4fW",
                  floor_watts, budget_watts);
    std::string msg(buf);
    if (epoch) msg += " (epoch " + std::to_string(*epoch) + ")";
    return msg;
  }

  double floor_watts_;
  double budget_watts_;
  std::optional<std::int64_t> epoch_;
};

// Exhaustive enumeration would exceed the configured combination cap.
class EnumerationTooLarge : public std::runtime_error {
 public:
  EnumerationTooLarge(double combinations, double cap)
      : std::runtime_error("enumeration too large: " +
                           std::to_string(combinations) + " combinations > cap " +
                           std::to_string(cap)),
        combinations_(combinations) {}

  double combinations() const { return combinations_; }

 private:
  double combinations_;
};

}  // namespace powercap
