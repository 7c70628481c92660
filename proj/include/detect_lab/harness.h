// Copyright 2026 The detect-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DETECT_LAB_HARNESS_H_
#define DETECT_LAB_HARNESS_H_

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

// Experiment orchestration: configuration, parameter sweeps, the worked
// design example and the perturbation-robustness study. Every output is a
// pure function of the configuration (including its seed).

namespace detect_lab::harness {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "detect-lab 1.0.0";

// Flat key/value configuration. Text form is one "key = value" per line with
// optional "[section]" headers ('#' and ';' start comments); keys are stored
// as "section.key". A JSON object with nested sections is accepted as well.
class RunConfig {
 public:
  static RunConfig parse_text(std::istream& in);
  static RunConfig parse_json(std::istream& in);
  // Dispatches on the first non-blank character ('{' means JSON).
  static RunConfig parse(std::istream& in);
  static RunConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // Accessors throw ConfigError when a present value does not parse.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  // Canonical text form; parse_text(to_text()) reproduces the config.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

// Rectangular result table. NaN marks a blank cell (e.g. no Monte Carlo
// overlay requested). Metadata lines precede the header in CSV form.
struct SweepGrid {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // throws std::out_of_range
  double at(std::size_t row, const std::string& name) const { return rows[row][column(name)]; }
};

void write_csv(std::ostream& out, const SweepGrid& grid);
SweepGrid read_csv(std::istream& in);
// Cell-wise equality treating NaN == NaN.
bool same_grid(const SweepGrid& a, const SweepGrid& b);

struct Proportion {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};
// Wilson 95% interval.
Proportion wilson_interval(std::size_t successes, std::size_t trials);

// Analytic detectability margin k^2 chi^2 - ln n over a (k, delta) grid,
// optionally overlaid with empirical power of the spectral detector.
SweepGrid sweep_static_heatmap(const RunConfig& config);

struct TemporalSweep {
  SweepGrid threshold;  // n, info_rate, ln_n, required_T
  SweepGrid overlay;    // empty unless overlay.replicates > 0
};
SweepGrid sweep_temporal_threshold_grid(const RunConfig& config);
TemporalSweep sweep_temporal_threshold(const RunConfig& config);

// Predicted |ln alpha| / I against measured oracle-set CUSUM delays.
SweepGrid sweep_delay(const RunConfig& config);

nlohmann::ordered_json case_study(const RunConfig& config);

struct RobustnessResult {
  SweepGrid static_power;  // epsilon, multiplier, delta, power, ci_low, ci_high, replicates
  SweepGrid inflation;     // epsilon, crossing_multiplier, rho, replicates
  SweepGrid temporal;      // epsilon, threshold, mean_delay, ci_low, ci_high, inflation, expected_inflation, replicates
  double fitted_c = 0.0;   // least-squares C in rho(eps) ~ 1 + C eps
};

RobustnessResult robustness_experiment(const RunConfig& config);

// Multiplier at which the power curve first reaches `level`, by linear
// interpolation in log(multiplier); +inf when it never does.
double crossing_point(const std::vector<double>& multipliers, const std::vector<double>& power, double level);

}  // namespace detect_lab::harness

#endif  // DETECT_LAB_HARNESS_H_
