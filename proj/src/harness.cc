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

#include "detect_lab/harness.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "detect_lab/errors.h"
#include "detect_lab/graph_sim.h"
#include "detect_lab/info_metrics.h"
#include "detect_lab/parallel.h"
#include "detect_lab/rng.h"
#include "detect_lab/sequential.h"
#include "detect_lab/spectral.h"
#include "detect_lab/temporal_sim.h"
#include "detect_lab/text_format.h"

namespace detect_lab::harness {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
}

std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return format_double(v.get<double>());
  return v.dump();
}

spectral::StaticDetectorConfig detector_config(const RunConfig& config) {
  spectral::StaticDetectorConfig out;
  const auto method = config.get_string("detector.method", "nb");
  if (method == "bethe") {
    out.method = spectral::ScoreMethod::kBetheHessian;
  } else if (method != "nb") {
    throw ConfigError("detector.method must be nb or bethe");
  }
  out.power.prune = config.get_bool("detector.prune", true);
  out.power.degree_normalize = config.get_bool("detector.degree_normalize", false);
  out.power.max_iters = static_cast<int>(config.get_int("detector.max_iters", 100));
  out.power.tol = config.get_double("detector.tol", 1e-8);
  return out;
}

void add_common_metadata(SweepGrid& grid, const RunConfig& config, const std::string& experiment) {
  grid.metadata.emplace_back("experiment", experiment);
  grid.metadata.emplace_back("seed", std::to_string(config.get_seed("experiment.seed", 1)));
  grid.metadata.emplace_back("code_version", kCodeVersion);
}

// Fraction of planted instances rejected at the given threshold; instance i
// depends only on (seed, i), so curves for different deltas or perturbation
// levels share random numbers.
std::size_t count_rejections(std::size_t n, double p, std::size_t k, double delta, double threshold,
                             std::size_t replicates, std::uint64_t seed,
                             const spectral::StaticDetectorConfig& detector, double epsilon = 0.0,
                             PerturbMode mode = PerturbMode::kRewire, bool targeted = false) {
  auto rejected = parallel_map(replicates, [&](std::size_t r) {
    auto inst = generate_planted(n, p, delta, k, derive_seed(seed, r, 0));
    Graph g = std::move(inst.graph);
    if (epsilon > 0.0) {
      PerturbationBudget budget{epsilon, mode, derive_seed(seed, r, 2), std::nullopt};
      if (targeted) budget.targeted_set = inst.planted;
      g = perturb(g, budget);
    }
    return spectral::detect_static(g, k, threshold, detector, derive_seed(seed, r, 1)).reject ? 1 : 0;
  });
  std::size_t total = 0;
  for (int v : rejected) total += static_cast<std::size_t>(v);
  return total;
}

double delta_for_multiplier(std::size_t n, double p, std::size_t k, double multiplier) {
  const double kd = static_cast<double>(k);
  const double chi2 = multiplier * std::log(static_cast<double>(n)) / (kd * kd);
  return std::sqrt(chi2 * p * (1.0 - p));
}

PerturbMode parse_mode(const std::string& mode) {
  if (mode == "add") return PerturbMode::kAdd;
  if (mode == "drop") return PerturbMode::kDrop;
  if (mode == "rewire") return PerturbMode::kRewire;
  throw ConfigError("perturbation mode must be add, drop or rewire");
}

std::vector<double> geometric_grid(double lo, double hi, int points) {
  std::vector<double> out;
  for (int i = 0; i < points; ++i)
    out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::parse_text(std::istream& in) {
  RunConfig config;
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    line = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    config.values_[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
  }
  return config;
}

RunConfig RunConfig::parse_json(std::istream& in) {
  RunConfig config;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  auto flatten = [](const nlohmann::json& v) {
    if (!v.is_array()) return json_scalar(v);
    std::string joined;
    for (const auto& item : v) joined += (joined.empty() ? "" : ",") + json_scalar(item);
    return joined;
  };
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      for (const auto& [sub, inner] : value.items()) config.values_[key + "." + sub] = flatten(inner);
    } else {
      config.values_[key] = flatten(value);
    }
  }
  return config;
}

RunConfig RunConfig::parse(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  std::istringstream again(text);
  if (first != std::string::npos && text[first] == '{') return parse_json(again);
  return parse_text(again);
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse(in);
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

std::int64_t RunConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const double v = parse_double(key, it->second);
  if (v != std::floor(v)) throw ConfigError("config key '" + key + "': expected an integer");
  return static_cast<std::int64_t>(v);
}

std::uint64_t RunConfig::get_seed(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected an unsigned integer seed");
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean");
}

std::vector<double> RunConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  std::string current;
  bool first = true;
  // Top-level keys first, then sections in key order.
  for (const auto& [key, value] : values_)
    if (key.find('.') == std::string::npos) out << key << " = " << value << '\n';
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const auto section = key.substr(0, dot);
    if (first || section != current) {
      out << '[' << section << "]\n";
      current = section;
      first = false;
    }
    out << key.substr(dot + 1) << " = " << value << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// SweepGrid

std::size_t SweepGrid::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("no column " + name);
  return static_cast<std::size_t>(it - columns.begin());
}

void write_csv(std::ostream& out, const SweepGrid& grid) {
  out << "# detect-lab schema v" << kSchemaVersion << '\n';
  for (const auto& [key, value] : grid.metadata) out << "# " << key << ": " << value << '\n';
  for (std::size_t c = 0; c < grid.columns.size(); ++c) out << (c ? "," : "") << grid.columns[c];
  out << '\n';
  for (const auto& row : grid.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
    out << '\n';
  }
}

SweepGrid read_csv(std::istream& in) {
  SweepGrid grid;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      if (line.rfind("# detect-lab schema", 0) == 0) continue;
      const auto colon = line.find(": ");
      if (colon == std::string::npos) throw ConfigError("csv: malformed metadata line");
      grid.metadata.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (!header_seen) {
      grid.columns = fields;
      header_seen = true;
      continue;
    }
    if (fields.size() != grid.columns.size()) throw ConfigError("csv: ragged row");
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(f.empty() ? kNaN : parse_double("csv", f));
    grid.rows.push_back(std::move(row));
  }
  if (!header_seen) throw ConfigError("csv: missing header");
  return grid;
}

bool same_grid(const SweepGrid& a, const SweepGrid& b) {
  if (a.metadata != b.metadata || a.columns != b.columns || a.rows.size() != b.rows.size()) return false;
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    if (a.rows[r].size() != b.rows[r].size()) return false;
    for (std::size_t c = 0; c < a.rows[r].size(); ++c) {
      const double x = a.rows[r][c];
      const double y = b.rows[r][c];
      if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
    }
  }
  return true;
}

Proportion wilson_interval(std::size_t successes, std::size_t trials) {
  Proportion out;
  if (trials == 0) return {kNaN, kNaN, kNaN};
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  constexpr double z = 1.959963984540054;
  const double denom = 1.0 + z * z / n;
  const double center = (phat + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom;
  out.estimate = phat;
  out.ci_low = successes == 0 ? 0.0 : std::max(0.0, center - half);
  out.ci_high = successes == trials ? 1.0 : std::min(1.0, center + half);
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

SweepGrid sweep_static_heatmap(const RunConfig& config) {
  const auto n = config.get_int("heatmap.n", 100000);
  const double p = config.get_double("heatmap.p", 0.01);
  std::vector<double> k_default;
  for (int k = 50; k <= 1000; k += 50) k_default.push_back(k);
  const auto ks = config.get_doubles("heatmap.k", k_default);
  const auto deltas = config.get_doubles("heatmap.delta", geometric_grid(1e-4, 1e-2, 21));
  const auto replicates = static_cast<std::size_t>(config.get_int("heatmap.replicates", 0));
  const double alpha = config.get_double("heatmap.alpha", 0.05);
  const auto calib = static_cast<std::size_t>(config.get_int("heatmap.calib_replicates", 200));
  const auto seed = config.get_seed("experiment.seed", 1);
  require(n >= 2, "heatmap.n must be at least 2");
  require(p > 0.0 && p < 1.0, "heatmap.p must lie in (0,1)");

  SweepGrid grid;
  add_common_metadata(grid, config, "heatmap");
  grid.metadata.emplace_back("n", std::to_string(n));
  grid.metadata.emplace_back("p", format_double(p));
  grid.metadata.emplace_back("penalty", "ln n");
  grid.metadata.emplace_back("contour", "margin = 0 at delta_min = sqrt(p(1-p) ln n)/k; a log(n)/k scaling is not used");
  grid.metadata.emplace_back("monte_carlo_scale", replicates > 0 ? "overlay at the configured n" : "analytic only");
  grid.columns = {"k", "delta", "chi2", "margin", "power", "ci_low", "ci_high", "replicates", "feasible"};

  const auto detector = detector_config(config);
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    const auto k = static_cast<std::int64_t>(ks[ki]);
    require(k >= 2 && k <= n, "heatmap.k entries must satisfy 2 <= k <= n");
    double threshold = kNaN;
    if (replicates > 0) {
      threshold = spectral::calibrate_null(static_cast<std::size_t>(n), p, static_cast<std::size_t>(k), alpha, calib,
                                           derive_seed(seed, 0xca1, ki), detector)
                      .threshold;
    }
    for (std::size_t di = 0; di < deltas.size(); ++di) {
      const double delta = deltas[di];
      const bool feasible = p + delta <= 1.0 && p + delta >= 0.0;
      std::vector<double> row{static_cast<double>(k), delta, kNaN, kNaN, kNaN, kNaN, kNaN, 0.0, feasible ? 1.0 : 0.0};
      if (feasible) {
        const auto budget = info::info_budget_static(n, k, {p, delta});
        row[2] = info::chi_square_bernoulli({p, delta});
        row[3] = budget.margin;
        if (replicates > 0) {
          const auto hits = count_rejections(static_cast<std::size_t>(n), p, static_cast<std::size_t>(k), delta,
                                             threshold, replicates, derive_seed(seed, 0x90e, ki, di), detector);
          const auto prop = wilson_interval(hits, replicates);
          row[4] = prop.estimate;
          row[5] = prop.ci_low;
          row[6] = prop.ci_high;
          row[7] = static_cast<double>(replicates);
        }
      }
      grid.rows.push_back(std::move(row));
    }
  }
  return grid;
}

SweepGrid sweep_temporal_threshold_grid(const RunConfig& config) {
  const auto ns = config.get_doubles("temporal.n", {1e2, 1e3, 1e4, 1e5, 1e6});
  const auto rates = config.get_doubles("temporal.info_rate", {0.1, 1.0});
  SweepGrid grid;
  add_common_metadata(grid, config, "temporal-threshold");
  grid.metadata.emplace_back("penalty", "ln n");
  grid.columns = {"n", "info_rate", "ln_n", "required_T"};
  for (double rate : rates) {
    for (double nd : ns) {
      const auto n = static_cast<std::int64_t>(nd);
      grid.rows.push_back({nd, rate, std::log(nd), info::required_horizon(n, rate)});
    }
  }
  return grid;
}

TemporalSweep sweep_temporal_threshold(const RunConfig& config) {
  TemporalSweep out;
  out.threshold = sweep_temporal_threshold_grid(config);
  const auto replicates = static_cast<std::size_t>(config.get_int("overlay.replicates", 0));
  if (replicates == 0) return out;

  const auto n = static_cast<std::size_t>(config.get_int("overlay.n", 50));
  const double mu = config.get_double("overlay.mu", 1.0);
  const double delta = config.get_double("overlay.delta", 1.0);
  const auto k = static_cast<std::size_t>(config.get_int("overlay.k", 3));
  const double h = config.get_double("overlay.h", 0.5);
  const double alpha = config.get_double("overlay.alpha", 0.01);
  const auto factors = config.get_doubles("overlay.factors", {0.2, 2.0});
  const auto calib = static_cast<std::size_t>(config.get_int("overlay.calib_replicates", 400));
  const auto seed = config.get_seed("experiment.seed", 1);
  require(k >= 2 && k <= n, "overlay.k must satisfy 2 <= k <= n");

  const double rate = temporal::poisson_network_kl_rate(mu, delta, k).total;
  sequential::NullModel null_model;
  null_model.model.mu = mu;
  null_model.model.delta = delta;
  null_model.h = h;
  null_model.mode = sequential::ScanMode::kOracleSet;
  null_model.n = n;
  null_model.k = k;
  const auto calibration = sequential::calibrate_arl(null_model, 1.0 / alpha, calib, derive_seed(seed, 0xa71));

  sequential::DetectorConfig detector;
  detector.model = null_model.model;
  detector.h = h;
  detector.threshold = calibration.threshold;
  detector.mode = sequential::ScanMode::kOracleSet;
  detector.k = k;

  auto& grid = out.overlay;
  add_common_metadata(grid, config, "temporal-overlay");
  grid.metadata.emplace_back("monte_carlo_scale", "n=" + std::to_string(n) + ", oracle-set CUSUM");
  grid.metadata.emplace_back("info_rate", format_double(rate));
  grid.metadata.emplace_back("threshold", format_double(calibration.threshold));
  grid.metadata.emplace_back("target_arl_bins", format_double(1.0 / alpha));
  grid.columns = {"factor", "horizon", "power", "ci_low", "ci_high", "replicates"};
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    const double horizon = factors[fi] * std::log(static_cast<double>(n)) / rate;
    auto hits = parallel_map(replicates, [&](std::size_t r) {
      auto stream = temporal::simulate_poisson_network(n, mu, delta, k, 0.0, horizon, derive_seed(seed, 0x0e1, fi, r));
      auto report = sequential::detect_temporal(stream, detector);
      return report.alarm_time && *report.alarm_time <= horizon + 1e-12 ? 1 : 0;
    });
    std::size_t total = 0;
    for (int v : hits) total += static_cast<std::size_t>(v);
    const auto prop = wilson_interval(total, replicates);
    grid.rows.push_back({factors[fi], horizon, prop.estimate, prop.ci_low, prop.ci_high, static_cast<double>(replicates)});
  }
  return out;
}

SweepGrid sweep_delay(const RunConfig& config) {
  sequential::DelayCurveConfig dc;
  dc.alpha = config.get_double("delay.alpha", 1e-4);
  dc.info_rates = config.get_doubles("delay.info_rate", {0.25, 0.5, 1.0, 2.0});
  dc.mu = config.get_double("delay.mu", 1.0);
  dc.k = static_cast<std::size_t>(config.get_int("delay.k", 2));
  dc.h = config.get_double("delay.h", 1.0);
  dc.replicates = static_cast<std::size_t>(config.get_int("delay.replicates", 500));
  dc.calibration_replicates = static_cast<std::size_t>(config.get_int("delay.calib_replicates", 400));
  dc.seed = derive_seed(config.get_seed("experiment.seed", 1), 0xde1);

  SweepGrid grid;
  add_common_metadata(grid, config, "delay");
  grid.metadata.emplace_back("alpha", format_double(dc.alpha));
  grid.metadata.emplace_back("target_arl_bins", format_double(1.0 / dc.alpha));
  grid.metadata.emplace_back("scan", "oracle-set CUSUM, Poisson, mu=" + format_double(dc.mu) + ", k=" + std::to_string(dc.k));
  grid.columns = {"info_rate", "delta", "threshold", "achieved_arl", "predicted", "measured", "ci_low",
                  "ci_high", "ratio", "replicates", "censored"};
  for (const auto& pt : sequential::delay_curve(dc)) {
    grid.rows.push_back({pt.info_rate, pt.delta, pt.threshold, pt.achieved_arl, pt.predicted, pt.measured.mean,
                         pt.measured.ci_low, pt.measured.ci_high, pt.measured.mean / pt.predicted,
                         static_cast<double>(pt.measured.replicates), static_cast<double>(pt.measured.censored)});
  }
  return grid;
}

nlohmann::ordered_json case_study(const RunConfig& config) {
  const auto n = config.get_int("case.n", 100000);
  const double p = config.get_double("case.p", 0.01);
  const auto k = config.get_int("case.k", 500);
  const double rate = config.get_double("case.info_rate", 0.1);
  const auto factors = config.get_doubles("case.horizon_factors", {0.5, 1.0, 2.0, 4.0});

  const auto dmin = info::delta_min(n, p, k);
  nlohmann::ordered_json j;
  j["n"] = n;
  j["p"] = p;
  j["k"] = k;
  j["ln_n"] = std::log(static_cast<double>(n));
  j["delta_min"] = dmin.value;
  j["delta_min_clamped"] = dmin.clamped;
  j["p_lifted"] = p + dmin.value;
  j["relative_lift"] = (p + dmin.value) / p - 1.0;
  j["chi2_edge"] = info::chi_square_bernoulli({p, dmin.value});

  auto margins = nlohmann::ordered_json::array();
  for (std::int64_t kk : {k, 2 * k}) {
    if (kk > n) continue;
    const auto b = info::info_budget_static(n, kk, {p, dmin.value});
    margins.push_back({{"k", kk}, {"accumulated", b.accumulated}, {"penalty", b.penalty}, {"margin", b.margin},
                       {"delta_min", info::delta_min(n, p, kk).value}});
  }
  j["static_margins"] = margins;

  const double required = info::required_horizon(n, rate);
  auto horizons = nlohmann::ordered_json::array();
  for (double f : factors) {
    const auto b = info::info_budget_temporal(n, f * required, rate);
    horizons.push_back({{"T", f * required}, {"accumulated", b.accumulated}, {"margin", b.margin}});
  }
  j["temporal"] = {{"info_rate", rate}, {"required_T", required}, {"horizons", horizons}};
  return j;
}

double crossing_point(const std::vector<double>& multipliers, const std::vector<double>& power, double level) {
  for (std::size_t i = 0; i < power.size(); ++i) {
    if (power[i] < level) continue;
    if (i == 0) return multipliers[0];
    const double x0 = std::log(multipliers[i - 1]);
    const double x1 = std::log(multipliers[i]);
    const double t = (level - power[i - 1]) / (power[i] - power[i - 1]);
    return std::exp(x0 + t * (x1 - x0));
  }
  return std::numeric_limits<double>::infinity();
}

RobustnessResult robustness_experiment(const RunConfig& config) {
  const auto n = static_cast<std::size_t>(config.get_int("robust.n", 2000));
  const double p = config.get_double("robust.p", 0.005);
  const auto k = static_cast<std::size_t>(config.get_int("robust.k", 60));
  const double alpha = config.get_double("robust.alpha", 0.05);
  const auto epsilons = config.get_doubles("robust.epsilons", {0.0, 0.05, 0.1, 0.2});
  const auto multipliers = config.get_doubles("robust.multipliers", {100, 150, 200, 300, 450, 700, 1000});
  const auto replicates = static_cast<std::size_t>(config.get_int("robust.replicates", 200));
  const auto calib = static_cast<std::size_t>(config.get_int("robust.calib_replicates", 400));
  const auto mode = parse_mode(config.get_string("robust.mode", "rewire"));
  const bool targeted = config.get_bool("robust.targeted", false);
  const auto seed = config.get_seed("experiment.seed", 1);
  for (double e : epsilons) require(e >= 0.0 && e <= 0.3, "robust.epsilons must lie in [0, 0.3]");
  require(!epsilons.empty() && epsilons.front() == 0.0, "robust.epsilons must start at 0");

  RobustnessResult out;
  const auto detector = detector_config(config);
  const auto threshold = spectral::calibrate_null(n, p, k, alpha, calib, derive_seed(seed, 0xca1), detector).threshold;

  auto& power_grid = out.static_power;
  add_common_metadata(power_grid, config, "robustness-static");
  power_grid.metadata.emplace_back("perturbation", config.get_string("robust.mode", "rewire") + (targeted ? " targeted" : " uniform"));
  power_grid.metadata.emplace_back("threshold", format_double(threshold));
  power_grid.columns = {"epsilon", "multiplier", "delta", "power", "ci_low", "ci_high", "replicates"};

  auto& rho_grid = out.inflation;
  add_common_metadata(rho_grid, config, "robustness-rho");
  rho_grid.columns = {"epsilon", "crossing_multiplier", "rho", "replicates"};

  double base_crossing = kNaN;
  double num = 0.0;
  double den = 0.0;
  for (double eps : epsilons) {
    std::vector<double> curve;
    for (std::size_t mi = 0; mi < multipliers.size(); ++mi) {
      const double delta = delta_for_multiplier(n, p, k, multipliers[mi]);
      require(p + delta <= 1.0, "robust.multipliers exceed the feasible lift");
      // Same instances and perturbation draws for every epsilon.
      const auto hits = count_rejections(n, p, k, delta, threshold, replicates, derive_seed(seed, 0x90e, mi),
                                         detector, eps, mode, targeted);
      const auto prop = wilson_interval(hits, replicates);
      curve.push_back(prop.estimate);
      power_grid.rows.push_back({eps, multipliers[mi], delta, prop.estimate, prop.ci_low, prop.ci_high,
                                 static_cast<double>(replicates)});
    }
    const double crossing = crossing_point(multipliers, curve, 0.5);
    if (eps == 0.0) base_crossing = crossing;
    const double rho = eps == 0.0 ? 1.0 : crossing / base_crossing;
    rho_grid.rows.push_back({eps, crossing, rho, static_cast<double>(replicates)});
    if (eps > 0.0 && std::isfinite(rho)) {
      num += eps * (rho - 1.0);
      den += eps * eps;
    }
  }
  out.fitted_c = den > 0.0 ? num / den : 0.0;
  rho_grid.metadata.emplace_back("fitted_c", format_double(out.fitted_c));

  // Temporal: uniform event thinning; the detector knows the thinned rates
  // and is recalibrated to the same ARL.
  const double mu = config.get_double("robust.mu", 1.0);
  const double delta = config.get_double("robust.delta", 1.0);
  const auto tk = static_cast<std::size_t>(config.get_int("robust.temporal_k", 2));
  const double h = config.get_double("robust.h", 1.0);
  const double target_arl = config.get_double("robust.target_arl", 1000.0);
  const auto t_reps = static_cast<std::size_t>(config.get_int("robust.temporal_replicates", 500));
  const auto t_calib = static_cast<std::size_t>(config.get_int("robust.arl_replicates", 400));
  const double horizon = config.get_double("robust.horizon", 200.0);

  auto& tgrid = out.temporal;
  add_common_metadata(tgrid, config, "robustness-temporal");
  tgrid.metadata.emplace_back("target_arl_bins", format_double(target_arl));
  tgrid.columns = {"epsilon", "threshold", "mean_delay", "ci_low", "ci_high", "inflation", "expected_inflation", "replicates"};
  double base_delay = kNaN;
  for (std::size_t ei = 0; ei < epsilons.size(); ++ei) {
    const double eps = epsilons[ei];
    sequential::NullModel null_model;
    null_model.model.mu = mu * (1.0 - eps);
    null_model.model.delta = delta * (1.0 - eps);
    null_model.h = h;
    null_model.mode = sequential::ScanMode::kOracleSet;
    null_model.n = tk;
    null_model.k = tk;
    const auto calibration = sequential::calibrate_arl(null_model, target_arl, t_calib, derive_seed(seed, 0xa71, ei));
    const auto d = sequential::measure_poisson_delay(mu, delta, tk, h, calibration.threshold, eps, horizon, t_reps,
                                                     derive_seed(seed, 0xde1));
    if (eps == 0.0) base_delay = d.mean;
    tgrid.rows.push_back({eps, calibration.threshold, d.mean, d.ci_low, d.ci_high, d.mean / base_delay,
                          1.0 / (1.0 - eps), static_cast<double>(t_reps)});
  }
  return out;
}

}  // namespace detect_lab::harness
