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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.h"

#include "detect_lab/graph_sim.h"
#include "detect_lab/harness.h"
#include "detect_lab/info_metrics.h"
#include "detect_lab/rng.h"
#include "detect_lab/sequential.h"
#include "detect_lab/spectral.h"
#include "detect_lab/temporal_sim.h"

namespace fs = std::filesystem;
using namespace detect_lab;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

int run_cli(const std::string& args) {
  const auto cmd = std::string(DETECT_LAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Count of adjacent decreases larger than tolerance, and of any decrease.
std::pair<int, int> inversions(const std::vector<double>& values, const std::vector<double>& tolerance) {
  int big = 0;
  int any = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] >= values[i - 1]) continue;
    ++any;
    if (values[i - 1] - values[i] > tolerance[i]) ++big;
  }
  return {big, any};
}

Outcome case_study() {
  const auto start = Clock::now();
  const auto dir = fs::temp_directory_path() / "detect_lab_acceptance_case";
  fs::remove_all(dir);
  const int code = run_cli("--out " + dir.string() + " case-study");
  const double elapsed = seconds_since(start);
  if (code != 0) return {false, "case-study exited with " + std::to_string(code)};
  const auto j = nlohmann::json::parse(slurp(dir / "case_study.json"));
  const double ln_n = j["ln_n"];
  const double dmin = j["delta_min"];
  const double lift = j["relative_lift"];
  const bool ok = std::round(ln_n * 1e4) / 1e4 == 11.5129 && std::abs(dmin / 6.74e-4 - 1.0) <= 0.01 &&
                  std::abs(lift - 0.067) <= 0.001 && elapsed < 1.0;
  fs::remove_all(dir);
  return {ok, fmt("ln n = %.4f", ln_n) + fmt(", delta_min = %.4e", dmin) +
                  fmt(" (%.2f%% off 6.74e-4)", 100.0 * std::abs(dmin / 6.74e-4 - 1.0)) +
                  fmt(", lift = %.3f%%", 100.0 * lift) + fmt(", %.3f s", elapsed)};
}

Outcome figure_anchors() {
  const auto start = Clock::now();
  const double t = info::required_horizon(1000000, 0.1);
  const double d = info::expected_delay(1e-4, 1.0);
  const double elapsed = seconds_since(start);
  const bool ok = t >= 138.0 && t <= 138.2 && d >= 9.21 && d <= 9.22 && elapsed < 1.0;
  return {ok, fmt("required_horizon(1e6, 0.1) = %.4f", t) + fmt(", expected_delay(1e-4, 1) = %.4f", d)};
}

Outcome exact_formulas() {
  const auto start = Clock::now();
  std::mt19937_64 gen(2026);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_chi2 = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double p = 1e-4 + (1.0 - 2e-4) * unit(gen);
    const double q = unit(gen);
    const double want = oracle::bernoulli_chi2(p, q);
    worst_chi2 = std::max(worst_chi2, std::abs(info::chi_square_bernoulli({p, q - p}) - want) / std::max(1.0, want));
  }
  double worst_kl = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double mu = 0.01 + 49.99 * unit(gen);
    const double delta = 2.0 * mu * unit(gen);
    worst_kl = std::max(worst_kl, std::abs(info::poisson_kl_rate({mu, delta}) - oracle::poisson_kl_series(mu, mu + delta)));
  }
  double lo = 2.0;
  double hi = 0.0;
  for (double mu : {0.01, 0.5, 1.0, 10.0, 50.0}) {
    for (double rel = 1e-6; rel <= 0.02 + 1e-15; rel *= 1.5) {
      const double delta = rel * mu;
      const double ratio = info::poisson_kl_rate({mu, delta}) / (delta * delta / (2.0 * mu));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  const double elapsed = seconds_since(start);
  const bool ok = worst_chi2 <= 1e-12 && worst_kl <= 1e-9 && lo >= 0.99 && hi <= 1.01 && elapsed < 10.0;
  return {ok, fmt("chi2 max rel err %.1e", worst_chi2) + fmt(", KL max abs err %.1e", worst_kl) +
                  fmt(", small-shift ratio in [%.5f", lo) + fmt(", %.5f]", hi) + fmt(", %.2f s", elapsed)};
}

Outcome mixture_oracle() {
  const auto start = Clock::now();
  double worst = 0.0;
  int cases = 0;
  for (int n = 2; n <= 10; ++n) {
    for (int k = 2; k <= std::min(4, n); ++k) {
      for (double chi2 : {0.0, 0.05, 0.5}) {
        const double want = oracle::mixture_chi2_enumeration(n, k, chi2);
        worst = std::max(worst, std::abs(info::mixture_chi_square(n, k, chi2).chi2_mixture - want) / std::max(1.0, want));
        ++cases;
      }
    }
  }
  const double small = info::mixture_chi_square(4, 2, 0.1).chi2_mixture;
  const double elapsed = seconds_since(start);
  const bool ok = worst <= 1e-12 && std::abs(small - 1.0 / 60.0) <= 1e-12 && elapsed < 30.0;
  return {ok, std::to_string(cases) + " cases" + fmt(", max err %.1e", worst) + fmt(", (4,2,0.1) -> %.15f", small) +
                  fmt(", %.2f s", elapsed)};
}

Outcome nb_operator() {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> size(3, 30);
  std::uniform_real_distribution<double> density(0.05, 0.6);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  bool rows_ok = true;
  int tested = 0;
  for (std::uint64_t s = 0; tested < 50; ++s) {
    const auto g = generate_er(static_cast<std::size_t>(size(gen)), density(gen), derive_seed(1234, s));
    if (g.num_edges() == 0) continue;
    ++tested;
    const auto dense = oracle::dense_nb(g);
    spectral::NbOperator op(g);
    const auto& index = op.index();
    std::vector<double> xd(dense.arcs.size());
    for (double& v : xd) v = normal(gen);
    std::vector<double> x(op.dimension());
    for (std::size_t e = 0; e < xd.size(); ++e) x[index.id(dense.arcs[e].first, dense.arcs[e].second)] = xd[e];
    const auto y = op.apply(x);
    const auto ones = op.apply(std::vector<double>(op.dimension(), 1.0));
    for (std::size_t e = 0; e < xd.size(); ++e) {
      double want = 0.0;
      for (std::size_t f = 0; f < xd.size(); ++f) want += dense.matrix[e][f] * xd[f];
      const auto id = index.id(dense.arcs[e].first, dense.arcs[e].second);
      worst = std::max(worst, std::abs(want - y[id]));
      rows_ok = rows_ok && ones[id] == static_cast<double>(g.degree(dense.arcs[e].second)) - 1.0;
    }
  }
  // K6 is 5-regular; its NB leading eigenvalue is 4.
  std::vector<Edge> k6;
  for (Vertex u = 0; u < 6; ++u)
    for (Vertex v = u + 1; v < 6; ++v) k6.emplace_back(u, v);
  spectral::PowerIterationOptions opts;
  opts.max_iters = 5000;
  opts.tol = 1e-13;
  const double lead = spectral::nb_power_iteration(spectral::NbOperator(Graph::from_edges(6, k6)), 3, opts).leading_value;
  const bool ok = worst <= 1e-12 && rows_ok && std::abs(lead - 4.0) <= 1e-6;
  return {ok, "50 graphs" + fmt(", max apply err %.1e", worst) + ", row sums " + (rows_ok ? "exact" : "WRONG") +
                  fmt(", K6 leading value %.9f", lead)};
}

Outcome phase_transition() {
  const auto start = Clock::now();
  const std::size_t n = 2000;
  const double p = 0.005;
  const std::size_t k = 60;
  const std::size_t reps = 200;
  spectral::StaticDetectorConfig config;
  config.power.prune = true;
  const auto cal = spectral::calibrate_null(n, p, k, 0.05, 400, 601, config);
  const std::vector<double> multipliers{0.2, 1.0, 10.0, 30.0, 100.0, 300.0, 1000.0};
  std::vector<double> power;
  std::vector<double> tolerance;
  for (std::size_t i = 0; i < multipliers.size(); ++i) {
    const double chi2 = multipliers[i] * std::log(static_cast<double>(n)) / static_cast<double>(k * k);
    const double delta = std::sqrt(chi2 * p * (1.0 - p));
    std::size_t hits = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto inst = generate_planted(n, p, delta, k, derive_seed(602, r));
      hits += spectral::detect_static(inst.graph, k, cal.threshold, config, derive_seed(603, r)).reject ? 1 : 0;
    }
    const auto prop = harness::wilson_interval(hits, reps);
    power.push_back(prop.estimate);
    tolerance.push_back(prop.ci_high - prop.ci_low);
  }
  const auto [big, any] = inversions(power, tolerance);
  const double chi2_10 = 10.0 * std::log(static_cast<double>(n)) / static_cast<double>(k * k);
  const auto bound = info::mixture_chi_square(static_cast<std::int64_t>(n), static_cast<std::int64_t>(k), chi2_10);
  const double elapsed = seconds_since(start);
  const bool ok = power[0] <= 0.15 && power[2] >= 0.90 && big == 0 && any <= 1 && elapsed <= 1200.0;
  std::string curve;
  for (std::size_t i = 0; i < power.size(); ++i)
    curve += (i ? " " : "") + fmt("%g:", multipliers[i]) + fmt("%.3f", power[i]);
  return {ok, fmt("power at 0.2 ln n = %.3f", power[0]) + fmt(", at 10 ln n = %.3f", power[2]) +
                  " (curve " + curve + ")" + fmt(", TV upper bound at 10 ln n = %.3f", bound.tv_upper) +
                  fmt(", %.0f s", elapsed)};
}

Outcome cusum_exactness() {
  std::mt19937_64 gen(77);
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    std::normal_distribution<double> normal(trial == 0 ? -0.1 : (trial == 1 ? 0.0 : 0.05), 1.0);
    std::vector<double> inc(10000);
    for (double& x : inc) x = normal(gen);
    const auto fast = sequential::cusum_path(inc);
    const auto slow = oracle::cusum_definition(inc);
    for (std::size_t t = 0; t < inc.size(); ++t) worst = std::max(worst, std::abs(fast[t] - slow[t]));
  }
  Rng rng(78);
  const int bins = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double x = sequential::poisson_llr_increment(rng.poisson(2.0), 1.0, 1.0, 1.0);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / bins;
  const double se = std::sqrt((sq / bins - mean * mean) / bins);
  const double kl = info::poisson_kl_rate({1.0, 1.0});
  const bool ok = worst <= 1e-12 && std::abs(mean - kl) <= 3.0 * se;
  return {ok, fmt("max |Page - definition| = %.1e", worst) + fmt(", mean H1 increment %.5f", mean) +
                  fmt(" vs KL %.5f", kl) + fmt(" (%.2f sigma)", std::abs(mean - kl) / se)};
}

Outcome delay_law() {
  const auto start = Clock::now();
  sequential::DelayCurveConfig config;
  const double base = temporal::poisson_network_kl_rate(1.0, 1.0, 2).total;
  config.info_rates = {2.0 * base, base, base / 2.0};
  config.alpha = 1e-2;
  config.mu = 1.0;
  config.k = 2;
  config.h = 1.0;
  config.replicates = 500;
  config.seed = 808;
  const auto curve = sequential::delay_curve(config);
  std::vector<double> ratio;
  for (const auto& pt : curve) ratio.push_back(pt.measured.mean / pt.predicted);
  // Grid points ordered by increasing predicted delay.
  const bool decreasing = ratio[0] > ratio[1] && ratio[1] > ratio[2];
  const double anchor = ratio[1];
  const double elapsed = seconds_since(start);
  const bool ok = std::abs(curve[1].delta - 1.0) <= 1e-9 && anchor >= 0.7 && anchor <= 1.6 && decreasing &&
                  elapsed <= 600.0;
  return {ok, fmt("I = %.4f (delta = 1): ", base) + fmt("delay %.3f", curve[1].measured.mean) +
                  fmt(" / predicted %.3f", curve[1].predicted) + fmt(" = %.3f", anchor) +
                  fmt("; ratios over I = 2I0, I0, I0/2: %.3f", ratio[0]) + fmt(", %.3f", ratio[1]) +
                  fmt(", %.3f", ratio[2]) + fmt(", %.0f s", elapsed)};
}

Outcome arl_calibration() {
  sequential::NullModel null_model;
  null_model.model.mu = 1.0;
  null_model.model.delta = 1.0;
  null_model.n = 2;
  null_model.k = 2;
  null_model.oracle_pairs = 1;
  const auto cal = sequential::calibrate_arl(null_model, 100.0, 400, 909);
  const auto fresh = sequential::measure_arl(null_model, cal.threshold, cal.horizon_bins, 400, 910);
  // Same null paths across thresholds.
  std::vector<double> arl;
  for (double b : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0})
    arl.push_back(sequential::measure_arl(null_model, b, 2000, 400, 911).mean);
  const bool monotone = std::is_sorted(arl.begin(), arl.end());
  const bool ok = cal.reached && fresh.mean >= 100.0 && fresh.mean <= 200.0 && monotone;
  return {ok, fmt("b = %.4f", cal.threshold) + fmt(", calibration ARL %.1f", cal.achieved_arl) +
                  fmt(", fresh ARL %.1f", fresh.mean) + fmt(" [%.1f,", fresh.ci_low) + fmt(" %.1f]", fresh.ci_high) +
                  ", ARL(b) " + (monotone ? "monotone" : "NOT monotone")};
}

Outcome robustness() {
  const auto start = Clock::now();
  std::istringstream empty("");
  const auto result = harness::robustness_experiment(harness::RunConfig::parse(empty));
  const auto& rho = result.inflation;
  std::vector<double> values;
  std::vector<double> tol;
  for (std::size_t r = 0; r < rho.rows.size(); ++r) {
    values.push_back(rho.at(r, "rho"));
    tol.push_back(0.0);
  }
  const auto [big, any] = inversions(values, tol);
  bool temporal_ok = true;
  std::string temporal;
  for (std::size_t r = 0; r < result.temporal.rows.size(); ++r) {
    const double got = result.temporal.at(r, "inflation");
    const double want = result.temporal.at(r, "expected_inflation");
    temporal_ok = temporal_ok && std::abs(got / want - 1.0) <= 0.2;
    temporal += (r ? " " : "") + fmt("%.3f/", got) + fmt("%.3f", want);
  }
  std::string rhos;
  for (std::size_t r = 0; r < values.size(); ++r) rhos += (r ? " " : "") + fmt("%.3f", values[r]);
  const bool ok = values.front() == 1.0 && any <= 1 && temporal_ok;
  return {ok, "rho over eps {0, .05, .1, .2}: " + rhos + fmt(" (fitted C = %.2f)", result.fitted_c) +
                  "; delay inflation measured/expected: " + temporal + fmt(", %.0f s", seconds_since(start))};
}

Outcome reproducibility() {
  const auto root = fs::temp_directory_path() / "detect_lab_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream conf(root / "small.conf");
    conf << "[heatmap]\nn = 200\np = 0.05\nk = 10, 20\ndelta = 0.05, 0.3\nreplicates = 20\ncalib_replicates = 50\n"
            "[temporal]\nn = 100, 1000\n[overlay]\nreplicates = 30\ncalib_replicates = 100\n"
            "[delay]\ninfo_rate = 1, 2\nreplicates = 50\ncalib_replicates = 100\n"
            "[robust]\nn = 200\np = 0.05\nk = 10\nepsilons = 0, 0.1\nmultipliers = 20, 80\nreplicates = 20\n"
            "calib_replicates = 50\ntemporal_replicates = 50\narl_replicates = 100\ntarget_arl = 100\n";
  }
  const std::string conf = "--config " + (root / "small.conf").string();
  auto run_all = [&](const fs::path& out) {
    const std::string o = "--out " + out.string() + " --seed 31 ";
    const std::string graph = (out / "graph.txt").string();
    const std::string events = (out / "events.csv").string();
    const std::vector<std::string> commands{
        o + "threshold --n 100000 --k 500 --info-rate 0.1 --alpha 1e-4",
        o + "simulate-static --n 300 --p 0.03 --delta 0.3 --k 12",
        o + "detect-static --graph " + graph + " --k 12 --alpha 0.1 --prune --calib-replicates 50",
        o + "simulate-temporal --n 6 --k 3 --T 40 --tau 10",
        o + "detect-temporal --events " + events + " --mode topm --alpha 0.05 --calib-replicates 100 --path-csv path.csv",
        o + "calibrate --target-arl 50 --replicates 100",
        o + conf + " sweep heatmap",
        o + conf + " sweep temporal",
        o + conf + " sweep delay",
        o + conf + " sweep robustness",
        o + "case-study",
    };
    int failures = 0;
    for (const auto& c : commands) failures += run_cli(c) == 0 ? 0 : 1;
    return failures;
  };
  const int fail_a = run_all(root / "a");
  const int fail_b = run_all(root / "b");
  std::size_t files = 0;
  std::size_t differing = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    const auto other = root / "b" / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++differing;
  }
  const bool ok = fail_a == 0 && fail_b == 0 && differing == 0 && files >= 15;
  fs::remove_all(root);
  return {ok, std::to_string(files) + " output files from 11 invocations, " + std::to_string(differing) +
                  " differ between runs, " + std::to_string(fail_a + fail_b) + " failed invocations"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"case study", case_study},
      {"figure anchors", figure_anchors},
      {"exact-formula suite", exact_formulas},
      {"mixture bound oracle", mixture_oracle},
      {"non-backtracking operator", nb_operator},
      {"static phase transition", phase_transition},
      {"CUSUM exactness and drift", cusum_exactness},
      {"delay law", delay_law},
      {"ARL calibration", arl_calibration},
      {"robustness", robustness},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failed += out.pass ? 0 : 1;
    std::cout << (out.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << ": " << out.detail
              << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
