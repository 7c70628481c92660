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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.h"

#include "detect_lab/errors.h"
#include "detect_lab/info_metrics.h"
#include "detect_lab/rng.h"
#include "detect_lab/sequential.h"
#include "detect_lab/temporal_sim.h"

using namespace detect_lab;
using namespace detect_lab::sequential;

namespace {

temporal::EventStream hand_stream(std::vector<double> times, double horizon) {
  temporal::EventStream s;
  s.n = 2;
  s.horizon = horizon;
  s.events[{0, 1}] = std::move(times);
  return s;
}

TemporalModel poisson_model(double mu, double delta) {
  TemporalModel m;
  m.mu = mu;
  m.delta = delta;
  return m;
}

DetectorConfig oracle_config(double mu, double delta, double threshold) {
  DetectorConfig c;
  c.model = poisson_model(mu, delta);
  c.threshold = threshold;
  c.mode = ScanMode::kOracleSet;
  return c;
}

NullModel single_edge_null() {
  NullModel null_model;
  null_model.model = poisson_model(1.0, 1.0);
  null_model.n = 2;
  null_model.k = 2;
  null_model.oracle_pairs = 1;
  return null_model;
}

}  // namespace

TEST_CASE("binning by hand") {
  const auto counts = bin_events(hand_stream({0.1, 0.9, 1.5}, 2.0), 1.0);
  CHECK(counts.bins == 2);
  CHECK(counts.counts.at({0, 1}) == std::vector<std::uint32_t>{2, 1});
  const auto edge = bin_events(hand_stream({0.0, 2.0}, 2.0), 1.0);
  CHECK(edge.counts.at({0, 1}) == std::vector<std::uint32_t>{1, 1});
  const auto empty = bin_events(hand_stream({}, 3.0), 1.0);
  CHECK(empty.total() == 0);
  CHECK(bin_count(2.5, 1.0) == 3);
  CHECK(bin_count(0.0, 1.0) == 1);
}

TEST_CASE("binning conserves events") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = temporal::simulate_poisson_network(7, 0.8, 1.0, 3, 5.0, 33.3, seed);
    for (double h : {0.3, 1.0, 7.0}) CHECK(bin_events(s, h).total() == s.total_events());
  }
}

TEST_CASE("Poisson bin LLR values") {
  CHECK(poisson_llr_increment(0, 1.0, 0.0, 1.0) == 0.0);
  CHECK(poisson_llr_increment(2, 1.0, 1.0, 1.0) == doctest::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-14));
  CHECK(poisson_llr_increment(3, 2.0, 0.5, 0.5) == doctest::Approx(3.0 * std::log(1.25) - 0.25).epsilon(1e-14));
  CHECK_THROWS_AS(poisson_llr_increment(1, 0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(poisson_llr_increment(1, 1.0, 1.0, 0.0), DomainError);
}

TEST_CASE("increment drift equals the per-edge KL rate under H1 and is negative under H0") {
  Rng rng(3);
  const int bins = 100000;
  double sum1 = 0.0;
  double sq1 = 0.0;
  double sum0 = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double x1 = poisson_llr_increment(rng.poisson(2.0), 1.0, 1.0, 1.0);
    sum1 += x1;
    sq1 += x1 * x1;
    sum0 += poisson_llr_increment(rng.poisson(1.0), 1.0, 1.0, 1.0);
  }
  const double mean1 = sum1 / bins;
  const double sd1 = std::sqrt(sq1 / bins - mean1 * mean1);
  const double kl = info::poisson_kl_rate({1.0, 1.0});
  CHECK(std::abs(mean1 - kl) <= 3.0 * sd1 / std::sqrt(static_cast<double>(bins)));
  const double null_drift = -1.0 + std::log(2.0);
  CHECK(null_drift < 0.0);
  CHECK(sum0 / bins == doctest::Approx(null_drift).epsilon(0.02));
}

TEST_CASE("Hawkes bin LLRs add up to the path LLR") {
  const temporal::HawkesKernel kernel{0.5, 1.5};
  const auto times = temporal::simulate_hawkes_path(0.7, kernel, 0.4, 0.0, 80.0, 4);
  const auto per_bin = hawkes_bin_llr(times, 2.0, 40, 0.7, kernel, 0.4);
  double total = 0.0;
  for (double x : per_bin) total += x;
  CHECK(total == doctest::Approx(temporal::hawkes_log_likelihood_ratio(times, 80.0, 0.7, kernel, 0.4)).epsilon(1e-9));
}

TEST_CASE("CUSUM by hand") {
  CHECK(cusum_path(std::vector<double>{1.0, -2.0, 3.0}) == std::vector<double>{1.0, 0.0, 3.0});
  for (double g : cusum_path(std::vector<double>{-1.0, 0.0, -0.5, -3.0})) CHECK(g == 0.0);
  Cusum c;
  c.update(2.0);
  c.update(-5.0);
  CHECK(c.value() == 0.0);
  CHECK(c.last_reset() == 2);
  CHECK(c.cumulative() == -3.0);
}

TEST_CASE("Page recursion equals the max-over-s definition") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal(-0.05, 1.0);
  std::vector<double> inc(10000);
  for (double& x : inc) x = normal(gen);
  const auto fast = cusum_path(inc);
  const auto slow = oracle::cusum_definition(inc);
  double worst = 0.0;
  for (std::size_t t = 0; t < inc.size(); ++t) {
    REQUIRE(fast[t] >= 0.0);
    worst = std::max(worst, std::abs(fast[t] - slow[t]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("window-limited CUSUM equals its definition") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> inc(3000);
  for (double& x : inc) x = normal(gen);
  for (std::size_t w : {1, 5, 40, 500}) {
    const auto fast = cusum_path(inc, w);
    const auto slow = oracle::cusum_definition(inc, w);
    double worst = 0.0;
    for (std::size_t t = 0; t < inc.size(); ++t) worst = std::max(worst, std::abs(fast[t] - slow[t]));
    CHECK(worst <= 1e-9);
  }
  CHECK(cusum_path(inc, std::numeric_limits<std::size_t>::max()) == cusum_path(inc));
  // A finite window longer than the sequence agrees up to rounding.
  const auto wide = cusum_path(inc, 1000000);
  const auto plain = cusum_path(inc);
  for (std::size_t t = 0; t < inc.size(); ++t) CHECK(std::abs(wide[t] - plain[t]) <= 1e-9);
}

TEST_CASE("top-m sums") {
  const std::vector<double> v{0.5, 3.0, 1.0, 2.0};
  CHECK(top_m_sum(v, 2) == 5.0);
  CHECK(top_m_sum(v, 4) == 6.5);
  CHECK(top_m_sum(v, 10) == 6.5);
}

TEST_CASE("single tracked pair: both scan modes give the pair's CUSUM") {
  const std::vector<double> inc{0.3, -0.1, 0.7, -2.0, 0.4};
  const auto want = cusum_path(inc);
  ScanTracker oracle_scan(ScanMode::kOracleSet, 1, 1);
  ScanTracker top(ScanMode::kTopEdges, 1, 2);
  for (std::size_t t = 0; t < inc.size(); ++t) {
    CHECK(oracle_scan.step(std::vector<double>{inc[t]}) == want[t]);
    CHECK(top.step(std::vector<double>{inc[t]}) == want[t]);
  }
}

TEST_CASE("top-m surrogate dominates every support's CUSUM") {
  const std::size_t n = 5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(10, seed));
    ScanTracker top(ScanMode::kTopEdges, n * (n - 1), 2);
    ExactSupportScan exact(n, 2);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> square(n * n, 0.0);
      std::vector<double> flat;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          square[i * n + j] = poisson_llr_increment(rng.poisson(1.2), 1.0, 1.0, 1.0);
          flat.push_back(square[i * n + j]);
        }
      }
      const double t_val = top.step(flat);
      exact.update(square);
      for (double g : exact.support_values()) REQUIRE(t_val >= g - 1e-12);
    }
  }
}

TEST_CASE("ARL calibration argument checks") {
  auto null_model = single_edge_null();
  CHECK_THROWS_AS(calibrate_arl(null_model, 5.0, 200, 1), DomainError);
  CHECK_THROWS_AS(calibrate_arl(null_model, 100.0, 50, 1), DomainError);
}

TEST_CASE("b = 0 alarms at the first positive increment") {
  NullModel null_model;
  null_model.model = poisson_model(1.0, 1.0);
  // Total count over two pairs is Poisson(2); the increment is positive iff
  // the count is at least 3.
  const double p_pos = 1.0 - std::exp(-2.0) * (1.0 + 2.0 + 2.0);
  const auto arl = measure_arl(null_model, 0.0, 1000, 2000, 5);
  CHECK(arl.mean == doctest::Approx(1.0 / p_pos).epsilon(0.08));
}

TEST_CASE("single-edge ARL calibration holds on fresh runs") {
  const auto null_model = single_edge_null();
  const auto cal = calibrate_arl(null_model, 100.0, 400, 11);
  CHECK(cal.reached);
  CHECK(cal.horizon_bins >= 1000);
  const auto fresh = measure_arl(null_model, cal.threshold, cal.horizon_bins, 400, 12);
  CHECK(fresh.mean >= 100.0);
  CHECK(fresh.mean <= 200.0);
  // The bisection trace is monotone once sorted by threshold.
  auto trace = cal.trace;
  std::sort(trace.begin(), trace.end(), [](const auto& a, const auto& b) { return a.threshold < b.threshold; });
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i].arl >= trace[i - 1].arl);
}

TEST_CASE("larger thresholds never alarm earlier") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = temporal::simulate_poisson_network(6, 1.0, 0.8, 3, 20.0, 80.0, derive_seed(13, seed));
    double previous = 0.0;
    for (double b : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
      DetectorConfig config;
      config.model = poisson_model(1.0, 0.8);
      config.threshold = b;
      config.k = 3;
      const auto report = detect_temporal(s, config);
      const double t = report.alarm_time.value_or(std::numeric_limits<double>::infinity());
      CHECK(t >= previous);
      previous = t;
    }
  }
}

TEST_CASE("alarm report bookkeeping") {
  const auto s = temporal::simulate_poisson_network(5, 1.0, 4.0, 3, 30.0, 60.0, 14);
  auto config = oracle_config(1.0, 4.0, 6.0);
  config.record_path = true;
  const auto r = detect_temporal(s, config);
  REQUIRE(r.alarm_time.has_value());
  CHECK(r.change_time == s.change_time);
  CHECK(r.path.size() == r.bins);
  CHECK(r.bins == 60);
  CHECK(*r.alarm_time == static_cast<double>(*r.alarm_bin + 1) * config.h);
  CHECK(r.path[*r.alarm_bin] >= 6.0);
  for (std::size_t b = 0; b < *r.alarm_bin; ++b) CHECK(r.path[b] < 6.0);
  if (*r.alarm_time >= 30.0) {
    CHECK_FALSE(r.false_alarm);
    CHECK(*r.delay == doctest::Approx(*r.alarm_time - 30.0));
  } else {
    CHECK(r.false_alarm);
    CHECK_FALSE(r.delay.has_value());
  }
  const auto path = statistic_path(s, config);
  CHECK(path == r.path);
}

TEST_CASE("null streams rarely alarm within a tenth of the ARL") {
  NullModel null_model;
  null_model.model = poisson_model(1.0, 1.0);
  const auto cal = calibrate_arl(null_model, 100.0, 400, 15);
  auto config = oracle_config(1.0, 1.0, cal.threshold);
  config.support = {0, 1};
  int alarms = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const auto s = temporal::simulate_poisson_network(3, 1.0, 0.0, 0, 0.0, 10.0, derive_seed(16, seed));
    alarms += detect_temporal(s, config).alarm_time.has_value() ? 1 : 0;
  }
  CHECK(alarms / 400.0 <= 0.15);
}

TEST_CASE("oracle-set delay at alpha 1e-2 follows |ln alpha| / I") {
  NullModel null_model;
  null_model.model = poisson_model(1.0, 1.0);
  const auto cal = calibrate_arl(null_model, 100.0, 400, 17);
  const auto d = measure_poisson_delay(1.0, 1.0, 2, 1.0, cal.threshold, 0.0, 200.0, 500, 18);
  const double predicted = info::expected_delay(1e-2, temporal::poisson_network_kl_rate(1.0, 1.0, 2).total);
  CHECK(d.censored == 0);
  CHECK(d.mean / predicted >= 0.7);
  CHECK(d.mean / predicted <= 1.6);
}

TEST_CASE("Poisson lift solver inverts the aggregated KL rate") {
  for (double target : {0.1, 0.7726, 3.0}) {
    const double delta = solve_poisson_lift(1.0, 2, target);
    CHECK(2.0 * info::poisson_kl_rate({1.0, delta}) == doctest::Approx(target).epsilon(1e-10));
  }
  CHECK(solve_poisson_lift(1.0, 2, 2.0 * (2.0 * std::log(2.0) - 1.0)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("delay curve predictions and measured ratios") {
  DelayCurveConfig config;
  config.info_rates = {1.0, 0.5, 0.25};
  config.alpha = 1e-4;
  config.seed = 19;
  const auto curve = delay_curve(config);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].predicted == doctest::Approx(9.2103).epsilon(1e-5));
  CHECK(curve[1].predicted == doctest::Approx(2.0 * curve[0].predicted).epsilon(1e-14));
  for (const auto& pt : curve) {
    const double ratio = pt.measured.mean / pt.predicted;
    INFO("I=" << pt.info_rate << " ratio=" << ratio);
    CHECK(ratio >= 0.7);
    CHECK(ratio <= 1.6);
  }
}

TEST_CASE("temporal model validation") {
  TemporalModel bad;
  bad.mu = -1.0;
  CHECK_THROWS_AS(validate(bad), DomainError);
  TemporalModel unstable;
  unstable.kind = temporal::ProcessKind::kHawkes;
  unstable.kernel = {0.7, 1.0};
  unstable.delta_h = 0.5;
  CHECK_THROWS_AS(validate(unstable), DomainError);
}
