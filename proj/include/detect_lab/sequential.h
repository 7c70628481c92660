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

#ifndef DETECT_LAB_SEQUENTIAL_H_
#define DETECT_LAB_SEQUENTIAL_H_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "detect_lab/temporal_sim.h"

namespace detect_lab::sequential {

using temporal::EventStream;
using temporal::Pair;

// Event counts on half-open bins [i h, (i+1) h); an event at exactly T lands
// in the last bin. Pairs without events are omitted.
struct BinnedCounts {
  double h = 1.0;
  std::size_t bins = 0;
  std::map<Pair, std::vector<std::uint32_t>> counts;

  std::uint64_t total() const;
};

// ceil(T / h), at least 1.
std::size_t bin_count(double horizon, double h);
BinnedCounts bin_events(const EventStream& stream, double h);

// x ln(1 + delta/mu) - delta h: log-likelihood ratio of one bin count under
// Poisson((mu+delta) h) against Poisson(mu h).
double poisson_llr_increment(std::uint64_t count, double mu, double delta, double h);

// Per-bin log-likelihood ratio of one Hawkes path under the inflated kernel
// (1 + delta_h) g against g, using the exact intensity recursion.
std::vector<double> hawkes_bin_llr(std::span<const double> times, double h, std::size_t bins, double mu,
                                   const temporal::HawkesKernel& kernel, double delta_h);

// Page's CUSUM, g_t = max(0, g_{t-1} + l_t) = max_{s <= t} (A_t - A_s).
// With a window W the maximum is restricted to s >= t - W; W = SIZE_MAX is
// the unlimited recursion.
class Cusum {
 public:
  explicit Cusum(std::optional<std::size_t> window = std::nullopt);

  double update(double increment);
  double value() const { return g_; }
  double cumulative() const { return cumulative_; }
  std::size_t steps() const { return steps_; }
  // Step index s attaining the maximum (the last time g was zero when the
  // window is unlimited).
  std::size_t last_reset() const { return last_reset_; }
  void reset();

 private:
  std::optional<std::size_t> window_;
  double g_ = 0.0;
  double cumulative_ = 0.0;
  std::size_t steps_ = 0;
  std::size_t last_reset_ = 0;
  std::deque<std::pair<std::size_t, double>> minima_;  // increasing (s, A_s)
};

std::vector<double> cusum_path(std::span<const double> increments, std::optional<std::size_t> window = std::nullopt);

enum class ScanMode {
  kOracleSet,  // one CUSUM on the summed LLR over the true support's pairs
  kTopEdges,   // sum of the m = k(k-1) largest per-pair CUSUM values
};

// Sum of the m largest values (all of them if m >= size).
double top_m_sum(std::span<const double> values, std::size_t m);

// Streams per-bin increments of the tracked pairs through the chosen scan.
class ScanTracker {
 public:
  ScanTracker(ScanMode mode, std::size_t tracked_pairs, std::size_t m,
              std::optional<std::size_t> window = std::nullopt);
  double step(std::span<const double> increments);
  double value() const { return value_; }

 private:
  ScanMode mode_;
  std::size_t m_;
  std::vector<Cusum> cusums_;
  std::vector<double> scratch_;
  double value_ = 0.0;
};

// Exhaustive scan max_{|S|=k} G_S(t) over every size-k support; a test
// oracle for n <= 8.
class ExactSupportScan {
 public:
  ExactSupportScan(std::size_t n, std::size_t k, std::optional<std::size_t> window = std::nullopt);
  // pair_increments[i * n + j] is the increment of ordered pair (i, j).
  double update(std::span<const double> pair_increments);
  double value() const { return value_; }
  const std::vector<std::vector<Vertex>>& supports() const { return supports_; }
  std::vector<double> support_values() const;

 private:
  std::size_t n_;
  std::vector<std::vector<Vertex>> supports_;
  std::vector<Cusum> cusums_;
  double value_ = 0.0;
};

// What the detector believes about pre- and post-change intensities.
struct TemporalModel {
  temporal::ProcessKind kind = temporal::ProcessKind::kPoisson;
  double mu = 1.0;
  double delta = 0.0;
  temporal::HawkesKernel kernel;
  double delta_h = 0.0;
  // Hawkes only: Poisson bin LLR at the stationary rates instead of the
  // exact intensity recursion.
  bool poissonized = false;
};

void validate(const TemporalModel& model);

// Closed decision region with an idle CUSUM never alarming: g >= b and g > 0.
constexpr bool crosses(double statistic, double threshold) { return statistic >= threshold && statistic > 0.0; }

struct DetectorConfig {
  TemporalModel model;
  double h = 1.0;
  double threshold = 0.0;
  ScanMode mode = ScanMode::kTopEdges;
  std::size_t k = 2;
  // Oracle support; the stream's planted set when empty.
  std::vector<Vertex> support;
  std::optional<std::size_t> window;
  bool record_path = false;
};

struct AlarmReport {
  std::optional<double> alarm_time;  // (bin index + 1) * h
  std::optional<std::size_t> alarm_bin;
  double threshold = 0.0;
  std::optional<double> change_time;
  std::optional<double> delay;  // alarm_time - tau for alarms at or after tau
  bool false_alarm = false;
  double max_statistic = 0.0;
  std::size_t bins = 0;
  std::vector<double> path;  // G after each bin, if requested (full horizon)
};

// Scan statistic after each bin over the whole stream.
std::vector<double> statistic_path(const EventStream& stream, const DetectorConfig& config);

AlarmReport detect_temporal(const EventStream& stream, const DetectorConfig& config);

// Null data-generating model for calibration; the scan runs on k(k-1)
// internal pairs (oracle mode) or all n(n-1) pairs (top-m mode).
struct NullModel {
  TemporalModel model;
  double h = 1.0;
  ScanMode mode = ScanMode::kOracleSet;
  std::size_t n = 2;
  std::size_t k = 2;
  std::optional<std::size_t> window;
  // Oracle mode only: number of tracked pairs when not k(k-1), e.g. 1 for a
  // single-edge monitor.
  std::optional<std::size_t> oracle_pairs;
};

std::vector<double> simulate_null_statistic_path(const NullModel& null_model, std::size_t bins,
                                                 std::uint64_t seed);

// Record times of a statistic path: (bin, value) at each strict new maximum.
// First crossing of any threshold is read off these records.
using RecordList = std::vector<std::pair<std::size_t, double>>;
RecordList path_records(std::span<const double> path);
// 1-based bin of the first crossing, or horizon when none (censored).
std::size_t first_crossing(const RecordList& records, double threshold, std::size_t horizon);

struct RunLengthSummary {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t censored = 0;
};
RunLengthSummary summarize_run_lengths(std::span<const double> run_lengths, std::size_t censored);

struct ArlTracePoint {
  double threshold = 0.0;
  double arl = 0.0;
};

struct ArlCalibration {
  double threshold = 0.0;
  double achieved_arl = 0.0;  // bins
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t replicates = 0;
  std::size_t horizon_bins = 0;
  std::size_t censored = 0;
  bool reached = false;
  std::vector<ArlTracePoint> trace;  // bisection evaluations, in order
};

// Bisection for the smallest b whose mean null run length (first crossing,
// common random numbers across b) meets target_arl bins. Conservative mode
// requires the lower 95% confidence bound to meet the target instead of the
// point estimate. Null paths run to 10x the target.
ArlCalibration calibrate_arl(const NullModel& null_model, double target_arl, std::size_t replicates,
                             std::uint64_t seed, bool conservative = true);

// Mean null run length at a fixed b, measured on fresh paths.
RunLengthSummary measure_arl(const NullModel& null_model, double threshold, std::size_t horizon_bins,
                             std::size_t replicates, std::uint64_t seed);

// Smallest delta with k(k-1) KL(mu + delta || mu) = info_rate.
double solve_poisson_lift(double mu, std::size_t k, double info_rate);

struct DelayMeasurement {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t replicates = 0;
  std::size_t censored = 0;
  std::size_t false_alarms = 0;
};

// Oracle-set detection delay on post-change Poisson streams (tau = 0) over
// n = k vertices. thin_epsilon > 0 deletes that fraction of events before
// detection; the detector is told the thinned rates.
DelayMeasurement measure_poisson_delay(double mu, double delta, std::size_t k, double h, double threshold,
                                       double thin_epsilon, double horizon, std::size_t replicates,
                                       std::uint64_t seed);

struct DelayCurveConfig {
  std::vector<double> info_rates;
  double alpha = 1e-4;
  double mu = 1.0;
  std::size_t k = 2;
  double h = 1.0;
  std::size_t calibration_replicates = 400;
  std::size_t replicates = 500;
  std::uint64_t seed = 0;
};

struct DelayPoint {
  double info_rate = 0.0;
  double delta = 0.0;
  double threshold = 0.0;
  double achieved_arl = 0.0;
  double predicted = 0.0;  // |ln alpha| / I
  DelayMeasurement measured;
};

std::vector<DelayPoint> delay_curve(const DelayCurveConfig& config);

}  // namespace detect_lab::sequential

#endif  // DETECT_LAB_SEQUENTIAL_H_
