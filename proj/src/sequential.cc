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

#include "detect_lab/sequential.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "detect_lab/errors.h"
#include "detect_lab/info_metrics.h"
#include "detect_lab/parallel.h"
#include "detect_lab/rng.h"

namespace detect_lab::sequential {
namespace {

using temporal::ProcessKind;

std::size_t bin_of(double t, double h, std::size_t bins) {
  const auto idx = static_cast<std::size_t>(std::floor(t / h));
  return std::min(idx, bins - 1);
}

// Stationary mean rates used by the Poisson-ized Hawkes LLR.
std::pair<double, double> stationary_rates(const TemporalModel& m) {
  return {m.mu / (1.0 - m.kernel.a), m.mu / (1.0 - (1.0 + m.delta_h) * m.kernel.a)};
}

std::vector<double> count_llr(std::span<const std::uint32_t> counts, double rate0, double rate1, double h) {
  std::vector<double> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    out[i] = poisson_llr_increment(counts[i], rate0, rate1 - rate0, h);
  return out;
}

std::vector<std::uint32_t> bin_times(std::span<const double> times, double h, std::size_t bins) {
  std::vector<std::uint32_t> counts(bins, 0);
  for (double t : times) ++counts[bin_of(t, h, bins)];
  return counts;
}

// Per-bin increments of one pair given its event times.
std::vector<double> pair_increments(std::span<const double> times, const TemporalModel& model, double h,
                                    std::size_t bins) {
  if (model.kind == ProcessKind::kPoisson) {
    return count_llr(bin_times(times, h, bins), model.mu, model.mu + model.delta, h);
  }
  if (model.poissonized) {
    auto [r0, r1] = stationary_rates(model);
    return count_llr(bin_times(times, h, bins), r0, r1, h);
  }
  return hawkes_bin_llr(times, h, bins, model.mu, model.kernel, model.delta_h);
}

std::vector<Pair> internal_pairs(std::span<const Vertex> support) {
  std::vector<Pair> out;
  for (Vertex i : support)
    for (Vertex j : support)
      if (i != j) out.emplace_back(i, j);
  return out;
}

}  // namespace

std::uint64_t BinnedCounts::total() const {
  std::uint64_t sum = 0;
  for (const auto& [pair, c] : counts) sum = std::accumulate(c.begin(), c.end(), sum);
  return sum;
}

std::size_t bin_count(double horizon, double h) {
  require(h > 0.0, "bin width must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(horizon / h - 1e-12)));
}

BinnedCounts bin_events(const EventStream& stream, double h) {
  BinnedCounts out;
  out.h = h;
  out.bins = bin_count(stream.horizon, h);
  for (const auto& [pair, times] : stream.events) out.counts.emplace(pair, bin_times(times, h, out.bins));
  return out;
}

double poisson_llr_increment(std::uint64_t count, double mu, double delta, double h) {
  require(mu > 0.0, "mu must be positive");
  require(delta >= 0.0, "delta must be nonnegative");
  require(h > 0.0, "bin width must be positive");
  if (count == 0) return -delta * h;
  return static_cast<double>(count) * std::log1p(delta / mu) - delta * h;
}

std::vector<double> hawkes_bin_llr(std::span<const double> times, double h, std::size_t bins, double mu,
                                   const temporal::HawkesKernel& kernel, double delta_h) {
  std::vector<double> out(bins, 0.0);
  temporal::HawkesIntensity intensity(mu, kernel);
  const double inflated = 1.0 + delta_h;
  const double compensator_scale = delta_h * kernel.a / kernel.beta;
  auto integrate_to = [&](double t, std::size_t bin) {
    const double dt = t - intensity.time();
    if (dt > 0.0) out[bin] -= compensator_scale * intensity.excitation() * (1.0 - std::exp(-kernel.beta * dt));
    intensity.advance_to(t);
  };
  std::size_t next = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    while (next < times.size() && bin_of(times[next], h, bins) == b) {
      integrate_to(times[next], b);
      out[b] += std::log(intensity.value(inflated) / intensity.value(1.0));
      intensity.add_event();
      ++next;
    }
    integrate_to(std::max(static_cast<double>(b + 1) * h, intensity.time()), b);
  }
  return out;
}

Cusum::Cusum(std::optional<std::size_t> window) : window_(window) {
  // An infinite window is the plain recursion.
  if (window_ == std::numeric_limits<std::size_t>::max()) window_.reset();
  if (window_) minima_.emplace_back(0, 0.0);
}

void Cusum::reset() {
  g_ = 0.0;
  cumulative_ = 0.0;
  steps_ = 0;
  last_reset_ = 0;
  minima_.clear();
  if (window_) minima_.emplace_back(0, 0.0);
}

double Cusum::update(double increment) {
  ++steps_;
  cumulative_ += increment;
  if (!window_) {
    g_ = std::max(0.0, g_ + increment);
    if (g_ == 0.0) last_reset_ = steps_;
    return g_;
  }
  // g = A_t - min_{t-W <= s <= t} A_s via a monotone deque of prefix minima.
  while (!minima_.empty() && minima_.back().second >= cumulative_) minima_.pop_back();
  minima_.emplace_back(steps_, cumulative_);
  const std::size_t earliest = steps_ > *window_ ? steps_ - *window_ : 0;
  while (minima_.front().first < earliest) minima_.pop_front();
  last_reset_ = minima_.front().first;
  g_ = cumulative_ - minima_.front().second;
  return g_;
}

std::vector<double> cusum_path(std::span<const double> increments, std::optional<std::size_t> window) {
  Cusum cusum(window);
  std::vector<double> out;
  out.reserve(increments.size());
  for (double x : increments) out.push_back(cusum.update(x));
  return out;
}

double top_m_sum(std::span<const double> values, std::size_t m) {
  if (m >= values.size()) return std::accumulate(values.begin(), values.end(), 0.0);
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end(), std::greater<>());
  // Sum in descending order so equal multisets give bit-identical totals.
  std::sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), std::greater<>());
  return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
}

ScanTracker::ScanTracker(ScanMode mode, std::size_t tracked_pairs, std::size_t m, std::optional<std::size_t> window)
    : mode_(mode), m_(m), cusums_(mode == ScanMode::kOracleSet ? 1 : tracked_pairs, Cusum(window)) {
  scratch_.resize(cusums_.size());
}

double ScanTracker::step(std::span<const double> increments) {
  if (mode_ == ScanMode::kOracleSet) {
    value_ = cusums_.front().update(std::accumulate(increments.begin(), increments.end(), 0.0));
    return value_;
  }
  for (std::size_t i = 0; i < cusums_.size(); ++i) scratch_[i] = cusums_[i].update(increments[i]);
  value_ = top_m_sum(scratch_, m_);
  return value_;
}

ExactSupportScan::ExactSupportScan(std::size_t n, std::size_t k, std::optional<std::size_t> window) : n_(n) {
  require(n <= 8, "exhaustive support scan is limited to n <= 8");
  require(k >= 2 && k <= n, "k must satisfy 2 <= k <= n");
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    std::vector<Vertex> s;
    for (Vertex v = 0; v < n; ++v)
      if (mask & (1u << v)) s.push_back(v);
    supports_.push_back(std::move(s));
  }
  cusums_.assign(supports_.size(), Cusum(window));
}

double ExactSupportScan::update(std::span<const double> pair_increments) {
  value_ = 0.0;
  for (std::size_t s = 0; s < supports_.size(); ++s) {
    double sum = 0.0;
    for (Vertex i : supports_[s])
      for (Vertex j : supports_[s])
        if (i != j) sum += pair_increments[i * n_ + j];
    value_ = std::max(value_, cusums_[s].update(sum));
  }
  return value_;
}

std::vector<double> ExactSupportScan::support_values() const {
  std::vector<double> out;
  for (const auto& c : cusums_) out.push_back(c.value());
  return out;
}

void validate(const TemporalModel& model) {
  require(model.mu > 0.0, "mu must be positive");
  if (model.kind == ProcessKind::kPoisson) {
    require(model.delta >= 0.0, "delta must be nonnegative");
  } else {
    require(model.kernel.beta > 0.0, "kernel decay beta must be positive");
    require(model.kernel.a >= 0.0 && model.kernel.a < 1.0, "Hawkes kernel unstable: need 0 <= a < 1");
    require(model.delta_h >= 0.0, "kernel inflation must be nonnegative");
    require((1.0 + model.delta_h) * model.kernel.a < 1.0, "inflated Hawkes kernel unstable");
  }
}

std::vector<double> statistic_path(const EventStream& stream, const DetectorConfig& config) {
  validate(config.model);
  require(config.h > 0.0, "bin width must be positive");
  const std::size_t bins = bin_count(stream.horizon, config.h);

  std::vector<std::vector<double>> increments;
  if (config.mode == ScanMode::kOracleSet) {
    const auto& support = config.support.empty() ? stream.planted : config.support;
    require(support.size() >= 2, "oracle-set scan needs a support of size >= 2");
    for (const auto& pair : internal_pairs(support)) {
      auto it = stream.events.find(pair);
      std::span<const double> times;
      if (it != stream.events.end()) times = it->second;
      increments.push_back(pair_increments(times, config.model, config.h, bins));
    }
  } else {
    require(config.k >= 2, "top-m scan needs k >= 2");
    // Pairs without events have a nonpositive LLR every bin, so their CUSUM
    // stays at zero and they can be left out of the top-m sum.
    for (const auto& [pair, times] : stream.events)
      increments.push_back(pair_increments(times, config.model, config.h, bins));
  }

  const std::size_t m = config.k * (config.k - 1);
  ScanTracker tracker(config.mode, increments.size(), m, config.window);
  std::vector<double> column(increments.size());
  std::vector<double> path(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t p = 0; p < increments.size(); ++p) column[p] = increments[p][b];
    path[b] = tracker.step(column);
  }
  return path;
}

AlarmReport detect_temporal(const EventStream& stream, const DetectorConfig& config) {
  auto path = statistic_path(stream, config);
  AlarmReport report;
  report.threshold = config.threshold;
  report.change_time = stream.change_time;
  report.bins = path.size();
  for (std::size_t b = 0; b < path.size(); ++b) {
    report.max_statistic = std::max(report.max_statistic, path[b]);
    if (!report.alarm_bin && crosses(path[b], config.threshold)) {
      report.alarm_bin = b;
      report.alarm_time = static_cast<double>(b + 1) * config.h;
    }
  }
  if (report.alarm_time) {
    if (stream.change_time && *report.alarm_time >= *stream.change_time) {
      report.delay = *report.alarm_time - *stream.change_time;
    } else {
      report.false_alarm = true;
    }
  }
  if (config.record_path) report.path = std::move(path);
  return report;
}

std::vector<double> simulate_null_statistic_path(const NullModel& null_model, std::size_t bins,
                                                 std::uint64_t seed) {
  const auto& model = null_model.model;
  validate(model);
  require(null_model.k >= 2 && null_model.k <= null_model.n, "null model needs 2 <= k <= n");
  const double h = null_model.h;
  const std::size_t m = null_model.mode == ScanMode::kOracleSet && null_model.oracle_pairs
                            ? *null_model.oracle_pairs
                            : null_model.k * (null_model.k - 1);
  require(m >= 1, "null model tracks no pairs");
  const std::size_t pairs = null_model.mode == ScanMode::kOracleSet ? m : null_model.n * (null_model.n - 1);
  std::vector<double> path(bins);
  Rng rng(seed);

  if (model.kind == ProcessKind::kPoisson && null_model.mode == ScanMode::kOracleSet) {
    // The summed LLR only depends on the total count over the support.
    Cusum cusum(null_model.window);
    const double log_ratio = std::log1p(model.delta / model.mu);
    const double drift = static_cast<double>(m) * model.delta * h;
    for (std::size_t b = 0; b < bins; ++b) {
      const auto x = rng.poisson(static_cast<double>(m) * model.mu * h);
      path[b] = cusum.update(static_cast<double>(x) * log_ratio - drift);
    }
    return path;
  }

  ScanTracker tracker(null_model.mode, pairs, m, null_model.window);
  if (model.kind == ProcessKind::kPoisson) {
    std::vector<double> column(pairs);
    for (std::size_t b = 0; b < bins; ++b) {
      for (double& c : column) c = poisson_llr_increment(rng.poisson(model.mu * h), model.mu, model.delta, h);
      path[b] = tracker.step(column);
    }
    return path;
  }

  std::vector<std::vector<double>> increments(pairs);
  const double horizon = static_cast<double>(bins) * h;
  for (std::size_t p = 0; p < pairs; ++p) {
    auto times = temporal::simulate_hawkes_path(model.mu, model.kernel, 0.0,
                                                std::numeric_limits<double>::infinity(), horizon,
                                                derive_seed(seed, p));
    increments[p] = pair_increments(times, model, h, bins);
  }
  std::vector<double> column(pairs);
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t p = 0; p < pairs; ++p) column[p] = increments[p][b];
    path[b] = tracker.step(column);
  }
  return path;
}

RecordList path_records(std::span<const double> path) {
  RecordList out;
  double best = 0.0;
  for (std::size_t b = 0; b < path.size(); ++b) {
    if (path[b] > best) {
      best = path[b];
      out.emplace_back(b, best);
    }
  }
  return out;
}

std::size_t first_crossing(const RecordList& records, double threshold, std::size_t horizon) {
  auto it = std::lower_bound(records.begin(), records.end(), threshold,
                             [](const auto& rec, double b) { return rec.second < b; });
  return it == records.end() ? horizon : it->first + 1;
}

RunLengthSummary summarize_run_lengths(std::span<const double> run_lengths, std::size_t censored) {
  RunLengthSummary s;
  s.censored = censored;
  const double count = static_cast<double>(run_lengths.size());
  if (run_lengths.empty()) return s;
  s.mean = std::accumulate(run_lengths.begin(), run_lengths.end(), 0.0) / count;
  double var = 0.0;
  for (double v : run_lengths) var += (v - s.mean) * (v - s.mean);
  var = run_lengths.size() > 1 ? var / (count - 1.0) : 0.0;
  const double half = 1.96 * std::sqrt(var / count);
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  return s;
}

namespace {

RunLengthSummary evaluate_threshold(const std::vector<RecordList>& records, double threshold, std::size_t horizon) {
  std::vector<double> lengths;
  lengths.reserve(records.size());
  std::size_t censored = 0;
  for (const auto& rec : records) {
    const auto rl = first_crossing(rec, threshold, horizon);
    if (rl == horizon && (rec.empty() || rec.back().second < threshold)) ++censored;
    lengths.push_back(static_cast<double>(rl));
  }
  return summarize_run_lengths(lengths, censored);
}

}  // namespace

ArlCalibration calibrate_arl(const NullModel& null_model, double target_arl, std::size_t replicates,
                             std::uint64_t seed, bool conservative) {
  require(target_arl >= 10.0, "target ARL must be at least 10 bins");
  require(replicates >= 100, "ARL calibration needs at least 100 replicates");
  ArlCalibration out;
  out.replicates = replicates;
  out.horizon_bins = static_cast<std::size_t>(std::ceil(10.0 * target_arl));
  auto records = parallel_map(replicates, [&](std::size_t r) {
    return path_records(simulate_null_statistic_path(null_model, out.horizon_bins, derive_seed(seed, r)));
  });

  // Run lengths only change at record values, so the smallest admissible b
  // is one of them (or 0).
  std::vector<double> candidates{0.0};
  for (const auto& rec : records)
    for (const auto& [bin, value] : rec) candidates.push_back(value);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  // Just above every record: no crossing anywhere, all runs censored.
  candidates.push_back(std::nextafter(candidates.back(), std::numeric_limits<double>::infinity()));

  auto admissible = [&](std::size_t idx) {
    auto s = evaluate_threshold(records, candidates[idx], out.horizon_bins);
    out.trace.push_back({candidates[idx], s.mean});
    return (conservative ? s.ci_low : s.mean) >= target_arl;
  };
  std::size_t lo = 0;
  std::size_t hi = candidates.size() - 1;
  if (!admissible(hi)) {
    out.reached = false;
  } else {
    out.reached = true;
    if (admissible(lo)) {
      hi = lo;
    } else {
      while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (admissible(mid) ? hi : lo) = mid;
      }
    }
  }
  out.threshold = candidates[hi];
  auto s = evaluate_threshold(records, out.threshold, out.horizon_bins);
  out.achieved_arl = s.mean;
  out.ci_low = s.ci_low;
  out.ci_high = s.ci_high;
  out.censored = s.censored;
  return out;
}

RunLengthSummary measure_arl(const NullModel& null_model, double threshold, std::size_t horizon_bins,
                             std::size_t replicates, std::uint64_t seed) {
  auto records = parallel_map(replicates, [&](std::size_t r) {
    return path_records(simulate_null_statistic_path(null_model, horizon_bins, derive_seed(seed, r)));
  });
  return evaluate_threshold(records, threshold, horizon_bins);
}

double solve_poisson_lift(double mu, std::size_t k, double info_rate) {
  require(mu > 0.0, "mu must be positive");
  require(k >= 2, "k must be at least 2");
  require(info_rate > 0.0, "information rate must be positive");
  const double pairs = static_cast<double>(k * (k - 1));
  auto rate = [&](double d) { return pairs * info::poisson_kl_rate({mu, d}); };
  double hi = mu;
  while (rate(hi) < info_rate) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) < info_rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

DelayMeasurement measure_poisson_delay(double mu, double delta, std::size_t k, double h, double threshold,
                                       double thin_epsilon, double horizon, std::size_t replicates,
                                       std::uint64_t seed) {
  require(replicates >= 1, "at least one replicate is required");
  DetectorConfig config;
  config.model.mu = mu * (1.0 - thin_epsilon);
  config.model.delta = delta * (1.0 - thin_epsilon);
  config.h = h;
  config.threshold = threshold;
  config.mode = ScanMode::kOracleSet;
  config.k = k;
  struct Outcome {
    double delay = 0.0;
    int censored = 0;
    int false_alarm = 0;
  };
  auto outcomes = parallel_map(replicates, [&](std::size_t r) {
    auto stream = temporal::simulate_poisson_network(k, mu, delta, k, 0.0, horizon, derive_seed(seed, r));
    if (thin_epsilon > 0.0) stream = temporal::thin_events(stream, thin_epsilon, derive_seed(seed, r, 1));
    auto report = detect_temporal(stream, config);
    Outcome o;
    if (!report.alarm_time) {
      o.delay = horizon;
      o.censored = 1;
    } else {
      o.delay = report.delay.value_or(0.0);
      o.false_alarm = report.false_alarm ? 1 : 0;
    }
    return o;
  });
  std::vector<double> delays;
  DelayMeasurement out;
  out.replicates = replicates;
  for (const auto& o : outcomes) {
    delays.push_back(o.delay);
    out.censored += static_cast<std::size_t>(o.censored);
    out.false_alarms += static_cast<std::size_t>(o.false_alarm);
  }
  auto s = summarize_run_lengths(delays, out.censored);
  out.mean = s.mean;
  out.ci_low = s.ci_low;
  out.ci_high = s.ci_high;
  return out;
}

std::vector<DelayPoint> delay_curve(const DelayCurveConfig& config) {
  require(config.alpha > 0.0 && config.alpha < 1.0, "alpha must lie in (0,1)");
  std::vector<DelayPoint> out;
  for (std::size_t i = 0; i < config.info_rates.size(); ++i) {
    DelayPoint pt;
    pt.info_rate = config.info_rates[i];
    pt.delta = solve_poisson_lift(config.mu, config.k, pt.info_rate);
    pt.predicted = info::expected_delay(config.alpha, pt.info_rate);

    NullModel null_model;
    null_model.model.mu = config.mu;
    null_model.model.delta = pt.delta;
    null_model.h = config.h;
    null_model.mode = ScanMode::kOracleSet;
    null_model.n = config.k;
    null_model.k = config.k;
    auto calibration = calibrate_arl(null_model, 1.0 / config.alpha, config.calibration_replicates,
                                     derive_seed(config.seed, i, 0));
    pt.threshold = calibration.threshold;
    pt.achieved_arl = calibration.achieved_arl;
    const double horizon = config.h * std::ceil(std::max(10.0 * pt.predicted + 20.0 * config.h, 50.0 * config.h) / config.h);
    pt.measured = measure_poisson_delay(config.mu, pt.delta, config.k, config.h, pt.threshold, 0.0, horizon,
                                        config.replicates, derive_seed(config.seed, i, 1));
    out.push_back(pt);
  }
  return out;
}

}  // namespace detect_lab::sequential
