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

#include "detect_lab/temporal_sim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <tuple>

#include "json.hpp"

#include "detect_lab/errors.h"
#include "detect_lab/graph_sim.h"
#include "detect_lab/info_metrics.h"
#include "detect_lab/parallel.h"
#include "detect_lab/rng.h"
#include "detect_lab/text_format.h"

namespace detect_lab::temporal {
namespace {

constexpr std::uint64_t kSubsetTag = 0x5e7;
constexpr std::uint64_t kThinTag = 0x7a1;

std::vector<double> uniform_times(std::size_t count, double lo, double hi, Rng& rng) {
  std::vector<double> out(count);
  for (double& t : out) t = lo + (hi - lo) * rng.uniform();
  std::sort(out.begin(), out.end());
  return out;
}

void check_common(std::size_t n, std::size_t k, double tau, double horizon) {
  require(n >= 1, "n must be at least 1");
  require(k <= n, "k must not exceed n");
  require(k != 1, "planted set size must be 0 or at least 2");
  require(horizon >= 0.0, "horizon must be nonnegative");
  require(tau >= 0.0 && tau <= horizon, "change time must lie in [0, T]");
}

template <typename PairSim>
EventStream simulate_network(std::size_t n, std::size_t k, double tau, double horizon, std::uint64_t seed,
                             StreamParams params, PairSim&& simulate_pair) {
  EventStream stream;
  stream.n = n;
  stream.horizon = horizon;
  stream.params = params;
  if (k >= 2) {
    stream.planted = sample_subset(n, k, derive_seed(seed, kSubsetTag));
    stream.change_time = tau;
  }
  std::vector<Pair> pairs;
  pairs.reserve(n * (n - 1));
  for (Vertex i = 0; i < n; ++i)
    for (Vertex j = 0; j < n; ++j)
      if (i != j) pairs.emplace_back(i, j);
  auto paths = parallel_map(pairs.size(), [&](std::size_t idx) {
    const auto& pr = pairs[idx];
    return simulate_pair(stream.is_internal(pr), derive_seed(seed, pr.first, pr.second));
  });
  for (std::size_t idx = 0; idx < pairs.size(); ++idx)
    if (!paths[idx].empty()) stream.events.emplace(pairs[idx], std::move(paths[idx]));
  return stream;
}

}  // namespace

std::size_t EventStream::total_events() const {
  std::size_t total = 0;
  for (const auto& [pair, times] : events) total += times.size();
  return total;
}

bool EventStream::is_internal(const Pair& pair) const {
  return std::binary_search(planted.begin(), planted.end(), pair.first) &&
         std::binary_search(planted.begin(), planted.end(), pair.second);
}

void validate(const EventStream& stream) {
  for (const auto& [pair, times] : stream.events) {
    require(pair.first != pair.second, "event on a self pair");
    require(pair.first < stream.n && pair.second < stream.n, "pair endpoint out of range");
    require(std::is_sorted(times.begin(), times.end()), "timestamps not sorted");
    for (double t : times) require(t >= 0.0 && t <= stream.horizon, "timestamp outside [0, T]");
  }
  if (stream.change_time) {
    require(*stream.change_time >= 0.0 && *stream.change_time <= stream.horizon, "change time outside [0, T]");
  }
}

EventStream simulate_poisson_network(std::size_t n, double mu, double delta, std::size_t k, double tau,
                                     double horizon, std::uint64_t seed) {
  check_common(n, k, tau, horizon);
  require(mu > 0.0, "mu must be positive");
  require(delta >= 0.0, "delta must be nonnegative");
  StreamParams params;
  params.mu = mu;
  params.delta = delta;
  params.k = k;
  params.seed = seed;
  return simulate_network(n, k, tau, horizon, seed, params, [&](bool internal, std::uint64_t pair_seed) {
    Rng rng(pair_seed);
    auto times = uniform_times(rng.poisson(mu * horizon), 0.0, horizon, rng);
    if (internal && delta > 0.0) {
      // Superposition: the lift is an independent Poisson(delta) on [tau, T].
      auto extra = uniform_times(rng.poisson(delta * (horizon - tau)), tau, horizon, rng);
      std::vector<double> merged;
      merged.reserve(times.size() + extra.size());
      std::merge(times.begin(), times.end(), extra.begin(), extra.end(), std::back_inserter(merged));
      times = std::move(merged);
    }
    return times;
  });
}

void HawkesIntensity::advance_to(double t) {
  excitation_ *= std::exp(-kernel_.beta * (t - time_));
  time_ = t;
}

double hawkes_intensity_direct(std::span<const double> history, double t, double mu, const HawkesKernel& kernel,
                               double multiplier) {
  double sum = 0.0;
  for (double ti : history) {
    if (ti >= t) break;
    sum += kernel.beta * std::exp(-kernel.beta * (t - ti));
  }
  return mu + multiplier * kernel.a * sum;
}

std::vector<double> simulate_hawkes_path(double mu, const HawkesKernel& kernel, double delta_h, double switch_time,
                                         double horizon, std::uint64_t seed) {
  Rng rng(seed);
  HawkesIntensity intensity(mu, kernel);
  const double inflated = 1.0 + delta_h;
  auto multiplier = [&](double t) { return t >= switch_time ? inflated : 1.0; };
  std::vector<double> times;
  double t = 0.0;
  while (true) {
    // Between events the intensity only decays, so its current value bounds
    // it until the next event or the kernel switch.
    const double bound = intensity.value(multiplier(t));
    const double candidate = t + rng.exponential(bound);
    if (t < switch_time && candidate >= switch_time && switch_time <= horizon) {
      t = switch_time;
      intensity.advance_to(t);
      continue;
    }
    if (candidate > horizon) break;
    t = candidate;
    intensity.advance_to(t);
    if (rng.uniform() * bound <= intensity.value(multiplier(t))) {
      times.push_back(t);
      intensity.add_event();
    }
  }
  return times;
}

EventStream simulate_hawkes_network(std::size_t n, double mu, const HawkesKernel& kernel, double delta_h,
                                    std::size_t k, double tau, double horizon, std::uint64_t seed) {
  check_common(n, k, tau, horizon);
  require(mu > 0.0, "mu must be positive");
  require(kernel.beta > 0.0, "kernel decay beta must be positive");
  require(kernel.a >= 0.0 && kernel.a < 1.0, "Hawkes kernel unstable: need 0 <= a < 1");
  require(delta_h >= 0.0, "kernel inflation must be nonnegative");
  require((1.0 + delta_h) * kernel.a < 1.0, "inflated Hawkes kernel unstable: need (1 + delta_h) a < 1");
  StreamParams params{.kind = ProcessKind::kHawkes, .mu = mu, .kernel = kernel, .delta_h = delta_h, .k = k,
                      .seed = seed};
  constexpr double kNever = std::numeric_limits<double>::infinity();
  return simulate_network(n, k, tau, horizon, seed, params, [&](bool internal, std::uint64_t pair_seed) {
    return simulate_hawkes_path(mu, kernel, delta_h, internal ? tau : kNever, horizon, pair_seed);
  });
}

double hawkes_log_likelihood_ratio(std::span<const double> times, double horizon, double mu,
                                   const HawkesKernel& kernel, double delta_h, double switch_time) {
  // log L1 - log L0 with lambda_m(t) = mu + m a E(t):
  //   sum_{t_i >= switch} log(lambda_1(t_i) / lambda_0(t_i)) - delta_h a int_switch^T E(t) dt.
  HawkesIntensity intensity(mu, kernel);
  const double inflated = 1.0 + delta_h;
  double llr = 0.0;
  double integral = 0.0;  // int E dt over [switch_time, current time]
  auto accumulate_to = [&](double t) {
    const double from = std::max(intensity.time(), switch_time);
    if (t > from) {
      // E decays from its value at `from` with no events in between.
      const double e_from = intensity.excitation() * std::exp(-kernel.beta * (from - intensity.time()));
      integral += e_from * (1.0 - std::exp(-kernel.beta * (t - from))) / kernel.beta;
    }
    intensity.advance_to(t);
  };
  for (double t : times) {
    accumulate_to(t);
    if (t >= switch_time) llr += std::log(intensity.value(inflated) / intensity.value(1.0));
    intensity.add_event();
  }
  accumulate_to(horizon);
  return llr - delta_h * kernel.a * integral;
}

KlRateEstimate poisson_network_kl_rate(double mu, double delta, std::size_t k) {
  KlRateEstimate out;
  out.per_edge = info::poisson_kl_rate({mu, delta});
  out.total = static_cast<double>(info::ordered_internal_pairs(static_cast<std::int64_t>(k))) * out.per_edge;
  return out;
}

KlRateEstimate estimate_hawkes_kl_rate(double mu, const HawkesKernel& kernel, double delta_h, std::size_t k,
                                       double horizon, std::size_t replicates, std::uint64_t seed) {
  require(mu > 0.0, "mu must be positive");
  require(kernel.a >= 0.0 && (1.0 + delta_h) * kernel.a < 1.0, "Hawkes kernel unstable");
  require(horizon > 0.0, "horizon must be positive");
  require(replicates >= 2, "at least two replicates are required");
  require(k >= 2, "k must be at least 2");
  auto rates = parallel_map(replicates, [&](std::size_t r) {
    auto times = simulate_hawkes_path(mu, kernel, delta_h, 0.0, horizon, derive_seed(seed, r));
    return hawkes_log_likelihood_ratio(times, horizon, mu, kernel, delta_h, 0.0) / horizon;
  });
  double mean = 0.0;
  for (double v : rates) mean += v;
  mean /= static_cast<double>(replicates);
  double var = 0.0;
  for (double v : rates) var += (v - mean) * (v - mean);
  var /= static_cast<double>(replicates - 1);
  const double pairs = static_cast<double>(k * (k - 1));
  KlRateEstimate out;
  out.per_edge = mean;
  out.total = pairs * mean;
  out.half_width = pairs * 1.96 * std::sqrt(var / static_cast<double>(replicates));
  out.replicates = replicates;
  return out;
}

EventStream thin_events(const EventStream& stream, double epsilon, std::uint64_t seed) {
  require(epsilon >= 0.0 && epsilon < 1.0, "epsilon must lie in [0,1)");
  EventStream out = stream;
  out.events.clear();
  for (const auto& [pair, times] : stream.events) {
    Rng rng(derive_seed(seed, kThinTag, pair.first, pair.second));
    std::vector<double> kept;
    for (double t : times)
      if (!rng.bernoulli(epsilon)) kept.push_back(t);
    if (!kept.empty()) out.events.emplace(pair, std::move(kept));
  }
  return out;
}

void write_events_csv(std::ostream& out, const EventStream& stream) {
  std::vector<std::tuple<double, Vertex, Vertex>> rows;
  rows.reserve(stream.total_events());
  for (const auto& [pair, times] : stream.events)
    for (double t : times) rows.emplace_back(t, pair.first, pair.second);
  std::sort(rows.begin(), rows.end());
  out << "src,dst,t\n";
  for (const auto& [t, src, dst] : rows) out << src << ',' << dst << ',' << format_double(t) << '\n';
}

void write_metadata_json(std::ostream& out, const EventStream& stream) {
  nlohmann::ordered_json j;
  j["n"] = stream.n;
  j["T"] = stream.horizon;
  j["tau"] = stream.change_time ? nlohmann::ordered_json(*stream.change_time) : nlohmann::ordered_json(nullptr);
  j["S"] = stream.planted;
  const auto& p = stream.params;
  j["params"] = {{"process", p.kind == ProcessKind::kHawkes ? "hawkes" : "poisson"},
                 {"mu", p.mu},
                 {"delta", p.delta},
                 {"a", p.kernel.a},
                 {"beta", p.kernel.beta},
                 {"delta_h", p.delta_h},
                 {"k", p.k},
                 {"seed", p.seed}};
  out << j.dump(2) << '\n';
}

EventStream read_event_stream(std::istream& csv, std::istream& metadata_json) {
  EventStream stream;
  try {
    auto j = nlohmann::json::parse(metadata_json);
    stream.n = j.at("n").get<std::size_t>();
    stream.horizon = j.at("T").get<double>();
    if (!j.at("tau").is_null()) stream.change_time = j.at("tau").get<double>();
    stream.planted = j.at("S").get<std::vector<Vertex>>();
    std::sort(stream.planted.begin(), stream.planted.end());
    const auto& p = j.at("params");
    stream.params.kind = p.at("process").get<std::string>() == "hawkes" ? ProcessKind::kHawkes : ProcessKind::kPoisson;
    stream.params.mu = p.at("mu").get<double>();
    stream.params.delta = p.at("delta").get<double>();
    stream.params.kernel = {p.at("a").get<double>(), p.at("beta").get<double>()};
    stream.params.delta_h = p.at("delta_h").get<double>();
    stream.params.k = p.at("k").get<std::size_t>();
    stream.params.seed = p.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("event metadata: ") + e.what());
  }

  std::string line;
  if (!std::getline(csv, line) || line != "src,dst,t") throw ConfigError("event file: expected header src,dst,t");
  std::size_t row = 1;
  while (std::getline(csv, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string a, b, c;
    if (!std::getline(in, a, ',') || !std::getline(in, b, ',') || !std::getline(in, c)) {
      throw ConfigError("event file: malformed row " + std::to_string(row));
    }
    try {
      const auto src = static_cast<Vertex>(std::stoul(a));
      const auto dst = static_cast<Vertex>(std::stoul(b));
      stream.events[{src, dst}].push_back(std::stod(c));
    } catch (const std::exception&) {
      throw ConfigError("event file: malformed row " + std::to_string(row));
    }
  }
  for (auto& [pair, times] : stream.events) std::sort(times.begin(), times.end());
  try {
    validate(stream);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("event file: ") + e.what());
  }
  return stream;
}

}  // namespace detect_lab::temporal
