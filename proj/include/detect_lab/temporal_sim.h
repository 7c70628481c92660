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

#ifndef DETECT_LAB_TEMPORAL_SIM_H_
#define DETECT_LAB_TEMPORAL_SIM_H_

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "detect_lab/graph.h"

namespace detect_lab::temporal {

// Ordered pair (src, dst), src != dst.
using Pair = std::pair<Vertex, Vertex>;

// Exponential excitation g(t) = a * beta * exp(-beta t); a = ||g||_1.
struct HawkesKernel {
  double a = 0.0;
  double beta = 1.0;
};

enum class ProcessKind { kPoisson, kHawkes };

struct StreamParams {
  ProcessKind kind = ProcessKind::kPoisson;
  double mu = 0.0;
  double delta = 0.0;  // Poisson rate lift
  HawkesKernel kernel;
  double delta_h = 0.0;  // Hawkes kernel inflation, g -> (1 + delta_h) g
  std::size_t k = 0;
  std::uint64_t seed = 0;
};

// Per-pair sorted timestamps on [0, horizon]. Only pairs with at least one
// event are stored.
struct EventStream {
  std::size_t n = 0;
  double horizon = 0.0;
  std::optional<double> change_time;
  std::vector<Vertex> planted;  // sorted
  StreamParams params;
  std::map<Pair, std::vector<double>> events;

  std::size_t total_events() const;
  bool is_internal(const Pair& pair) const;
};

// Throws DomainError if any stream invariant is violated.
void validate(const EventStream& stream);

// Homogeneous Poisson(mu) on every ordered pair over [0, T]; pairs inside a
// uniformly drawn size-k set carry mu + delta on [tau, T].
EventStream simulate_poisson_network(std::size_t n, double mu, double delta, std::size_t k, double tau,
                                     double horizon, std::uint64_t seed);

// Independent univariate Hawkes processes per ordered pair, simulated by
// Ogata thinning. Inside the planted set the kernel becomes (1 + delta_h) g
// from tau on. Throws DomainError unless a < 1 and (1 + delta_h) a < 1.
EventStream simulate_hawkes_network(std::size_t n, double mu, const HawkesKernel& kernel, double delta_h,
                                    std::size_t k, double tau, double horizon, std::uint64_t seed);

// One Hawkes path on [0, horizon]; the kernel multiplier switches from 1 to
// (1 + delta_h) at switch_time (pass +inf for no switch). Ogata thinning with
// the exact exponential-decay recursion.
std::vector<double> simulate_hawkes_path(double mu, const HawkesKernel& kernel, double delta_h, double switch_time,
                                         double horizon, std::uint64_t seed);

// Exponential-kernel intensity lambda(t) = mu + m * a * E(t) tracked in O(1)
// per step, with E(t) = sum_{t_i < t} beta exp(-beta (t - t_i)).
class HawkesIntensity {
 public:
  HawkesIntensity(double mu, const HawkesKernel& kernel) : mu_(mu), kernel_(kernel) {}

  // Decays the excitation to time t >= current time.
  void advance_to(double t);
  // Registers an event at the current time.
  void add_event() { excitation_ += kernel_.beta; }
  double value(double multiplier = 1.0) const { return mu_ + multiplier * kernel_.a * excitation_; }
  double excitation() const { return excitation_; }
  double time() const { return time_; }

 private:
  double mu_;
  HawkesKernel kernel_;
  double excitation_ = 0.0;
  double time_ = 0.0;
};

// Direct O(history) evaluation of lambda(t), counting events strictly before t.
double hawkes_intensity_direct(std::span<const double> history, double t, double mu, const HawkesKernel& kernel,
                               double multiplier = 1.0);

// Log-likelihood ratio of one path under the inflated kernel (from
// switch_time on) against the baseline kernel.
double hawkes_log_likelihood_ratio(std::span<const double> times, double horizon, double mu,
                                   const HawkesKernel& kernel, double delta_h, double switch_time = 0.0);

struct KlRateEstimate {
  double total = 0.0;       // aggregated over k(k-1) internal ordered pairs
  double per_edge = 0.0;
  double half_width = 0.0;  // 95% half-width of total; 0 for closed forms
  std::size_t replicates = 0;
};

// Closed form k(k-1) [(mu+delta) ln(1+delta/mu) - delta].
KlRateEstimate poisson_network_kl_rate(double mu, double delta, std::size_t k);

// Monte Carlo mean of LLR / T over simulated post-change paths.
KlRateEstimate estimate_hawkes_kl_rate(double mu, const HawkesKernel& kernel, double delta_h, std::size_t k,
                                       double horizon, std::size_t replicates, std::uint64_t seed);

// Independently deletes each event with probability epsilon.
EventStream thin_events(const EventStream& stream, double epsilon, std::uint64_t seed);

// CSV "src,dst,t" sorted by t (ties by pair), and a JSON metadata sidecar.
void write_events_csv(std::ostream& out, const EventStream& stream);
void write_metadata_json(std::ostream& out, const EventStream& stream);
// Throws ConfigError on malformed input.
EventStream read_event_stream(std::istream& csv, std::istream& metadata_json);

}  // namespace detect_lab::temporal

#endif  // DETECT_LAB_TEMPORAL_SIM_H_
