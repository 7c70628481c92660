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

#ifndef DETECT_LAB_INFO_METRICS_H_
#define DETECT_LAB_INFO_METRICS_H_

#include <cstdint>

// Closed-form divergences, detectability thresholds and the second-moment
// lower bound for the planted-subgraph and point-process change models.
// All logarithms are natural.

namespace detect_lab::info {

// Edge law Bern(p) under the null and Bern(p + delta) inside the planted set.
struct BernoulliShift {
  double p = 0.0;
  double delta = 0.0;
};

// Poisson rate mu under the null and mu + delta after the change.
struct PoissonShift {
  double mu = 0.0;
  double delta = 0.0;
};

enum class PenaltyMode {
  kLogN,         // ln n
  kLogBinomial,  // k ln(n/k), the union-bound size of the support search
};

// Accumulated information against the log-size of the search.
struct InfoBudget {
  double accumulated = 0.0;
  double penalty = 0.0;
  double margin = 0.0;  // accumulated - penalty
};

struct MixtureBound {
  std::int64_t n = 0;
  std::int64_t k = 0;
  double chi2_edge = 0.0;
  double chi2_mixture = 0.0;
  double tv_upper = 0.0;
  bool vacuous = false;   // chi2_mixture > 2, tv_upper capped at 1
  bool overflow = false;  // second moment not representable; chi2 = +inf
};

struct DeltaMin {
  double value = 0.0;
  bool clamped = false;  // p + value would have exceeded 1
};

// chi^2(Bern(p+delta) || Bern(p)) = delta^2 / (p (1-p)).
double chi_square_bernoulli(const BernoulliShift& shift);

// KL(Poisson(mu+delta) || Poisson(mu)) per unit time.
double poisson_kl_rate(const PoissonShift& shift);

// Smallest lift with k^2 chi^2 = ln n, i.e. sqrt(p(1-p) ln n) / k.
DeltaMin delta_min(std::int64_t n, double p, std::int64_t k);

// Minimal d under p = c/n, delta = d/n: sqrt(c n ln n) / k.
double sparse_lift_threshold(std::int64_t n, double c, std::int64_t k);

// ln(n) / info_rate.
double required_horizon(std::int64_t n, double info_rate);

// |ln alpha| / info_rate.
double expected_delay(double alpha, double info_rate);

// Exact chi^2(P1 || P0) for the uniform mixture over size-k supports:
// E_r[(1 + chi2_edge)^(r(r-1)/2)] - 1 with r ~ Hypergeometric(n, k, k).
MixtureBound mixture_chi_square(std::int64_t n, std::int64_t k, double chi2_edge);

// Hypergeometric overlap pmf P(|S cap S'| = r) for two independent uniform
// size-k subsets of an n-set; r = 0..k.
double overlap_log_pmf(std::int64_t n, std::int64_t k, std::int64_t r);

double search_penalty(std::int64_t n, std::int64_t k, PenaltyMode mode);

InfoBudget info_budget_static(std::int64_t n, std::int64_t k, const BernoulliShift& shift,
                              PenaltyMode mode = PenaltyMode::kLogN);

InfoBudget info_budget_temporal(std::int64_t n, double horizon, double info_rate);

// Number of ordered internal pairs of a size-k set, k (k - 1).
constexpr std::int64_t ordered_internal_pairs(std::int64_t k) { return k * (k - 1); }

}  // namespace detect_lab::info

#endif  // DETECT_LAB_INFO_METRICS_H_
