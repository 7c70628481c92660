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

#include "detect_lab/info_metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "detect_lab/errors.h"

namespace detect_lab::info {
namespace {

void check_bernoulli(const BernoulliShift& s) {
  require(s.p > 0.0 && s.p < 1.0, "baseline edge probability must lie in (0,1)");
  const double q = s.p + s.delta;
  require(q >= 0.0 && q <= 1.0, "p + delta must lie in [0,1]");
}

double log_choose(std::int64_t n, std::int64_t r) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(r) + 1.0) -
         std::lgamma(static_cast<double>(n - r) + 1.0);
}

}  // namespace

double chi_square_bernoulli(const BernoulliShift& shift) {
  check_bernoulli(shift);
  return shift.delta * shift.delta / (shift.p * (1.0 - shift.p));
}

double poisson_kl_rate(const PoissonShift& shift) {
  require(shift.mu > 0.0, "baseline rate mu must be positive");
  require(shift.delta >= 0.0, "rate lift delta must be nonnegative");
  if (shift.delta == 0.0) return 0.0;
  const double x = shift.delta / shift.mu;
  // mu * [(1+x) ln(1+x) - x]; the bracket is evaluated by series near 0 where
  // the two terms cancel.
  double bracket;
  if (x < 1e-3) {
    bracket = x * x / 2.0 - x * x * x / 6.0 + x * x * x * x / 12.0 - x * x * x * x * x / 20.0;
  } else {
    bracket = (1.0 + x) * std::log1p(x) - x;
  }
  return shift.mu * bracket;
}

DeltaMin delta_min(std::int64_t n, double p, std::int64_t k) {
  require(n >= 2, "n must be at least 2");
  require(k >= 2 && k <= n, "k must satisfy 2 <= k <= n");
  require(p > 0.0 && p < 1.0, "p must lie in (0,1)");
  DeltaMin out;
  out.value = std::sqrt(p * (1.0 - p) * std::log(static_cast<double>(n))) / static_cast<double>(k);
  if (p + out.value > 1.0) {
    out.value = 1.0 - p;
    out.clamped = true;
  }
  return out;
}

double sparse_lift_threshold(std::int64_t n, double c, std::int64_t k) {
  require(n >= 2, "n must be at least 2");
  require(k >= 2, "k must be at least 2");
  require(c > 0.0, "mean-degree parameter c must be positive");
  const double nd = static_cast<double>(n);
  return std::sqrt(c * nd * std::log(nd)) / static_cast<double>(k);
}

double required_horizon(std::int64_t n, double info_rate) {
  require(n >= 2, "n must be at least 2");
  require(info_rate > 0.0, "information rate must be positive");
  return std::log(static_cast<double>(n)) / info_rate;
}

double expected_delay(double alpha, double info_rate) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
  require(info_rate > 0.0, "information rate must be positive");
  return std::abs(std::log(alpha)) / info_rate;
}

double overlap_log_pmf(std::int64_t n, std::int64_t k, std::int64_t r) {
  if (r < 0 || r > k || k - r > n - k) return -std::numeric_limits<double>::infinity();
  return log_choose(k, r) + log_choose(n - k, k - r) - log_choose(n, k);
}

MixtureBound mixture_chi_square(std::int64_t n, std::int64_t k, double chi2_edge) {
  require(k >= 2 && k <= n, "k must satisfy 2 <= k <= n");
  require(chi2_edge >= 0.0, "per-edge chi-square must be nonnegative");
  MixtureBound out{.n = n, .k = k, .chi2_edge = chi2_edge};

  // sum_r pmf(r) * ((1+chi2)^C(r,2) - 1); expm1 keeps small bounds accurate.
  const double log_base = std::log1p(chi2_edge);
  double total = 0.0;
  for (std::int64_t r = 2; r <= k; ++r) {
    const double log_pmf = overlap_log_pmf(n, k, r);
    if (!std::isfinite(log_pmf)) continue;
    const double exponent = log_base * static_cast<double>(r * (r - 1) / 2);
    if (exponent + log_pmf > 700.0) {
      out.overflow = true;
      break;
    }
    total += std::exp(log_pmf) * std::expm1(exponent);
  }
  if (out.overflow || !std::isfinite(total)) {
    out.overflow = true;
    out.chi2_mixture = std::numeric_limits<double>::infinity();
  } else {
    out.chi2_mixture = std::max(0.0, total);
  }
  out.vacuous = !(out.chi2_mixture <= 2.0);
  out.tv_upper = out.vacuous ? 1.0 : std::sqrt(out.chi2_mixture / 2.0);
  return out;
}

double search_penalty(std::int64_t n, std::int64_t k, PenaltyMode mode) {
  require(n >= 2, "n must be at least 2");
  const double nd = static_cast<double>(n);
  switch (mode) {
    case PenaltyMode::kLogN:
      return std::log(nd);
    case PenaltyMode::kLogBinomial:
      require(k >= 1 && k <= n, "k must satisfy 1 <= k <= n");
      return static_cast<double>(k) * std::log(nd / static_cast<double>(k));
  }
  return std::log(nd);
}

InfoBudget info_budget_static(std::int64_t n, std::int64_t k, const BernoulliShift& shift,
                              PenaltyMode mode) {
  require(k >= 2 && k <= n, "k must satisfy 2 <= k <= n");
  const double kd = static_cast<double>(k);
  InfoBudget b;
  b.accumulated = kd * kd * chi_square_bernoulli(shift);
  b.penalty = search_penalty(n, k, mode);
  b.margin = b.accumulated - b.penalty;
  return b;
}

InfoBudget info_budget_temporal(std::int64_t n, double horizon, double info_rate) {
  require(horizon >= 0.0, "horizon must be nonnegative");
  require(info_rate >= 0.0, "information rate must be nonnegative");
  InfoBudget b;
  b.accumulated = horizon * info_rate;
  b.penalty = search_penalty(n, 0, PenaltyMode::kLogN);
  b.margin = b.accumulated - b.penalty;
  return b;
}

}  // namespace detect_lab::info
