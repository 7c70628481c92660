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

#include "detect_lab/spectral.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "detect_lab/errors.h"
#include "detect_lab/graph_sim.h"
#include "detect_lab/parallel.h"
#include "detect_lab/rng.h"

namespace detect_lab::spectral {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void scale(std::span<double> a, double f) {
  for (double& v : a) v *= f;
}

void normalize(std::span<double> a) {
  const double nrm = norm(a);
  if (nrm > 0.0) scale(a, 1.0 / nrm);
}

}  // namespace

DirectedEdgeIndex::DirectedEdgeIndex(const Graph& g)
    : offsets_(g.offsets().begin(), g.offsets().end()),
      tail_(g.adjacency().size()),
      head_(g.adjacency().begin(), g.adjacency().end()),
      reverse_(g.adjacency().size()) {
  for (Vertex u = 0; u < num_vertices(); ++u)
    for (EdgeId e = offsets_[u]; e < offsets_[u + 1]; ++e) tail_[e] = u;
  for (EdgeId e = 0; e < head_.size(); ++e) reverse_[e] = id(head_[e], tail_[e]);
}

EdgeId DirectedEdgeIndex::id(Vertex u, Vertex v) const {
  if (u >= num_vertices()) throw std::out_of_range("vertex out of range");
  auto first = head_.begin() + static_cast<std::ptrdiff_t>(offsets_[u]);
  auto last = head_.begin() + static_cast<std::ptrdiff_t>(offsets_[u + 1]);
  auto it = std::lower_bound(first, last, v);
  if (it == last || *it != v) throw std::out_of_range("not an edge");
  return static_cast<EdgeId>(it - head_.begin());
}

NbOperator::NbOperator(const Graph& g) : index_(g) {
  require(g.num_edges() >= 1, "non-backtracking operator needs at least one edge");
}

void NbOperator::apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = index_.num_vertices();
  std::vector<double> out_mass(n, 0.0);
  for (Vertex v = 0; v < n; ++v) {
    double s = 0.0;
    for (EdgeId e = index_.out_begin(v); e < index_.out_end(v); ++e) s += x[e];
    out_mass[v] = s;
  }
  for (EdgeId e = 0; e < index_.size(); ++e) y[e] = out_mass[index_.head(e)] - x[index_.reverse(e)];
}

std::vector<double> NbOperator::apply(std::span<const double> x) const {
  std::vector<double> y(dimension());
  apply(x, y);
  return y;
}

void NbOperator::incoming_sums(std::span<const double> x, std::span<double> scores) const {
  std::fill(scores.begin(), scores.end(), 0.0);
  for (EdgeId e = 0; e < index_.size(); ++e) scores[index_.head(e)] += x[e];
}

std::vector<Vertex> top_k_vertices(std::span<const double> scores, std::size_t k) {
  std::vector<Vertex> order(scores.size());
  std::iota(order.begin(), order.end(), Vertex{0});
  k = std::min(k, order.size());
  auto by_magnitude = [&](Vertex a, Vertex b) {
    const double ma = std::abs(scores[a]);
    const double mb = std::abs(scores[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), by_magnitude);
  order.resize(k);
  return order;
}

double localized_energy_statistic(std::span<const double> scores, std::size_t k) {
  double energy = 0.0;
  for (Vertex v : top_k_vertices(scores, k)) energy += scores[v] * scores[v];
  return energy;
}

PowerIterationResult nb_power_iteration(const NbOperator& op, std::size_t k,
                                        const PowerIterationOptions& options) {
  const auto& index = op.index();
  const std::size_t n = index.num_vertices();
  require(k <= n, "k must not exceed the vertex count");
  require(options.max_iters >= 1, "max_iters must be at least 1");
  require(options.tol > 0.0, "tol must be positive");

  const std::size_t dim = op.dimension();
  std::vector<double> x(dim);
  if (options.start == StartVector::kDegree) {
    for (EdgeId e = 0; e < dim; ++e) x[e] = static_cast<double>(index.degree(index.head(e)));
  } else {
    Rng rng(derive_seed(options.seed, 0x5eed));
    for (double& v : x) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
  }
  normalize(x);

  std::vector<double> inv_sqrt_degree;
  if (options.degree_normalize) {
    inv_sqrt_degree.resize(n);
    for (Vertex v = 0; v < n; ++v)
      inv_sqrt_degree[v] = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(index.degree(v), 1)));
  }

  PowerIterationResult result;
  result.vertex_scores.assign(n, 0.0);
  std::vector<double> y(dim);
  std::vector<char> keep(n);
  for (int it = 1; it <= options.max_iters; ++it) {
    result.iterations = it;
    op.apply(x, y);
    result.leading_value = dot(x, y);
    const double ny = norm(y);
    if (ny == 0.0) {
      // Nilpotent on this start (forest): no surviving non-backtracking walks.
      std::fill(result.vertex_scores.begin(), result.vertex_scores.end(), 0.0);
      result.leading_value = 0.0;
      result.converged = true;
      return result;
    }
    scale(y, 1.0 / ny);

    op.incoming_sums(y, result.vertex_scores);
    if (options.degree_normalize)
      for (Vertex v = 0; v < n; ++v) result.vertex_scores[v] *= inv_sqrt_degree[v];

    if (options.prune && it > options.prune_warmup) {
      std::fill(keep.begin(), keep.end(), 0);
      for (Vertex v : top_k_vertices(result.vertex_scores, k)) keep[v] = 1;
      for (EdgeId e = 0; e < dim; ++e)
        if (!keep[index.head(e)]) y[e] = 0.0;
      normalize(y);
    }

    double diff2 = 0.0;
    for (EdgeId e = 0; e < dim; ++e) diff2 += (y[e] - x[e]) * (y[e] - x[e]);
    std::swap(x, y);
    if (std::sqrt(diff2) <= options.tol) {
      result.converged = true;
      break;
    }
  }
  normalize(result.vertex_scores);
  return result;
}

double default_bethe_r(const Graph& g) {
  double sum_d = 0.0;
  double sum_dd = 0.0;
  for (Vertex v = 0; v < g.num_vertices(); ++v) {
    const double d = static_cast<double>(g.degree(v));
    sum_d += d;
    sum_dd += d * (d - 1.0);
  }
  if (sum_d == 0.0 || sum_dd <= 0.0) return 1.0;
  return std::sqrt(sum_dd / sum_d);
}

void bethe_hessian_apply(const Graph& g, double r, std::span<const double> x, std::span<double> y) {
  const double diag = r * r - 1.0;
  for (Vertex v = 0; v < g.num_vertices(); ++v) {
    double adj = 0.0;
    for (Vertex w : g.neighbors(v)) adj += x[w];
    y[v] = (diag + static_cast<double>(g.degree(v))) * x[v] - r * adj;
  }
}

BetheHessianResult bethe_hessian_statistic(const Graph& g, std::optional<double> r,
                                           const BetheOptions& options) {
  const std::size_t n = g.num_vertices();
  require(n >= 1, "graph must have at least one vertex");
  require(options.krylov_dim >= 2, "krylov_dim must be at least 2");
  BetheHessianResult out;
  out.r = r.value_or(default_bethe_r(g));
  auto apply = [&](std::span<const double> x, std::span<double> y) {
    bethe_hessian_apply(g, out.r, x, y);
    ++out.iterations;
  };

  Rng rng(derive_seed(options.seed, 0xbe7e));
  std::vector<double> start(n);
  for (double& v : start) v = rng.uniform() - 0.5;
  normalize(start);

  const std::size_t m_max = std::min<std::size_t>(static_cast<std::size_t>(options.krylov_dim), n);
  std::vector<std::vector<double>> basis;
  std::vector<double> w(n);
  for (int restart = 0; restart <= options.max_restarts; ++restart) {
    basis.assign(1, start);
    std::vector<double> alpha;
    std::vector<double> beta;  // beta[j] couples basis[j] and basis[j+1]
    double residual_beta = 0.0;
    for (std::size_t j = 0; j < m_max; ++j) {
      apply(basis[j], w);
      alpha.push_back(dot(w, basis[j]));
      // Full reorthogonalization, applied twice for stability.
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis) {
          const double c = dot(w, q);
          for (std::size_t i = 0; i < n; ++i) w[i] -= c * q[i];
        }
      const double b = norm(w);
      residual_beta = b;
      if (j + 1 == m_max || b <= 1e-12 * std::max(1.0, std::abs(alpha.back()))) break;
      beta.push_back(b);
      basis.emplace_back(w);
      scale(basis.back(), 1.0 / b);
    }
    const std::size_t m = alpha.size();
    Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(m));
    Eigen::VectorXd sub(static_cast<Eigen::Index>(m > 0 ? m - 1 : 0));
    for (std::size_t j = 0; j + 1 < m; ++j) sub[static_cast<Eigen::Index>(j)] = beta[j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    const double theta = tri.eigenvalues()[0];
    Eigen::VectorXd s = tri.eigenvectors().col(0);

    std::vector<double> ritz(n, 0.0);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < n; ++i) ritz[i] += s[static_cast<Eigen::Index>(j)] * basis[j][i];
    normalize(ritz);

    out.smallest_eigenvalue = theta;
    const double residual = std::abs(residual_beta * s[static_cast<Eigen::Index>(m - 1)]);
    start = ritz;
    if (residual <= options.tol * std::max(1.0, std::abs(theta))) {
      out.converged = true;
      break;
    }
  }
  out.vertex_scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.vertex_scores[i] = std::abs(start[i]);
  return out;
}

StatisticResult compute_static_statistic(const Graph& g, std::size_t k, const StaticDetectorConfig& config,
                                         std::uint64_t seed) {
  require(k >= 1 && k <= g.num_vertices(), "k must satisfy 1 <= k <= n");
  StatisticResult out;
  if (config.method == ScoreMethod::kBetheHessian) {
    BetheOptions bethe = config.bethe;
    bethe.seed = seed;
    auto bh = bethe_hessian_statistic(g, config.bethe_r, bethe);
    out.vertex_scores = std::move(bh.vertex_scores);
    out.leading_value = bh.smallest_eigenvalue;
    out.iterations = bh.iterations;
    out.converged = bh.converged;
  } else if (g.num_edges() == 0) {
    out.vertex_scores.assign(g.num_vertices(), 0.0);
    out.converged = true;
  } else {
    NbOperator op(g);
    PowerIterationOptions power = config.power;
    power.seed = seed;
    auto pi = nb_power_iteration(op, k, power);
    out.vertex_scores = std::move(pi.vertex_scores);
    out.leading_value = pi.leading_value;
    out.iterations = pi.iterations;
    out.converged = pi.converged;
  }
  out.statistic = localized_energy_statistic(out.vertex_scores, k);
  return out;
}

double upper_order_statistic(std::vector<double> values, double level) {
  require(!values.empty(), "empty sample");
  require(level > 0.0 && level <= 1.0, "quantile level must lie in (0,1]");
  const auto count = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(level * static_cast<double>(count) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, count);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

NullCalibration calibrate_null(std::size_t n, double p, std::size_t k, double alpha, std::size_t replicates,
                               std::uint64_t seed, const StaticDetectorConfig& config) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
  require(replicates >= 1, "at least one replicate is required");
  NullCalibration out;
  out.underpowered = static_cast<double>(replicates) < std::ceil(10.0 / alpha);
  out.null_statistics = parallel_map(replicates, [&](std::size_t r) {
    Graph g = generate_er(n, p, derive_seed(seed, r, 0));
    return compute_static_statistic(g, k, config, derive_seed(seed, r, 1)).statistic;
  });
  out.threshold = upper_order_statistic(out.null_statistics, 1.0 - alpha);
  return out;
}

SpectralVerdict detect_static(const Graph& g, std::size_t k, double threshold,
                              const StaticDetectorConfig& config, std::uint64_t seed) {
  auto stat = compute_static_statistic(g, k, config, seed);
  SpectralVerdict v;
  v.statistic = stat.statistic;
  v.threshold = threshold;
  v.reject = stat.statistic > threshold;
  v.candidate_set = top_k_vertices(stat.vertex_scores, k);
  std::sort(v.candidate_set.begin(), v.candidate_set.end());
  v.iterations_used = stat.iterations;
  v.converged = stat.converged;
  return v;
}

SpectralVerdict detect_static_calibrated(const Graph& g, std::size_t k, double alpha, std::size_t replicates,
                                         const StaticDetectorConfig& config, std::uint64_t seed) {
  const double n = static_cast<double>(g.num_vertices());
  require(n >= 2, "graph must have at least two vertices");
  const double p_hat = static_cast<double>(g.num_edges()) / (n * (n - 1.0) / 2.0);
  auto calibration = calibrate_null(g.num_vertices(), p_hat, k, alpha, replicates, derive_seed(seed, 0xca1), config);
  return detect_static(g, k, calibration.threshold, config, seed);
}

}  // namespace detect_lab::spectral
