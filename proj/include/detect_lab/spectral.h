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

#ifndef DETECT_LAB_SPECTRAL_H_
#define DETECT_LAB_SPECTRAL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "detect_lab/graph.h"

namespace detect_lab::spectral {

using EdgeId = std::size_t;

// Directed edges of an undirected graph, two per undirected edge. Edge ids
// coincide with CSR positions: id e in [offsets[u], offsets[u+1]) is the
// directed edge u -> adjacency[e].
class DirectedEdgeIndex {
 public:
  explicit DirectedEdgeIndex(const Graph& g);

  std::size_t size() const { return head_.size(); }
  std::size_t num_vertices() const { return offsets_.size() - 1; }
  Vertex tail(EdgeId e) const { return tail_[e]; }
  Vertex head(EdgeId e) const { return head_[e]; }
  EdgeId reverse(EdgeId e) const { return reverse_[e]; }
  // Ids of the edges leaving v; their reverses are the edges entering v.
  EdgeId out_begin(Vertex v) const { return offsets_[v]; }
  EdgeId out_end(Vertex v) const { return offsets_[v + 1]; }
  std::size_t degree(Vertex v) const { return offsets_[v + 1] - offsets_[v]; }
  // Throws std::out_of_range if (u, v) is not an edge.
  EdgeId id(Vertex u, Vertex v) const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Vertex> tail_;
  std::vector<Vertex> head_;
  std::vector<EdgeId> reverse_;
};

// Matrix-free non-backtracking operator, B[(u->v),(v->w)] = 1 iff w != u.
// apply() costs O(m): (Bx)[u->v] = sum_{w in N(v)} x[v->w] - x[v->u].
class NbOperator {
 public:
  // Throws DomainError on a graph without edges.
  explicit NbOperator(const Graph& g);

  const DirectedEdgeIndex& index() const { return index_; }
  std::size_t dimension() const { return index_.size(); }

  void apply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> apply(std::span<const double> x) const;

  // Per-vertex sum of x over incoming edges.
  void incoming_sums(std::span<const double> x, std::span<double> scores) const;

 private:
  DirectedEdgeIndex index_;
};

enum class StartVector { kRandomSigns, kDegree };

struct PowerIterationOptions {
  int max_iters = 100;
  double tol = 1e-8;
  bool prune = false;
  int prune_warmup = 5;
  bool degree_normalize = false;
  StartVector start = StartVector::kRandomSigns;
  std::uint64_t seed = 0;
};

struct PowerIterationResult {
  std::vector<double> vertex_scores;  // l2-normalized incoming-edge sums
  double leading_value = 0.0;         // Rayleigh quotient of the last iterate
  int iterations = 0;
  bool converged = false;
};

// x <- Bx / |Bx|, optionally zeroing mass on edges whose head is outside the
// current top-k vertex set (after the warm-up). Vertex scores are formed from
// each product before pruning.
PowerIterationResult nb_power_iteration(const NbOperator& op, std::size_t k,
                                        const PowerIterationOptions& options);

// Indices of the k largest |scores|, ties to the lower id, in rank order.
std::vector<Vertex> top_k_vertices(std::span<const double> scores, std::size_t k);

// max_{|S|=k} ||P_S u||^2, attained by the k largest-magnitude entries.
double localized_energy_statistic(std::span<const double> scores, std::size_t k);

// Average branching sqrt(<d(d-1)> / <d>); 1 for an edgeless graph.
double default_bethe_r(const Graph& g);

// y = ((r^2 - 1) I - r A + D) x.
void bethe_hessian_apply(const Graph& g, double r, std::span<const double> x, std::span<double> y);

struct BetheOptions {
  int krylov_dim = 80;
  int max_restarts = 30;
  double tol = 1e-8;
  std::uint64_t seed = 0;
};

struct BetheHessianResult {
  double r = 0.0;
  double smallest_eigenvalue = 0.0;
  std::vector<double> vertex_scores;  // |eigenvector|, l2-normalized
  int iterations = 0;                 // operator applications
  bool converged = false;
};

// Smallest eigenpair of the Bethe-Hessian by restarted Lanczos with full
// reorthogonalization.
BetheHessianResult bethe_hessian_statistic(const Graph& g, std::optional<double> r = std::nullopt,
                                           const BetheOptions& options = {});

enum class ScoreMethod { kNonBacktracking, kBetheHessian };

struct StaticDetectorConfig {
  ScoreMethod method = ScoreMethod::kNonBacktracking;
  PowerIterationOptions power;
  BetheOptions bethe;
  std::optional<double> bethe_r;
};

struct StatisticResult {
  double statistic = 0.0;
  std::vector<double> vertex_scores;
  double leading_value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Score source (NB power iteration or Bethe-Hessian) followed by the
// localized-energy statistic. The seed overrides the start-vector seeds in
// config. Edgeless graphs yield statistic 0.
StatisticResult compute_static_statistic(const Graph& g, std::size_t k, const StaticDetectorConfig& config,
                                         std::uint64_t seed);

struct NullCalibration {
  double threshold = 0.0;
  std::vector<double> null_statistics;  // replicate order
  bool underpowered = false;            // replicates < ceil(10 / alpha)
};

// Order statistic ceil(level * R) (1-based) of the sample.
double upper_order_statistic(std::vector<double> values, double level);

// Empirical (1 - alpha) quantile of the statistic over fresh ER(n, p) graphs.
NullCalibration calibrate_null(std::size_t n, double p, std::size_t k, double alpha, std::size_t replicates,
                               std::uint64_t seed, const StaticDetectorConfig& config = {});

struct SpectralVerdict {
  double statistic = 0.0;
  double threshold = 0.0;
  bool reject = false;
  std::vector<Vertex> candidate_set;  // sorted
  int iterations_used = 0;
  bool converged = false;
};

SpectralVerdict detect_static(const Graph& g, std::size_t k, double threshold,
                              const StaticDetectorConfig& config, std::uint64_t seed);

// Calibrates against ER(n, p_hat) with p_hat = m / C(n, 2) first.
SpectralVerdict detect_static_calibrated(const Graph& g, std::size_t k, double alpha, std::size_t replicates,
                                         const StaticDetectorConfig& config, std::uint64_t seed);

}  // namespace detect_lab::spectral

#endif  // DETECT_LAB_SPECTRAL_H_
