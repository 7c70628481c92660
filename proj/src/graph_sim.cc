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

#include "detect_lab/graph_sim.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "detect_lab/errors.h"
#include "detect_lab/rng.h"

namespace detect_lab {
namespace {

// Stream tags for derive_seed so the pieces of one instance never share draws.
enum StreamTag : std::uint64_t { kBackground = 1, kSubset = 2, kInternal = 3, kPerturb = 4 };

std::uint64_t pair_key(Vertex u, Vertex v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

// Samples count distinct non-edges of g uniformly, excluding pairs in taken.
std::vector<Edge> sample_non_edges(const Graph& g, std::size_t count, Rng& rng) {
  const std::uint64_t n = g.num_vertices();
  const std::uint64_t total_pairs = n * (n - 1) / 2;
  const std::uint64_t free_pairs = total_pairs - g.num_edges();
  require(count <= free_pairs, "not enough non-edges for the requested perturbation");
  std::vector<Edge> out;
  out.reserve(count);
  if (count == 0) return out;

  if (2 * count <= free_pairs) {
    // Rejection sampling: each draw succeeds with probability >= 1/2.
    std::unordered_set<std::uint64_t> chosen;
    while (out.size() < count) {
      Vertex u = static_cast<Vertex>(rng.below(n));
      Vertex v = static_cast<Vertex>(rng.below(n));
      if (u == v || g.has_edge(u, v)) continue;
      if (!chosen.insert(pair_key(u, v)).second) continue;
      out.emplace_back(std::min(u, v), std::max(u, v));
    }
    return out;
  }
  std::vector<Edge> pool;
  pool.reserve(free_pairs);
  for (Vertex u = 0; u < n; ++u) {
    for (Vertex v = u + 1; v < n; ++v) {
      if (!g.has_edge(u, v)) pool.emplace_back(u, v);
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

Graph generate_er(std::size_t n, double p, std::uint64_t seed) {
  require(n >= 1, "n must be at least 1");
  require(p >= 0.0 && p <= 1.0, "p must lie in [0,1]");
  std::vector<Edge> edges;
  if (p == 0.0 || n < 2) return Graph::from_edges(n, std::move(edges));
  if (p == 1.0) {
    edges.reserve(n * (n - 1) / 2);
    for (Vertex u = 0; u < n; ++u)
      for (Vertex v = u + 1; v < n; ++v) edges.emplace_back(u, v);
    return Graph::from_edges(n, std::move(edges));
  }
  Rng rng(derive_seed(seed, kBackground));
  edges.reserve(static_cast<std::size_t>(p * static_cast<double>(n) * (n - 1) / 2 * 1.1) + 16);
  const double log_q = std::log1p(-p);
  // Batagelj-Brandes skipping over pairs (w, v), w < v, in row-major order.
  std::int64_t v = 1;
  std::int64_t w = -1;
  const auto nn = static_cast<std::int64_t>(n);
  while (v < nn) {
    const double skip = std::floor(std::log(rng.uniform_open()) / log_q);
    w += 1 + static_cast<std::int64_t>(std::min(skip, 9.0e18));
    while (w >= v && v < nn) {
      w -= v;
      ++v;
    }
    if (v < nn) edges.emplace_back(static_cast<Vertex>(w), static_cast<Vertex>(v));
  }
  return Graph::from_edges(n, std::move(edges));
}

std::vector<Vertex> sample_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
  require(k <= n, "subset size exceeds population");
  Rng rng(derive_seed(seed, kSubset));
  std::vector<Vertex> perm(n);
  std::iota(perm.begin(), perm.end(), Vertex{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(perm[i], perm[i + rng.below(n - i)]);
  perm.resize(k);
  std::sort(perm.begin(), perm.end());
  return perm;
}

PlantedGraphInstance generate_planted(std::size_t n, double p, double delta, std::size_t k,
                                      std::uint64_t seed) {
  require(k >= 2 && k <= n, "k must satisfy 2 <= k <= n");
  require(p >= 0.0 && p <= 1.0, "p must lie in [0,1]");
  require(p + delta >= 0.0 && p + delta <= 1.0, "p + delta must lie in [0,1]");

  Graph background = generate_er(n, p, seed);
  std::vector<Vertex> s = sample_subset(n, k, seed);

  // Internal pairs are already Bern(p); lift to Bern(p + delta) by adding
  // absent pairs with probability delta/(1-p) (or thinning present ones with
  // probability -delta/p when delta < 0).
  std::vector<Edge> edges(background.edges().begin(), background.edges().end());
  Rng rng(derive_seed(seed, kInternal));
  if (delta > 0.0) {
    const double add_prob = delta / (1.0 - p);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b)
        if (!background.has_edge(s[a], s[b]) && rng.bernoulli(add_prob)) edges.emplace_back(s[a], s[b]);
  } else if (delta < 0.0) {
    const double drop_prob = -delta / p;
    std::unordered_set<std::uint64_t> dropped;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b)
        if (background.has_edge(s[a], s[b]) && rng.bernoulli(drop_prob)) dropped.insert(pair_key(s[a], s[b]));
    std::erase_if(edges, [&](const Edge& e) { return dropped.contains(pair_key(e.first, e.second)); });
  }

  PlantedGraphInstance out;
  out.graph = Graph::from_edges(n, std::move(edges));
  out.planted = std::move(s);
  out.params = {n, p, delta, k, seed};
  out.hypothesis = Hypothesis::kPlanted;
  return out;
}

PlantedGraphInstance generate_null_instance(std::size_t n, double p, std::size_t k, std::uint64_t seed) {
  PlantedGraphInstance out;
  out.graph = generate_er(n, p, seed);
  out.params = {n, p, 0.0, k, seed};
  out.hypothesis = Hypothesis::kNull;
  return out;
}

std::size_t perturbation_count(const Graph& g, double epsilon) {
  return static_cast<std::size_t>(std::floor(epsilon * static_cast<double>(g.num_edges())));
}

Graph perturb(const Graph& g, const PerturbationBudget& budget) {
  require(budget.epsilon >= 0.0 && budget.epsilon < 1.0, "epsilon must lie in [0,1)");
  if (budget.mode == PerturbMode::kRewire) require(g.num_edges() >= 1, "rewire needs at least one edge");
  const std::size_t count = perturbation_count(g, budget.epsilon);
  if (count == 0) return g;
  Rng rng(derive_seed(budget.seed, kPerturb));

  std::vector<Edge> kept(g.edges().begin(), g.edges().end());
  if (budget.mode == PerturbMode::kDrop || budget.mode == PerturbMode::kRewire) {
    // Candidate indices for removal: all edges, or only those inside the target set.
    std::vector<std::size_t> candidates;
    if (budget.targeted_set) {
      const auto& s = *budget.targeted_set;
      for (std::size_t i = 0; i < kept.size(); ++i) {
        if (std::binary_search(s.begin(), s.end(), kept[i].first) &&
            std::binary_search(s.begin(), s.end(), kept[i].second)) {
          candidates.push_back(i);
        }
      }
      require(candidates.size() >= count, "target set has fewer internal edges than the budget");
    } else {
      candidates.resize(kept.size());
      std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    }
    for (std::size_t i = 0; i < count; ++i)
      std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
    std::vector<char> remove(kept.size(), 0);
    for (std::size_t i = 0; i < count; ++i) remove[candidates[i]] = 1;
    std::vector<Edge> survivors;
    survivors.reserve(kept.size() - count);
    for (std::size_t i = 0; i < kept.size(); ++i)
      if (!remove[i]) survivors.push_back(kept[i]);
    kept = std::move(survivors);
  }
  if (budget.mode == PerturbMode::kAdd || budget.mode == PerturbMode::kRewire) {
    // New pairs are non-edges of the original graph, so a rewire never
    // restores an edge it just removed.
    auto added = sample_non_edges(g, count, rng);
    kept.insert(kept.end(), added.begin(), added.end());
  }
  return Graph::from_edges(g.num_vertices(), std::move(kept));
}

}  // namespace detect_lab
