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

#include "detect_lab/graph.h"

#include <algorithm>
#include <sstream>
#include <string>

#include "detect_lab/errors.h"

namespace detect_lab {

Graph Graph::from_edges(std::size_t n, std::vector<Edge> edges) {
  for (auto& [u, v] : edges) {
    require(u != v, "self-loop on vertex " + std::to_string(u));
    require(u < n && v < n, "vertex id out of range");
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  require(std::adjacent_find(edges.begin(), edges.end()) == edges.end(), "duplicate edge");

  Graph g;
  g.n_ = n;
  g.edges_ = std::move(edges);
  g.offsets_.assign(n + 1, 0);
  for (const auto& [u, v] : g.edges_) {
    ++g.offsets_[u + 1];
    ++g.offsets_[v + 1];
  }
  for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] += g.offsets_[i];
  g.adjacency_.resize(2 * g.edges_.size());
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  // Edges sorted by (u, v): for each vertex the smaller neighbors arrive in
  // increasing order via the v-side, then the larger ones via the u-side.
  for (const auto& [u, v] : g.edges_) g.adjacency_[cursor[v]++] = u;
  for (const auto& [u, v] : g.edges_) g.adjacency_[cursor[u]++] = v;
  return g;
}

bool Graph::has_edge(Vertex u, Vertex v) const {
  if (u >= n_ || v >= n_) return false;
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::size_t internal_edge_count(const Graph& g, std::span<const Vertex> s) {
  std::size_t count = 0;
  for (Vertex u : s) {
    for (Vertex v : g.neighbors(u)) {
      if (v > u && std::binary_search(s.begin(), s.end(), v)) ++count;
    }
  }
  return count;
}

void write_graph(std::ostream& out, const Graph& g, const std::vector<Vertex>* planted) {
  out << g.num_vertices() << ' ' << g.num_edges() << '\n';
  for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
  if (planted != nullptr) {
    out << "S:";
    for (Vertex v : *planted) out << ' ' << v;
    out << '\n';
  }
}

GraphFile read_graph(std::istream& in) {
  std::string line;
  std::size_t n = 0;
  std::size_t m = 0;
  if (!std::getline(in, line)) throw ConfigError("graph file: missing header");
  {
    std::istringstream header(line);
    if (!(header >> n >> m)) throw ConfigError("graph file: header must be 'n m'");
  }
  std::vector<Edge> edges;
  edges.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::getline(in, line)) throw ConfigError("graph file: fewer edge lines than declared");
    std::istringstream row(line);
    long long u = -1;
    long long v = -1;
    if (!(row >> u >> v) || u < 0 || v < 0) {
      throw ConfigError("graph file: bad edge line " + std::to_string(i + 2));
    }
    edges.emplace_back(static_cast<Vertex>(u), static_cast<Vertex>(v));
  }
  GraphFile out;
  try {
    out.graph = Graph::from_edges(n, std::move(edges));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("graph file: ") + e.what());
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("S:", 0) != 0) throw ConfigError("graph file: unexpected trailer line");
    std::istringstream row(line.substr(2));
    long long v;
    while (row >> v) {
      if (v < 0 || static_cast<std::size_t>(v) >= n) throw ConfigError("graph file: planted id out of range");
      out.planted.push_back(static_cast<Vertex>(v));
    }
    std::sort(out.planted.begin(), out.planted.end());
    out.has_planted = true;
  }
  return out;
}

}  // namespace detect_lab
