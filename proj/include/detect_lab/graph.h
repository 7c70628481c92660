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

#ifndef DETECT_LAB_GRAPH_H_
#define DETECT_LAB_GRAPH_H_

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

namespace detect_lab {

using Vertex = std::uint32_t;
using Edge = std::pair<Vertex, Vertex>;

// Undirected simple graph. Edges are stored as sorted (u, v) pairs with
// u < v; the CSR adjacency is derived from them and lists neighbors in
// increasing order. Immutable after construction.
class Graph {
 public:
  Graph() = default;

  // Throws DomainError on self-loops, duplicates or out-of-range ids.
  // Endpoint order within a pair does not matter.
  static Graph from_edges(std::size_t n, std::vector<Edge> edges);

  std::size_t num_vertices() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }

  std::span<const Vertex> neighbors(Vertex v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }
  std::size_t degree(Vertex v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(Vertex u, Vertex v) const;

  // CSR arrays: neighbors of v are adjacency()[offsets()[v] .. offsets()[v+1]).
  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const Vertex> adjacency() const { return adjacency_; }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Vertex> adjacency_;
};

// Number of edges of g with both endpoints in the sorted vertex set s.
std::size_t internal_edge_count(const Graph& g, std::span<const Vertex> s);

// Text format: "n m", then m lines "u v" (0-indexed, u < v, sorted), then an
// optional trailer "S: v1 ... vk" carrying a planted set.
struct GraphFile {
  Graph graph;
  std::vector<Vertex> planted;
  bool has_planted = false;
};

void write_graph(std::ostream& out, const Graph& g, const std::vector<Vertex>* planted = nullptr);
// Throws ConfigError on malformed input.
GraphFile read_graph(std::istream& in);

}  // namespace detect_lab

#endif  // DETECT_LAB_GRAPH_H_
