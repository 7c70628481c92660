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

#ifndef DETECT_LAB_GRAPH_SIM_H_
#define DETECT_LAB_GRAPH_SIM_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "detect_lab/graph.h"

namespace detect_lab {

enum class Hypothesis { kNull, kPlanted };

struct PlantedParams {
  std::size_t n = 0;
  double p = 0.0;
  double delta = 0.0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
};

struct PlantedGraphInstance {
  Graph graph;
  std::vector<Vertex> planted;  // sorted; empty under the null
  PlantedParams params;
  Hypothesis hypothesis = Hypothesis::kNull;
};

enum class PerturbMode { kAdd, kDrop, kRewire };

// Edits exactly floor(epsilon * |E|) edges. When targeted_set is given,
// removals are drawn from edges internal to that set instead of uniformly.
struct PerturbationBudget {
  double epsilon = 0.0;
  PerturbMode mode = PerturbMode::kDrop;
  std::uint64_t seed = 0;
  std::optional<std::vector<Vertex>> targeted_set;
};

// G(n, p) by geometric skipping over the n(n-1)/2 pair indices; expected
// O(n + |E|) time.
Graph generate_er(std::size_t n, double p, std::uint64_t seed);

// ER(n, p) background with a uniformly drawn size-k set S whose internal pairs
// are present with probability p + delta.
PlantedGraphInstance generate_planted(std::size_t n, double p, double delta, std::size_t k,
                                      std::uint64_t seed);

// Null instance carrying the same parameter record (k retained, no planted set).
PlantedGraphInstance generate_null_instance(std::size_t n, double p, std::size_t k,
                                            std::uint64_t seed);

// Uniform size-k subset of [0, n), sorted; partial Fisher-Yates.
std::vector<Vertex> sample_subset(std::size_t n, std::size_t k, std::uint64_t seed);

Graph perturb(const Graph& g, const PerturbationBudget& budget);

std::size_t perturbation_count(const Graph& g, double epsilon);

}  // namespace detect_lab

#endif  // DETECT_LAB_GRAPH_SIM_H_
