#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ceegcn/graph.hpp"

namespace ceegcn {

enum class DistanceMode { kReciprocalWeight, kUnit };

struct ContractionConfig {
  /// Number of core nodes; 0 selects max(K, ceil(0.02 n)).
  std::size_t core_count = 0;
  /// Weight of the density rank against the distance rank.
  double epsilon = 0.5;
  /// Teleport probability of the personalized PageRank walk.
  double phi = 0.15;
  /// Nodes whose best importance exceeds this are kept. When unset, the
  /// threshold is the `keep_quantile` quantile of the non-core importances.
  std::optional<double> importance_threshold;
  double keep_quantile = 0.5;
  DistanceMode distance_mode = DistanceMode::kReciprocalWeight;
};

struct SubgraphSelection {
  /// Original ids of kept nodes, ascending.
  std::vector<NodeId> selected;
  /// Original ids of core nodes, in selection order.
  std::vector<NodeId> core_nodes;
  /// Original id -> subgraph id, -1 when dropped.
  std::vector<NodeId> old_to_new;
  WeightedGraph subgraph;
  double threshold = 0.0;
};

/// ρ_i = Σ_j w_ij.
std::vector<double> node_density(const WeightedGraph& g);

/// Single-source shortest path lengths; unreachable nodes get +inf.
std::vector<double> shortest_paths(const WeightedGraph& g, NodeId source, DistanceMode mode);

/// Length used for node pairs with no connecting path: n times the longest
/// single edge length.
double unreachable_distance(const WeightedGraph& g, DistanceMode mode);

/// θ_i = Σ_{c ∈ cores} dist(i, c).
std::vector<double> distance_to_cores(const WeightedGraph& g, std::span<const NodeId> cores,
                                      DistanceMode mode);

/// Larger value -> higher score; rank position r (0 = best) scores n - r,
/// tied values all take the worst position of their group.
std::vector<double> rank_score(std::span<const double> values);

/// Density-seeded greedy core selection fusing density and distance ranks.
std::vector<NodeId> select_core_nodes(const WeightedGraph& g, std::size_t core_count,
                                      double epsilon, DistanceMode mode);

struct PageRankOptions {
  double tolerance = 1e-10;
  int max_iterations = 1000;
};

/// Fixed point of r = φ e_seed + (1 - φ) W D^{-1} r by power iteration.
/// Mass reaching a node without edges is returned to the seed.
std::vector<double> personalized_pagerank(const WeightedGraph& g, NodeId seed, double phi,
                                          const PageRankOptions& options = {});

/// Default core count for K expected clusters.
std::size_t default_core_count(std::size_t n, int K);

SubgraphSelection contract(const WeightedGraph& g, const ContractionConfig& config, int K = 1);

/// Uniformly random node sample of `size` nodes (the random-sampling
/// ablation), induced the same way as `contract`.
SubgraphSelection random_contract(const WeightedGraph& g, std::size_t size, std::uint64_t seed);

}  // namespace ceegcn
