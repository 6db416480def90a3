#pragma once

#include <random>
#include <span>
#include <vector>

#include "ceegcn/ewsgat.hpp"
#include "ceegcn/graph.hpp"

namespace ceegcn {

struct LossBreakdown {
  double structure = 0.0;   ///< L_G
  double modularity = 0.0;  ///< L_M = -Q
  double total = 0.0;       ///< L_G + η L_M
  double Q = 0.0;
};

LossBreakdown total_loss(double structure, double modularity_loss, double eta);

/// Weights are refined per directed slot of `g`:
/// w_ij <- ((a_ij + a_ji) / 2) w_ij, with a taken from `attention` (one value
/// per topology slot of `topo`, which must be built on `g`).
std::vector<double> refined_slot_weights(const WeightedGraph& g, const AttentionTopology& topo,
                                         std::span<const double> attention);

/// Refined graph; edges whose new weight drops below `prune_below` are removed.
WeightedGraph update_edge_weights(const WeightedGraph& g, const AttentionTopology& topo,
                                  std::span<const double> attention, double prune_below = 1e-12);

/// Q = (1/2m) Σ_ij (w_ij - k_i k_j / 2m) δ(c_i, c_j). Throws on an empty graph.
double modularity(const WeightedGraph& g, std::span<const int> labels);

/// Modularity over the topology of `g` with replacement slot weights. When
/// `grad` is given it receives dQ/dw for every slot, treating each directed
/// slot as its own variable.
double modularity_of_slots(const WeightedGraph& g, std::span<const double> slot_weights,
                           std::span<const int> labels, std::vector<double>* grad = nullptr);

/// Negative-sampling distribution P_n(v) ∝ (weighted degree)^0.75.
class NegativeSampler {
 public:
  NegativeSampler(const WeightedGraph& g, int negatives_per_node);

  int negatives_per_node() const { return negatives_; }
  std::span<const double> probabilities() const { return probabilities_; }

  /// Q draws from P_n, rejecting i and its neighbors. Returns fewer when the
  /// candidates are exhausted.
  std::vector<NodeId> sample(const WeightedGraph& g, NodeId i, std::mt19937_64& rng) const;

 private:
  int negatives_;
  std::vector<double> probabilities_;
  mutable std::discrete_distribution<NodeId> dist_;
};

/// Positive and negative partners drawn for one evaluation of L_G.
struct StructureSamples {
  std::vector<NodeId> positive;  ///< -1 for isolated nodes
  std::vector<std::vector<NodeId>> negatives;
};

/// One positive per node (∝ w_iu) then its negatives, in node order.
StructureSamples draw_structure_samples(const WeightedGraph& g, const NegativeSampler& sampler,
                                        std::mt19937_64& rng);

/// L_G = mean over non-isolated nodes of
/// -log σ(h_iᵀh_u) - Σ_q log σ(-h_iᵀh_v). Writes dL_G/dH into `grad` if given.
double structure_loss(const Matrix& H, const StructureSamples& samples, Matrix* grad = nullptr);

/// Draws samples with a generator seeded by `seed`, then evaluates.
double structure_loss(const Matrix& H, const WeightedGraph& g, const NegativeSampler& sampler,
                      std::uint64_t seed);

}  // namespace ceegcn
