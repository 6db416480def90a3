#include "ceegcn/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <map>

namespace ceegcn {

namespace {

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

LossBreakdown total_loss(double structure, double modularity_loss, double eta) {
  return {structure, modularity_loss, structure + eta * modularity_loss, -modularity_loss};
}

std::vector<double> refined_slot_weights(const WeightedGraph& g, const AttentionTopology& topo,
                                         std::span<const double> attention) {
  if (topo.node_count() != g.node_count() || attention.size() != topo.slot_count()) {
    throw std::invalid_argument("update_edge_weights: attention does not cover the graph");
  }
  std::vector<double> slot_weights(g.directed_edge_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto id = static_cast<NodeId>(i);
    for (std::size_t s = g.offset(id); s < g.offset(id) + g.degree(id); ++s) {
      const Neighbor& nb = g.adjacency()[s];
      const std::size_t forward = topo.find(id, nb.id);
      const std::size_t backward = topo.find(nb.id, id);
      if (forward == AttentionTopology::npos || backward == AttentionTopology::npos) {
        throw std::invalid_argument("update_edge_weights: missing attention for edge (" + std::to_string(i) +
                                    ", " + std::to_string(nb.id) + ")");
      }
      slot_weights[s] = 0.5 * (attention[forward] + attention[backward]) * nb.weight;
    }
  }
  return slot_weights;
}

WeightedGraph update_edge_weights(const WeightedGraph& g, const AttentionTopology& topo,
                                  std::span<const double> attention, double prune_below) {
  return g.with_slot_weights(refined_slot_weights(g, topo, attention), prune_below);
}

double modularity_of_slots(const WeightedGraph& g, std::span<const double> slot_weights,
                           std::span<const int> labels, std::vector<double>* grad) {
  const std::size_t n = g.node_count();
  if (labels.size() != n) throw std::invalid_argument("modularity: label count does not match node count");
  if (slot_weights.size() != g.directed_edge_count()) throw std::invalid_argument("modularity: slot weight count mismatch");

  std::map<int, double> community_degree;
  double total = 0.0;
  double inside = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<NodeId>(i);
    double k = 0.0;
    for (std::size_t s = g.offset(id); s < g.offset(id) + g.degree(id); ++s) {
      const double w = slot_weights[s];
      k += w;
      if (labels[static_cast<std::size_t>(g.adjacency()[s].id)] == labels[i]) inside += w;
    }
    community_degree[labels[i]] += k;
    total += k;
  }
  if (!(total > 0.0)) throw std::invalid_argument("modularity: graph has no edge weight (m = 0)");

  double squares = 0.0;
  for (const auto& [c, k] : community_degree) squares += k * k;
  const double Q = inside / total - squares / (total * total);

  if (grad) {
    grad->assign(slot_weights.size(), 0.0);
    const double common = -inside / (total * total) + 2.0 * squares / (total * total * total);
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = static_cast<NodeId>(i);
      const double row_term = -2.0 * community_degree.at(labels[i]) / (total * total);
      for (std::size_t s = g.offset(id); s < g.offset(id) + g.degree(id); ++s) {
        const bool same = labels[static_cast<std::size_t>(g.adjacency()[s].id)] == labels[i];
        (*grad)[s] = (same ? 1.0 / total : 0.0) + row_term + common;
      }
    }
  }
  return Q;
}

double modularity(const WeightedGraph& g, std::span<const int> labels) {
  std::vector<double> w(g.directed_edge_count());
  for (std::size_t s = 0; s < w.size(); ++s) w[s] = g.adjacency()[s].weight;
  return modularity_of_slots(g, w, labels);
}

NegativeSampler::NegativeSampler(const WeightedGraph& g, int negatives_per_node) : negatives_(negatives_per_node) {
  if (negatives_per_node < 0) throw std::invalid_argument("NegativeSampler: negative count must be >= 0");
  const std::size_t n = g.node_count();
  probabilities_.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    probabilities_[i] = std::pow(g.weighted_degree(static_cast<NodeId>(i)), 0.75);
    total += probabilities_[i];
  }
  if (total > 0.0) {
    for (double& p : probabilities_) p /= total;
  } else if (n > 0) {
    std::fill(probabilities_.begin(), probabilities_.end(), 1.0 / static_cast<double>(n));
  }
  dist_ = std::discrete_distribution<NodeId>(probabilities_.begin(), probabilities_.end());
}

std::vector<NodeId> NegativeSampler::sample(const WeightedGraph& g, NodeId i, std::mt19937_64& rng) const {
  std::vector<NodeId> out;
  if (negatives_ == 0) return out;
  // Nothing to draw when every other node is a neighbor.
  if (g.degree(i) + 1 >= g.node_count()) return out;
  const int max_attempts = 100 * negatives_;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < negatives_; ++attempt) {
    const NodeId v = dist_(rng);
    if (v == i || g.has_edge(i, v)) continue;
    out.push_back(v);
  }
  return out;
}

StructureSamples draw_structure_samples(const WeightedGraph& g, const NegativeSampler& sampler, std::mt19937_64& rng) {
  const std::size_t n = g.node_count();
  StructureSamples samples;
  samples.positive.assign(n, -1);
  samples.negatives.resize(n);
  std::vector<double> weights;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<NodeId>(i);
    auto nbrs = g.neighbors(id);
    if (nbrs.empty()) continue;
    weights.clear();
    for (const Neighbor& nb : nbrs) weights.push_back(nb.weight);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    samples.positive[i] = nbrs[pick(rng)].id;
    samples.negatives[i] = sampler.sample(g, id, rng);
  }
  return samples;
}

double structure_loss(const Matrix& H, const StructureSamples& samples, Matrix* grad) {
  const auto n = static_cast<std::size_t>(H.rows());
  if (samples.positive.size() != n) throw std::invalid_argument("structure_loss: samples do not match representations");
  if (grad) *grad = Matrix::Zero(H.rows(), H.cols());
  std::size_t counted = 0;
  for (std::size_t i = 0; i < n; ++i) counted += samples.positive[i] >= 0 ? 1 : 0;
  if (counted == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(counted);

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId u = samples.positive[i];
    if (u < 0) continue;
    const auto row = static_cast<Eigen::Index>(i);
    const double pos = H.row(row).dot(H.row(u));
    double node_loss = softplus(-pos);
    if (grad) {
      const double g = -sigmoid(-pos) * scale;
      grad->row(row).noalias() += g * H.row(u);
      grad->row(u).noalias() += g * H.row(row);
    }
    for (NodeId v : samples.negatives[i]) {
      const double neg = H.row(row).dot(H.row(v));
      node_loss += softplus(neg);
      if (grad) {
        const double g = sigmoid(neg) * scale;
        grad->row(row).noalias() += g * H.row(v);
        grad->row(v).noalias() += g * H.row(row);
      }
    }
    total += node_loss;
  }
  return total * scale;
}

double structure_loss(const Matrix& H, const WeightedGraph& g, const NegativeSampler& sampler, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return structure_loss(H, draw_structure_samples(g, sampler, rng));
}

}  // namespace ceegcn
