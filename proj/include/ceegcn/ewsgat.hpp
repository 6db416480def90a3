#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "ceegcn/graph.hpp"

namespace ceegcn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class SelfLoopMode { kMax, kMean, kMin };
enum class Normalizer { kEntmax, kSoftmax };

struct AttentionOptions {
  double alpha = 1.55;
  Normalizer normalizer = Normalizer::kEntmax;
  /// Adds the edge-weight factor f_iz to the attention logits.
  bool use_weight_factor = true;
  SelfLoopMode self_loop = SelfLoopMode::kMax;
};

/// Candidate set N_i ∪ {i} of every node laid out as contiguous slots: the
/// self slot first, then the neighbors in ascending id order.
class AttentionTopology {
 public:
  AttentionTopology() = default;
  AttentionTopology(const WeightedGraph& g, SelfLoopMode self_loop);

  std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t slot_count() const { return targets_.size(); }
  std::size_t begin(NodeId i) const { return offsets_[static_cast<std::size_t>(i)]; }
  std::size_t end(NodeId i) const { return offsets_[static_cast<std::size_t>(i) + 1]; }
  NodeId target(std::size_t slot) const { return targets_[slot]; }
  /// Edge-weight factor f_iz of a slot.
  double factor(std::size_t slot) const { return factors_[slot]; }
  /// Position of a neighbor slot in the graph's adjacency array; self slots
  /// have none.
  std::size_t graph_slot(std::size_t slot) const { return graph_slots_[slot]; }
  bool is_self(std::size_t slot) const { return graph_slots_[slot] == kSelf; }
  /// Slot of z in the candidate set of i, or npos.
  std::size_t find(NodeId i, NodeId z) const;

  static constexpr std::size_t kSelf = static_cast<std::size_t>(-1);
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
  std::vector<double> factors_;
  std::vector<std::size_t> graph_slots_;
};

/// Self-loop weight of node i under the given rule (1 for isolated nodes).
double self_loop_weight(const WeightedGraph& g, NodeId i, SelfLoopMode mode);

/// f_iz = w_iz / (Σ_j w_ij + w_ii) over z ∈ N_i ∪ {i}; pairs (z, f_iz) with
/// the self entry first.
std::vector<std::pair<NodeId, double>> edge_weight_factor(const WeightedGraph& g, NodeId i,
                                                          SelfLoopMode mode = SelfLoopMode::kMax);

struct AttentionHead {
  Matrix W1;  ///< d_in x d_attn, attention projection
  Matrix W2;  ///< d_in x d_out, value projection
};

struct LayerParams {
  std::vector<AttentionHead> heads;
  Vector gamma;  ///< head-fusion weights, one per head

  std::size_t input_dim() const { return heads.front().W1.rows(); }
  std::size_t output_dim() const { return heads.front().W2.cols(); }
};

struct ModelParams {
  Matrix embedding;  ///< n x d0, one learnable row per node
  std::vector<LayerParams> layers;
};

struct ModelShape {
  std::size_t node_count = 0;
  std::size_t embedding_dim = 64;
  std::size_t attention_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t layer_count = 3;
  std::size_t head_count = 8;
};

/// Embedding ~ U(-0.05, 0.05), projections Glorot-uniform, γ = 1/T.
ModelParams init_model(const ModelShape& shape, std::uint64_t seed);

/// Per-layer intermediates kept for the backward pass.
struct LayerCache {
  Matrix input;
  std::vector<Matrix> projected;  ///< H W1 per head
  std::vector<Matrix> values;     ///< H W2 per head
  std::vector<Matrix> pre;        ///< aggregated, before ELU, per head
  std::vector<std::vector<double>> attention;  ///< per head, per slot
};

/// One attention layer: per head, logits e'_iz = f_iz + (W1 h_i)·(W1 h_z)
/// normalized by entmax (or softmax), ELU of the attention-weighted values,
/// then Σ_t γ_t over heads.
Matrix layer_forward(const AttentionTopology& topo, const Matrix& input, const LayerParams& params,
                     const AttentionOptions& options, LayerCache* cache = nullptr,
                     std::size_t layer_index = 0);

struct LayerGrads {
  std::vector<AttentionHead> heads;
  Vector gamma;
};

/// Gradient of the layer given dL/d(output). `attention_grad`, when non-empty,
/// holds an additional dL/d(attention) per head and slot. Returns dL/d(input).
Matrix layer_backward(const AttentionTopology& topo, const LayerCache& cache, const LayerParams& params,
                      const AttentionOptions& options, const Matrix& output_grad,
                      const std::vector<std::vector<double>>& attention_grad, LayerGrads& grads);

/// Normalized attention of every layer and head, plus the head average of the
/// final layer.
struct AttentionRecord {
  std::vector<std::vector<std::vector<double>>> per_head;  ///< [layer][head][slot]
  std::vector<double> final_mean;                          ///< [slot]
};

struct ForwardPass {
  Matrix output;
  std::vector<LayerCache> caches;
  AttentionRecord attention;
};

/// Chains the layers starting from `input` (one row per topology node).
ForwardPass network_forward(const AttentionTopology& topo, const Matrix& input,
                            std::span<const LayerParams> layers, const AttentionOptions& options);

struct ModelGrads {
  Matrix input;  ///< dL/d(input rows)
  std::vector<LayerGrads> layers;
};

/// Reverse pass. `final_attention_grad` (may be empty) is dL/d(final_mean)
/// per slot and is spread over the final layer's heads.
ModelGrads network_backward(const AttentionTopology& topo, const ForwardPass& pass,
                            std::span<const LayerParams> layers, const AttentionOptions& options,
                            const Matrix& output_grad, std::span<const double> final_attention_grad);

/// Rows `nodes` of `m`.
Matrix gather_rows(const Matrix& m, std::span<const NodeId> nodes);

}  // namespace ceegcn
