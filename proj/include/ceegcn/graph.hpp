#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ceegcn {

using NodeId = std::int32_t;

struct Neighbor {
  NodeId id;
  double weight;
};

struct Edge {
  NodeId u;
  NodeId v;
  double w;
};

/// Undirected weighted graph in compressed adjacency form.
///
/// Every undirected edge is stored twice (once per endpoint) with the same
/// weight, neighbor lists are sorted by id, weights are strictly positive and
/// self-edges are never stored. The graph is immutable after construction.
class WeightedGraph {
 public:
  WeightedGraph() = default;

  /// Builds a graph on `n` nodes. Duplicate pairs (in either orientation) have
  /// their weights summed. Throws std::invalid_argument on self-edges,
  /// non-positive or non-finite weights and out-of-range ids.
  static WeightedGraph from_edges(std::size_t n, std::span<const Edge> edges);

  std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const { return adjacency_.size() / 2; }
  std::size_t directed_edge_count() const { return adjacency_.size(); }

  /// Σ_ij w_ij with each undirected edge counted twice.
  double total_weight_2m() const { return total_weight_2m_; }

  std::span<const Neighbor> neighbors(NodeId i) const {
    return {adjacency_.data() + offsets_[i], adjacency_.data() + offsets_[i + 1]};
  }
  std::size_t degree(NodeId i) const { return offsets_[i + 1] - offsets_[i]; }
  /// Offset of node i's first slot in the flat adjacency array.
  std::size_t offset(NodeId i) const { return offsets_[i]; }
  std::span<const Neighbor> adjacency() const { return adjacency_; }

  double weighted_degree(NodeId i) const;
  /// Weight of edge (i, j), or 0 when absent.
  double weight(NodeId i, NodeId j) const;
  bool has_edge(NodeId i, NodeId j) const { return weight(i, j) > 0.0; }

  /// Edges with u < v, in adjacency order.
  std::vector<Edge> edges() const;

  /// Full scan of the structural invariants; on failure returns false and
  /// describes the first violation in `why`.
  bool check_invariants(std::string* why = nullptr) const;

  /// Same topology and neighbor order with replaced weights (one value per
  /// directed slot). Slots whose weight is below `prune_below` in either
  /// direction are dropped. Weights must be symmetric.
  WeightedGraph with_slot_weights(std::span<const double> slot_weights,
                                  double prune_below = 0.0) const;

  /// Subgraph induced on `nodes` (sorted, unique); node k of the result is
  /// nodes[k].
  WeightedGraph induced(std::span<const NodeId> nodes) const;

  /// Relabels node i as perm[i].
  WeightedGraph permuted(std::span<const NodeId> perm) const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> adjacency_;
  double total_weight_2m_ = 0.0;
};

struct LabeledGraph {
  WeightedGraph graph;
  std::vector<int> labels;
  int K = 0;
};

/// Graph read from an edge-list file together with the external id of every
/// dense node index.
struct LoadedGraph {
  WeightedGraph graph;
  std::vector<std::string> external_ids;
};

/// Reads `u<TAB>v<TAB>w` lines (any whitespace accepted, `#` comments
/// skipped). When every id is a non-negative integer, dense ids follow numeric
/// order; otherwise order of first appearance.
LoadedGraph load_edge_list(const std::filesystem::path& path);

/// Writes edges u < v using the given external ids (or the dense ids when
/// `external_ids` is empty). Weights are printed with round-trip precision.
void save_edge_list(const std::filesystem::path& path, const WeightedGraph& g,
                    std::span<const std::string> external_ids = {});

/// `dense<TAB>external` per node.
void save_id_map(const std::filesystem::path& path, std::span<const std::string> external_ids);

/// `node<TAB>label` per node.
void save_labels(const std::filesystem::path& path, std::span<const int> labels,
                 std::span<const std::string> external_ids = {});

/// Reads a label file keyed by external id, returned as (external id, label)
/// pairs in file order.
std::vector<std::pair<std::string, int>> load_label_file(const std::filesystem::path& path);

/// Labels aligned with `external_ids`; every id must be present in the file.
std::vector<int> load_labels(const std::filesystem::path& path,
                             std::span<const std::string> external_ids);

struct SbmParams {
  std::size_t n = 120;
  int K = 4;
  double p_in = 0.5;
  double p_out = 0.05;
  double w_in_mean = 5.0;
  double w_out_mean = 1.0;
};

/// Weighted stochastic block model with K near-equal contiguous blocks and
/// integer weights 1 + Poisson(mean - 1).
LabeledGraph synth_weighted_sbm(const SbmParams& params, std::uint64_t seed);

enum class NoiseWeight { kEmpirical, kUnit };

struct NoisyGraph {
  WeightedGraph graph;
  std::vector<Edge> added;
};

/// Adds floor(fraction * |E|) uniformly random non-edges as new edges.
NoisyGraph inject_noise_edges(const WeightedGraph& g, double fraction, std::uint64_t seed,
                              NoiseWeight weight_mode = NoiseWeight::kEmpirical);

}  // namespace ceegcn
