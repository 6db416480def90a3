#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ceegcn/contraction.hpp"
#include "ceegcn/ewsgat.hpp"
#include "ceegcn/fuzzy_cluster.hpp"
#include "ceegcn/graph.hpp"
#include "ceegcn/objective.hpp"

namespace ceegcn {

/// How the attention-refined edge weights are carried between epochs.
enum class WeightRefinement {
  /// Each epoch refines the contracted graph's original weights.
  kTransient,
  /// Refined weights replace the working graph (rescaled to the original 2m).
  kPersistent,
};

struct TrainConfig {
  // Contraction
  double epsilon = 0.5;
  double phi = 0.15;
  std::size_t core_count = 0;  ///< 0 = max(K, ceil(0.02 n))
  std::optional<double> importance_threshold;
  double keep_quantile = 0.5;
  DistanceMode distance_mode = DistanceMode::kReciprocalWeight;

  // Network
  double alpha = 1.55;
  std::size_t heads = 8;
  std::size_t layers = 3;
  std::size_t embedding_dim = 64;
  std::size_t attention_dim = 32;
  std::size_t hidden_dim = 32;
  SelfLoopMode self_loop = SelfLoopMode::kMax;

  // Objective and optimizer
  double eta = 0.03;
  int negatives = 5;
  double learning_rate = 0.005;
  int epochs = 200;
  int patience = 20;
  double min_improvement = 1e-5;
  WeightRefinement refinement = WeightRefinement::kTransient;

  // Clustering
  FcmMode fcm_mode = FcmMode::kSimilarityProportional;
  int fcm_iterations = 30;
  bool fcm_warm_start = false;
  bool reuse_training_centers = false;

  std::uint64_t seed = 0;

  // Ablations
  bool no_contraction = false;
  bool random_contraction = false;
  bool softmax_instead_of_entmax = false;
  bool drop_f_iz = false;
  bool no_weight_update = false;
  bool vanilla_gat = false;

  /// Skip the hyperparameter grid check.
  bool allow_off_grid = false;

  AttentionOptions attention_options() const;
  ModelShape shape(std::size_t node_count) const;
};

/// Throws std::invalid_argument for values outside the supported ranges or
/// (unless allow_off_grid) outside the tuning grids.
void validate(const TrainConfig& config);

/// Flat `key = value` echo of every field, in a fixed order.
std::vector<std::pair<std::string, std::string>> to_key_values(const TrainConfig& config);
std::string to_config_text(const TrainConfig& config);
/// Sets one field from its textual value; unknown keys throw.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);
/// Parses `key = value` lines (`#` comments allowed).
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

/// Names accepted by the CLI `--ablation` flag.
void apply_ablation(TrainConfig& config, const std::string& name);

struct EpochRecord {
  int epoch = 0;
  double structure = 0.0;
  double modularity_loss = 0.0;
  double total = 0.0;
  double Q = 0.0;
};

struct TrainedModel {
  ModelParams params;
  int K = 0;
  TrainConfig config;
  std::vector<EpochRecord> history;
  /// Original ids of the nodes trained on, ascending.
  std::vector<NodeId> trained_nodes;
  std::vector<NodeId> core_nodes;
  /// Trained subgraph with the last epoch's refined weights.
  WeightedGraph refined_subgraph;
  std::optional<Matrix> training_centers;
  std::size_t edges_before_contraction = 0;
  std::size_t edges_after_contraction = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Contraction, then epochs of forward pass, FCM labels, edge-weight
/// refinement, L = L_G + η L_M and an Adam step; stops at `epochs` or after
/// `patience` epochs without an improvement of `min_improvement`.
TrainedModel train(const WeightedGraph& graph, int K, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

struct Inference {
  ClusterAssignment assignment;
  Matrix representations;
  AttentionTopology topology;
  AttentionRecord attention;
};

/// Forward pass over the whole graph (no contraction) and a fresh FCM fit.
Inference infer(const WeightedGraph& graph, const TrainedModel& model, int K);

/// Worst relative error between the analytic gradient of L (labels and
/// samples held fixed) and central finite differences over every parameter.
/// Relative error is |a - f| / max(|a|, |f|, floor).
struct GradientCheckOptions {
  double step = 1e-5;
  double floor = 1e-6;
};
double gradient_check(const TrainConfig& config, const WeightedGraph& graph, int K,
                      const GradientCheckOptions& options = {});

/// Loss history as CSV `epoch,L_G,L_M,total,Q`.
std::string loss_history_csv(const std::vector<EpochRecord>& history);

}  // namespace ceegcn
