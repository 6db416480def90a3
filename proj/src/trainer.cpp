#include "ceegcn/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ceegcn/text_io.hpp"

namespace ceegcn {

namespace {

constexpr double kSmoothing = 0.9;

// Independent generator streams derived from the run seed.
enum Stream : std::uint64_t { kInit = 1, kSamples = 2, kFcm = 3, kSampling = 4 };

std::uint64_t derive_seed(std::uint64_t seed, Stream stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(stream);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Graph the network runs on, with its attention layout and the embedding row
/// of each node.
struct TrainingGraph {
  WeightedGraph graph;
  AttentionTopology topo;
  std::vector<NodeId> rows;
  /// Topology slots of (i, j) and (j, i) for every adjacency slot of `graph`.
  std::vector<std::size_t> forward_slot;
  std::vector<std::size_t> backward_slot;

  TrainingGraph(WeightedGraph g, std::vector<NodeId> embedding_rows, SelfLoopMode mode)
      : graph(std::move(g)), topo(graph, mode), rows(std::move(embedding_rows)) {
    forward_slot.resize(graph.directed_edge_count());
    backward_slot.resize(graph.directed_edge_count());
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
      const auto id = static_cast<NodeId>(i);
      for (std::size_t s = graph.offset(id); s < graph.offset(id) + graph.degree(id); ++s) {
        const NodeId j = graph.adjacency()[s].id;
        forward_slot[s] = topo.find(id, j);
        backward_slot[s] = topo.find(j, id);
      }
    }
  }

  std::vector<double> refined(std::span<const double> attention) const {
    std::vector<double> w(graph.directed_edge_count());
    for (std::size_t s = 0; s < w.size(); ++s) {
      w[s] = 0.5 * (attention[forward_slot[s]] + attention[backward_slot[s]]) * graph.adjacency()[s].weight;
    }
    return w;
  }

  std::vector<double> base_weights() const {
    std::vector<double> w(graph.directed_edge_count());
    for (std::size_t s = 0; s < w.size(); ++s) w[s] = graph.adjacency()[s].weight;
    return w;
  }
};

ForwardPass forward(const ModelParams& params, const TrainingGraph& tg, const AttentionOptions& options) {
  return network_forward(tg.topo, gather_rows(params.embedding, tg.rows), params.layers, options);
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z;
  z.embedding = Matrix::Zero(p.embedding.rows(), p.embedding.cols());
  for (const LayerParams& layer : p.layers) {
    LayerParams zl;
    for (const AttentionHead& h : layer.heads) {
      zl.heads.push_back({Matrix::Zero(h.W1.rows(), h.W1.cols()), Matrix::Zero(h.W2.rows(), h.W2.cols())});
    }
    zl.gamma = Vector::Zero(layer.gamma.size());
    z.layers.push_back(std::move(zl));
  }
  return z;
}

/// Every parameter block as a flat span, in a fixed order.
std::vector<std::span<double>> blocks(ModelParams& p) {
  std::vector<std::span<double>> out;
  out.emplace_back(p.embedding.data(), static_cast<std::size_t>(p.embedding.size()));
  for (LayerParams& layer : p.layers) {
    for (AttentionHead& h : layer.heads) {
      out.emplace_back(h.W1.data(), static_cast<std::size_t>(h.W1.size()));
      out.emplace_back(h.W2.data(), static_cast<std::size_t>(h.W2.size()));
    }
    out.emplace_back(layer.gamma.data(), static_cast<std::size_t>(layer.gamma.size()));
  }
  return out;
}

/// L for fixed labels and samples; fills `grad` (same shape as `params`) when
/// given. `refined` receives the refined slot weights.
LossBreakdown evaluate(const ForwardPass& pass, const ModelParams& params, const TrainingGraph& tg,
                       std::span<const int> labels, const StructureSamples& samples, const TrainConfig& config,
                       ModelParams* grad, std::vector<double>* refined) {
  Matrix output_grad;
  const double structure = structure_loss(pass.output, samples, grad ? &output_grad : nullptr);

  const bool refine = !config.no_weight_update;
  std::vector<double> weights = refine ? tg.refined(pass.attention.final_mean) : tg.base_weights();
  std::vector<double> q_grad;
  const bool want_q_grad = grad && refine && config.eta != 0.0;
  const double Q = modularity_of_slots(tg.graph, weights, labels, want_q_grad ? &q_grad : nullptr);
  const LossBreakdown loss = total_loss(structure, -Q, config.eta);

  if (grad) {
    std::vector<double> attention_grad;
    if (want_q_grad) {
      attention_grad.assign(tg.topo.slot_count(), 0.0);
      for (std::size_t s = 0; s < q_grad.size(); ++s) {
        // L_M = -Q and w'_s = (a_ij + a_ji) / 2 · w_s.
        const double g = -config.eta * q_grad[s] * 0.5 * tg.graph.adjacency()[s].weight;
        attention_grad[tg.forward_slot[s]] += g;
        attention_grad[tg.backward_slot[s]] += g;
      }
    }
    const AttentionOptions options = config.attention_options();
    ModelGrads mg = network_backward(tg.topo, pass, params.layers, options, output_grad, attention_grad);
    *grad = zeros_like(params);
    for (std::size_t k = 0; k < tg.rows.size(); ++k) {
      grad->embedding.row(tg.rows[k]) += mg.input.row(static_cast<Eigen::Index>(k));
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      for (std::size_t t = 0; t < params.layers[l].heads.size(); ++t) {
        grad->layers[l].heads[t].W1 = std::move(mg.layers[l].heads[t].W1);
        grad->layers[l].heads[t].W2 = std::move(mg.layers[l].heads[t].W2);
      }
      grad->layers[l].gamma = std::move(mg.layers[l].gamma);
    }
  }
  if (refined) *refined = std::move(weights);
  return loss;
}

class Adam {
 public:
  Adam(const ModelParams& like, double learning_rate)
      : lr_(learning_rate), m_(zeros_like(like)), v_(zeros_like(like)) {}

  void step(ModelParams& params, ModelParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    auto p = blocks(params);
    auto g = blocks(grad);
    auto m = blocks(m_);
    auto v = blocks(v_);
    for (std::size_t b = 0; b < p.size(); ++b) {
      for (std::size_t k = 0; k < p[b].size(); ++k) {
        m[b][k] = kBeta1 * m[b][k] + (1.0 - kBeta1) * g[b][k];
        v[b][k] = kBeta2 * v[b][k] + (1.0 - kBeta2) * g[b][k] * g[b][k];
        p[b][k] -= lr_ * (m[b][k] / c1) / (std::sqrt(v[b][k] / c2) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  int t_ = 0;
  ModelParams m_, v_;
};

FcmOptions fcm_options(const TrainConfig& c) {
  FcmOptions o;
  o.max_iterations = c.fcm_iterations;
  o.mode = c.fcm_mode;
  return o;
}

}  // namespace

TrainedModel train(const WeightedGraph& graph, int K, const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  if (K < 2) throw std::invalid_argument("train: K must be >= 2");
  const std::size_t n = graph.node_count();
  if (static_cast<std::size_t>(K) > n) throw std::invalid_argument("train: K exceeds node count");

  TrainedModel model;
  model.K = K;
  model.config = config;
  model.edges_before_contraction = graph.edge_count();

  std::vector<NodeId> nodes;
  WeightedGraph sub;
  if (config.no_contraction) {
    nodes.resize(n);
    std::iota(nodes.begin(), nodes.end(), NodeId{0});
    sub = graph;
  } else {
    ContractionConfig cc;
    cc.core_count = config.core_count;
    cc.epsilon = config.epsilon;
    cc.phi = config.phi;
    cc.importance_threshold = config.importance_threshold;
    cc.keep_quantile = config.keep_quantile;
    cc.distance_mode = config.distance_mode;
    SubgraphSelection selection = contract(graph, cc, K);
    if (config.random_contraction) {
      selection = random_contract(graph, selection.selected.size(), derive_seed(config.seed, kSampling));
    }
    model.core_nodes = selection.core_nodes;
    nodes = std::move(selection.selected);
    sub = std::move(selection.subgraph);
  }
  if (nodes.size() < static_cast<std::size_t>(K)) {
    throw std::runtime_error("train: contraction kept " + std::to_string(nodes.size()) + " nodes, fewer than K = " +
                             std::to_string(K));
  }
  model.edges_after_contraction = sub.edge_count();
  model.trained_nodes = nodes;
  model.params = init_model(config.shape(n), derive_seed(config.seed, kInit));

  const double base_total = sub.total_weight_2m();
  auto tg = std::make_unique<TrainingGraph>(std::move(sub), nodes, config.self_loop);
  auto sampler = std::make_unique<NegativeSampler>(tg->graph, config.negatives);
  const AttentionOptions options = config.attention_options();
  const FcmOptions fcm_opts = fcm_options(config);
  const std::uint64_t fcm_seed = derive_seed(config.seed, kFcm);
  std::mt19937_64 sample_rng(derive_seed(config.seed, kSamples));
  Adam adam(model.params, config.learning_rate);

  std::vector<double> refined = tg->base_weights();
  std::optional<Matrix> centers;
  double best = std::numeric_limits<double>::infinity();
  double smoothed = 0.0;
  int stalled = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const ForwardPass pass = forward(model.params, *tg, options);
    const ClusterAssignment fcm =
        fcm_fit(pass.output, K, fcm_seed, fcm_opts, config.fcm_warm_start ? centers : std::nullopt);
    centers = fcm.centers;
    const StructureSamples samples = draw_structure_samples(tg->graph, *sampler, sample_rng);

    ModelParams grad;
    const LossBreakdown loss = evaluate(pass, model.params, *tg, fcm.labels, samples, config, &grad, &refined);
    if (!std::isfinite(loss.total)) {
      throw std::runtime_error("train: loss diverged (non-finite) at epoch " + std::to_string(epoch));
    }
    EpochRecord record{epoch, loss.structure, loss.modularity, loss.total, loss.Q};
    model.history.push_back(record);
    if (on_epoch) on_epoch(record);

    adam.step(model.params, grad);

    if (config.refinement == WeightRefinement::kPersistent && !config.no_weight_update) {
      double total = 0.0;
      for (double w : refined) total += w;
      if (total > 0.0) {
        for (double& w : refined) w *= base_total / total;
      }
      WeightedGraph working = tg->graph.with_slot_weights(refined, 1e-12 * base_total / std::max(total, 1e-300));
      tg = std::make_unique<TrainingGraph>(std::move(working), nodes, config.self_loop);
      sampler = std::make_unique<NegativeSampler>(tg->graph, config.negatives);
      refined = tg->base_weights();
    }

    // The loss is stochastic (fresh samples every epoch), so convergence is
    // judged on its exponential moving average.
    smoothed = epoch == 0 ? loss.total : kSmoothing * smoothed + (1.0 - kSmoothing) * loss.total;
    if (smoothed < best - config.min_improvement) {
      best = smoothed;
      stalled = 0;
    } else if (++stalled >= config.patience) {
      break;
    }
  }

  model.refined_subgraph = tg->graph.with_slot_weights(refined, 1e-12);
  model.training_centers = centers;
  return model;
}

Inference infer(const WeightedGraph& graph, const TrainedModel& model, int K) {
  if (static_cast<std::size_t>(model.params.embedding.rows()) != graph.node_count()) {
    throw std::invalid_argument("infer: model covers " + std::to_string(model.params.embedding.rows()) +
                                " nodes but the graph has " + std::to_string(graph.node_count()));
  }
  Inference out;
  out.topology = AttentionTopology(graph, model.config.self_loop);
  ForwardPass pass =
      network_forward(out.topology, model.params.embedding, model.params.layers, model.config.attention_options());
  std::optional<Matrix> init;
  if (model.config.reuse_training_centers && model.training_centers && model.training_centers->rows() == K) {
    init = model.training_centers;
  }
  out.assignment = fcm_fit(pass.output, K, derive_seed(model.config.seed, kFcm), fcm_options(model.config), init);
  out.representations = std::move(pass.output);
  out.attention = std::move(pass.attention);
  return out;
}

double gradient_check(const TrainConfig& config, const WeightedGraph& graph, int K, const GradientCheckOptions& opts) {
  if (graph.node_count() > 8) throw std::invalid_argument("gradient_check: graph must have at most 8 nodes");
  const std::size_t n = graph.node_count();
  std::vector<NodeId> rows(n);
  std::iota(rows.begin(), rows.end(), NodeId{0});
  const TrainingGraph tg(graph, rows, config.self_loop);
  const AttentionOptions options = config.attention_options();

  ModelParams params = init_model(config.shape(n), derive_seed(config.seed, kInit));
  const ForwardPass pass = forward(params, tg, options);
  const std::vector<int> labels =
      fcm_fit(pass.output, K, derive_seed(config.seed, kFcm), fcm_options(config)).labels;
  NegativeSampler sampler(tg.graph, config.negatives);
  std::mt19937_64 rng(derive_seed(config.seed, kSamples));
  const StructureSamples samples = draw_structure_samples(tg.graph, sampler, rng);

  ModelParams analytic;
  evaluate(pass, params, tg, labels, samples, config, &analytic, nullptr);

  auto loss_at = [&]() {
    const ForwardPass p = forward(params, tg, options);
    return evaluate(p, params, tg, labels, samples, config, nullptr, nullptr).total;
  };
  auto values = blocks(params);
  auto grads = blocks(analytic);
  double worst = 0.0;
  for (std::size_t b = 0; b < values.size(); ++b) {
    for (std::size_t k = 0; k < values[b].size(); ++k) {
      const double saved = values[b][k];
      values[b][k] = saved + opts.step;
      const double up = loss_at();
      values[b][k] = saved - opts.step;
      const double down = loss_at();
      values[b][k] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = grads[b][k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

std::string loss_history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,L_G,L_M,total,Q\n";
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << format_double(r.structure) << ',' << format_double(r.modularity_loss) << ','
        << format_double(r.total) << ',' << format_double(r.Q) << '\n';
  }
  return out.str();
}

}  // namespace ceegcn
