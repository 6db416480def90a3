#include "ceegcn/ewsgat.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "ceegcn/entmax.hpp"

namespace ceegcn {

namespace {

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

void normalize_scores(std::span<const double> logits, const AttentionOptions& options, std::span<double> out) {
  if (options.normalizer == Normalizer::kSoftmax) {
    softmax_into(logits, out);
  } else {
    entmax_into(logits, options.alpha, out);
  }
}

void normalize_jvp(std::span<const double> p, const AttentionOptions& options, std::span<const double> upstream,
                   std::span<double> grad) {
  if (options.normalizer == Normalizer::kSoftmax) {
    softmax_jvp_into(p, upstream, grad);
  } else {
    entmax_jvp_into(p, options.alpha, upstream, grad);
  }
}

void fill_uniform(Matrix& m, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
  }
}

}  // namespace

double self_loop_weight(const WeightedGraph& g, NodeId i, SelfLoopMode mode) {
  auto nbrs = g.neighbors(i);
  if (nbrs.empty()) return 1.0;
  double acc = mode == SelfLoopMode::kMin ? nbrs.front().weight : 0.0;
  for (const Neighbor& nb : nbrs) {
    switch (mode) {
      case SelfLoopMode::kMax: acc = std::max(acc, nb.weight); break;
      case SelfLoopMode::kMin: acc = std::min(acc, nb.weight); break;
      case SelfLoopMode::kMean: acc += nb.weight; break;
    }
  }
  return mode == SelfLoopMode::kMean ? acc / static_cast<double>(nbrs.size()) : acc;
}

std::vector<std::pair<NodeId, double>> edge_weight_factor(const WeightedGraph& g, NodeId i, SelfLoopMode mode) {
  const double self = self_loop_weight(g, i, mode);
  const double denom = g.weighted_degree(i) + self;
  std::vector<std::pair<NodeId, double>> out;
  out.reserve(g.degree(i) + 1);
  out.emplace_back(i, self / denom);
  for (const Neighbor& nb : g.neighbors(i)) out.emplace_back(nb.id, nb.weight / denom);
  return out;
}

AttentionTopology::AttentionTopology(const WeightedGraph& g, SelfLoopMode self_loop) {
  const std::size_t n = g.node_count();
  offsets_.resize(n + 1, 0);
  targets_.reserve(g.directed_edge_count() + n);
  factors_.reserve(g.directed_edge_count() + n);
  graph_slots_.reserve(g.directed_edge_count() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<NodeId>(i);
    const auto f = edge_weight_factor(g, id, self_loop);
    targets_.push_back(id);
    factors_.push_back(f.front().second);
    graph_slots_.push_back(kSelf);
    const std::size_t base = g.offset(id);
    for (std::size_t k = 1; k < f.size(); ++k) {
      targets_.push_back(f[k].first);
      factors_.push_back(f[k].second);
      graph_slots_.push_back(base + k - 1);
    }
    offsets_[i + 1] = targets_.size();
  }
}

std::size_t AttentionTopology::find(NodeId i, NodeId z) const {
  const std::size_t b = begin(i);
  if (targets_[b] == z) return b;
  auto first = targets_.begin() + static_cast<std::ptrdiff_t>(b + 1);
  auto last = targets_.begin() + static_cast<std::ptrdiff_t>(end(i));
  auto it = std::lower_bound(first, last, z);
  return (it != last && *it == z) ? static_cast<std::size_t>(it - targets_.begin()) : npos;
}

ModelParams init_model(const ModelShape& shape, std::uint64_t seed) {
  if (shape.layer_count < 1 || shape.head_count < 1) throw std::invalid_argument("init_model: need at least one layer and one head");
  std::mt19937_64 rng(seed);
  ModelParams model;
  model.embedding.resize(static_cast<Eigen::Index>(shape.node_count), static_cast<Eigen::Index>(shape.embedding_dim));
  fill_uniform(model.embedding, 0.05, rng);
  std::size_t d_in = shape.embedding_dim;
  for (std::size_t l = 0; l < shape.layer_count; ++l) {
    LayerParams layer;
    // Widened by sqrt(T) so that averaging T independent heads keeps the
    // activation scale of a single head.
    const double w2_bound = std::sqrt(6.0 * static_cast<double>(shape.head_count) /
                                      static_cast<double>(d_in + shape.hidden_dim));
    for (std::size_t t = 0; t < shape.head_count; ++t) {
      AttentionHead head;
      head.W1.resize(static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(shape.attention_dim));
      head.W2.resize(static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(shape.hidden_dim));
      fill_uniform(head.W1, std::sqrt(6.0 / static_cast<double>(d_in + shape.attention_dim)), rng);
      fill_uniform(head.W2, w2_bound, rng);
      layer.heads.push_back(std::move(head));
    }
    layer.gamma = Vector::Constant(static_cast<Eigen::Index>(shape.head_count), 1.0 / static_cast<double>(shape.head_count));
    model.layers.push_back(std::move(layer));
    d_in = shape.hidden_dim;
  }
  return model;
}

Matrix layer_forward(const AttentionTopology& topo, const Matrix& input, const LayerParams& params,
                     const AttentionOptions& options, LayerCache* cache, std::size_t layer_index) {
  const auto n = static_cast<Eigen::Index>(topo.node_count());
  if (input.rows() != n) throw std::invalid_argument("layer_forward: input has wrong row count");
  if (params.heads.empty() || static_cast<std::size_t>(params.gamma.size()) != params.heads.size()) {
    throw std::invalid_argument("layer_forward: head / gamma count mismatch");
  }
  const Eigen::Index d_out = params.heads.front().W2.cols();
  Matrix output = Matrix::Zero(n, d_out);
  if (cache) {
    cache->input = input;
    cache->projected.clear();
    cache->values.clear();
    cache->pre.clear();
    cache->attention.clear();
  }

  std::vector<double> logits, weights;
  for (std::size_t t = 0; t < params.heads.size(); ++t) {
    const AttentionHead& head = params.heads[t];
    if (head.W1.rows() != input.cols() || head.W2.rows() != input.cols() || head.W2.cols() != d_out) {
      throw std::invalid_argument("layer_forward: projection shape mismatch in head " + std::to_string(t));
    }
    Matrix P = input * head.W1;
    Matrix V = input * head.W2;
    Matrix pre = Matrix::Zero(n, d_out);
    std::vector<double> attention(topo.slot_count());

    for (Eigen::Index i = 0; i < n; ++i) {
      const auto node = static_cast<NodeId>(i);
      const std::size_t b = topo.begin(node), e = topo.end(node);
      logits.resize(e - b);
      weights.resize(e - b);
      for (std::size_t s = b; s < e; ++s) {
        const double sim = P.row(i).dot(P.row(topo.target(s)));
        logits[s - b] = options.use_weight_factor ? topo.factor(s) + sim : sim;
      }
      normalize_scores(logits, options, weights);
      for (std::size_t s = b; s < e; ++s) {
        const double a = weights[s - b];
        attention[s] = a;
        if (a != 0.0) pre.row(i).noalias() += a * V.row(topo.target(s));
      }
      for (Eigen::Index c = 0; c < d_out; ++c) {
        const double v = pre(i, c);
        if (!std::isfinite(v)) {
          throw std::runtime_error("non-finite activation at node " + std::to_string(i) + ", layer " +
                                   std::to_string(layer_index) + ", head " + std::to_string(t));
        }
        output(i, c) += params.gamma[static_cast<Eigen::Index>(t)] * elu(v);
      }
    }
    if (cache) {
      cache->projected.push_back(std::move(P));
      cache->values.push_back(std::move(V));
      cache->pre.push_back(std::move(pre));
      cache->attention.push_back(std::move(attention));
    }
  }
  return output;
}

Matrix layer_backward(const AttentionTopology& topo, const LayerCache& cache, const LayerParams& params,
                      const AttentionOptions& options, const Matrix& output_grad,
                      const std::vector<std::vector<double>>& attention_grad, LayerGrads& grads) {
  const auto n = static_cast<Eigen::Index>(topo.node_count());
  const Matrix& input = cache.input;
  Matrix input_grad = Matrix::Zero(input.rows(), input.cols());
  grads.heads.resize(params.heads.size());
  grads.gamma = Vector::Zero(params.gamma.size());

  std::vector<double> upstream, logit_grad;
  for (std::size_t t = 0; t < params.heads.size(); ++t) {
    const AttentionHead& head = params.heads[t];
    const Matrix& P = cache.projected[t];
    const Matrix& V = cache.values[t];
    const Matrix& pre = cache.pre[t];
    const std::vector<double>& attention = cache.attention[t];
    const double gamma = params.gamma[static_cast<Eigen::Index>(t)];

    Matrix pre_grad(pre.rows(), pre.cols());
    double gamma_grad = 0.0;
    for (Eigen::Index i = 0; i < pre.rows(); ++i) {
      for (Eigen::Index c = 0; c < pre.cols(); ++c) {
        const double x = pre(i, c);
        gamma_grad += output_grad(i, c) * elu(x);
        pre_grad(i, c) = gamma * output_grad(i, c) * elu_grad(x);
      }
    }
    grads.gamma[static_cast<Eigen::Index>(t)] = gamma_grad;

    Matrix P_grad = Matrix::Zero(P.rows(), P.cols());
    Matrix V_grad = Matrix::Zero(V.rows(), V.cols());
    const bool extra = !attention_grad.empty();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto node = static_cast<NodeId>(i);
      const std::size_t b = topo.begin(node), e = topo.end(node);
      upstream.resize(e - b);
      logit_grad.resize(e - b);
      for (std::size_t s = b; s < e; ++s) {
        const NodeId z = topo.target(s);
        double g = pre_grad.row(i).dot(V.row(z));
        if (extra) g += attention_grad[t][s];
        upstream[s - b] = g;
        if (attention[s] != 0.0) V_grad.row(z).noalias() += attention[s] * pre_grad.row(i);
      }
      normalize_jvp(std::span<const double>(attention.data() + b, e - b), options, upstream, logit_grad);
      for (std::size_t s = b; s < e; ++s) {
        const double g = logit_grad[s - b];
        if (g == 0.0) continue;
        const NodeId z = topo.target(s);
        P_grad.row(i).noalias() += g * P.row(z);
        P_grad.row(z).noalias() += g * P.row(i);
      }
    }
    grads.heads[t].W1.noalias() = input.transpose() * P_grad;
    grads.heads[t].W2.noalias() = input.transpose() * V_grad;
    input_grad.noalias() += P_grad * head.W1.transpose();
    input_grad.noalias() += V_grad * head.W2.transpose();
  }
  return input_grad;
}

ForwardPass network_forward(const AttentionTopology& topo, const Matrix& input,
                            std::span<const LayerParams> layers, const AttentionOptions& options) {
  if (layers.empty()) throw std::invalid_argument("network_forward: model has no layers");
  ForwardPass pass;
  pass.caches.resize(layers.size());
  Matrix h = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = layer_forward(topo, h, layers[l], options, &pass.caches[l], l);
    pass.attention.per_head.push_back(pass.caches[l].attention);
  }
  const auto& last = pass.attention.per_head.back();
  pass.attention.final_mean.assign(topo.slot_count(), 0.0);
  for (const auto& head : last) {
    for (std::size_t s = 0; s < head.size(); ++s) pass.attention.final_mean[s] += head[s];
  }
  for (double& v : pass.attention.final_mean) v /= static_cast<double>(last.size());
  pass.output = std::move(h);
  return pass;
}

ModelGrads network_backward(const AttentionTopology& topo, const ForwardPass& pass,
                            std::span<const LayerParams> layers, const AttentionOptions& options,
                            const Matrix& output_grad, std::span<const double> final_attention_grad) {
  ModelGrads grads;
  grads.layers.resize(layers.size());
  Matrix g = output_grad;
  for (std::size_t l = layers.size(); l-- > 0;) {
    std::vector<std::vector<double>> attention_grad;
    if (l + 1 == layers.size() && !final_attention_grad.empty()) {
      const double share = 1.0 / static_cast<double>(layers[l].heads.size());
      attention_grad.assign(layers[l].heads.size(), std::vector<double>(topo.slot_count()));
      for (auto& head : attention_grad) {
        for (std::size_t s = 0; s < head.size(); ++s) head[s] = share * final_attention_grad[s];
      }
    }
    g = layer_backward(topo, pass.caches[l], layers[l], options, g, attention_grad, grads.layers[l]);
  }
  grads.input = std::move(g);
  return grads;
}

Matrix gather_rows(const Matrix& m, std::span<const NodeId> nodes) {
  Matrix out(static_cast<Eigen::Index>(nodes.size()), m.cols());
  for (std::size_t k = 0; k < nodes.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(nodes[k]);
  return out;
}

}  // namespace ceegcn
