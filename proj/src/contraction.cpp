#include "ceegcn/contraction.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>

namespace ceegcn {

namespace {

double edge_length(double w, DistanceMode mode) {
  return mode == DistanceMode::kUnit ? 1.0 : 1.0 / w;
}

SubgraphSelection induce_selection(const WeightedGraph& g, std::vector<NodeId> selected,
                                   std::vector<NodeId> cores, double threshold) {
  SubgraphSelection out;
  out.selected = std::move(selected);
  out.core_nodes = std::move(cores);
  out.threshold = threshold;
  out.old_to_new.assign(g.node_count(), -1);
  for (std::size_t k = 0; k < out.selected.size(); ++k) {
    out.old_to_new[static_cast<std::size_t>(out.selected[k])] = static_cast<NodeId>(k);
  }
  out.subgraph = g.induced(out.selected);
  return out;
}

}  // namespace

std::vector<double> node_density(const WeightedGraph& g) {
  std::vector<double> rho(g.node_count());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = g.weighted_degree(static_cast<NodeId>(i));
  return rho;
}

std::vector<double> shortest_paths(const WeightedGraph& g, NodeId source, DistanceMode mode) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.node_count(), inf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<std::size_t>(source)] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (const Neighbor& nb : g.neighbors(u)) {
      const double nd = d + edge_length(nb.weight, mode);
      if (nd < dist[static_cast<std::size_t>(nb.id)]) {
        dist[static_cast<std::size_t>(nb.id)] = nd;
        heap.emplace(nd, nb.id);
      }
    }
  }
  return dist;
}

double unreachable_distance(const WeightedGraph& g, DistanceMode mode) {
  double longest = 1.0;
  if (mode == DistanceMode::kReciprocalWeight) {
    longest = 0.0;
    for (const Neighbor& nb : g.adjacency()) longest = std::max(longest, 1.0 / nb.weight);
    if (longest == 0.0) longest = 1.0;
  }
  return static_cast<double>(g.node_count()) * longest;
}

std::vector<double> distance_to_cores(const WeightedGraph& g, std::span<const NodeId> cores,
                                      DistanceMode mode) {
  if (cores.empty()) throw std::invalid_argument("distance_to_cores: empty core set");
  const double sentinel = unreachable_distance(g, mode);
  std::vector<double> theta(g.node_count(), 0.0);
  for (NodeId c : cores) {
    const auto dist = shortest_paths(g, c, mode);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += std::isinf(dist[i]) ? sentinel : dist[i];
  }
  return theta;
}

std::vector<double> rank_score(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> score(n);
  for (std::size_t r = 0; r < n;) {
    std::size_t end = r;
    while (end < n && values[order[end]] == values[order[r]]) ++end;
    const double shared = static_cast<double>(n - (end - 1));
    for (std::size_t q = r; q < end; ++q) score[order[q]] = shared;
    r = end;
  }
  return score;
}

std::vector<NodeId> select_core_nodes(const WeightedGraph& g, std::size_t core_count,
                                      double epsilon, DistanceMode mode) {
  const std::size_t n = g.node_count();
  if (core_count < 1) throw std::invalid_argument("select_core_nodes: need at least one core node");
  if (core_count > n) {
    throw std::invalid_argument("select_core_nodes: O = " + std::to_string(core_count) +
                                " exceeds node count " + std::to_string(n));
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("select_core_nodes: epsilon must lie in [0, 1]");

  const std::vector<double> rho = node_density(g);
  std::vector<NodeId> cores;
  cores.push_back(static_cast<NodeId>(std::max_element(rho.begin(), rho.end()) - rho.begin()));

  const double sentinel = unreachable_distance(g, mode);
  std::vector<double> theta(n, 0.0);
  std::vector<char> is_core(n, 0);
  is_core[static_cast<std::size_t>(cores[0])] = 1;

  while (cores.size() < core_count) {
    const auto dist = shortest_paths(g, cores.back(), mode);
    for (std::size_t i = 0; i < n; ++i) theta[i] += std::isinf(dist[i]) ? sentinel : dist[i];

    std::vector<NodeId> candidates;
    std::vector<double> cand_rho, cand_theta;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_core[i]) continue;
      candidates.push_back(static_cast<NodeId>(i));
      cand_rho.push_back(rho[i]);
      cand_theta.push_back(theta[i]);
    }
    const auto rank_rho = rank_score(cand_rho);
    const auto rank_theta = rank_score(cand_theta);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const double fused = epsilon * rank_rho[k] + (1.0 - epsilon) * rank_theta[k];
      if (fused > best_score) {
        best_score = fused;
        best = k;
      }
    }
    cores.push_back(candidates[best]);
    is_core[static_cast<std::size_t>(candidates[best])] = 1;
  }
  return cores;
}

std::vector<double> personalized_pagerank(const WeightedGraph& g, NodeId seed, double phi,
                                          const PageRankOptions& options) {
  if (!(phi > 0.0 && phi <= 1.0)) throw std::invalid_argument("personalized_pagerank: phi must lie in (0, 1]");
  const std::size_t n = g.node_count();
  if (seed < 0 || static_cast<std::size_t>(seed) >= n) throw std::invalid_argument("personalized_pagerank: seed out of range");

  std::vector<double> degree(n);
  for (std::size_t i = 0; i < n; ++i) degree[i] = g.weighted_degree(static_cast<NodeId>(i));

  std::vector<double> r(n, 0.0), next(n, 0.0), outflow(n, 0.0);
  r[static_cast<std::size_t>(seed)] = 1.0;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    double dangling = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (degree[j] > 0.0) {
        outflow[j] = r[j] / degree[j];
      } else {
        outflow[j] = 0.0;
        dangling += r[j];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (const Neighbor& nb : g.neighbors(static_cast<NodeId>(i))) {
        acc += nb.weight * outflow[static_cast<std::size_t>(nb.id)];
      }
      next[i] = (1.0 - phi) * acc;
    }
    next[static_cast<std::size_t>(seed)] += phi + (1.0 - phi) * dangling;
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual += std::abs(next[i] - r[i]);
    r.swap(next);
    if (residual < options.tolerance) return r;
  }
  throw std::runtime_error("personalized_pagerank: no convergence after " +
                           std::to_string(options.max_iterations) +
                           " iterations (L1 residual " + std::to_string(residual) + ")");
}

std::size_t default_core_count(std::size_t n, int K) {
  const auto fraction = static_cast<std::size_t>(std::ceil(0.02 * static_cast<double>(n)));
  return std::min(n, std::max(static_cast<std::size_t>(std::max(K, 1)), fraction));
}

SubgraphSelection contract(const WeightedGraph& g, const ContractionConfig& config, int K) {
  const std::size_t n = g.node_count();
  const std::size_t O = config.core_count == 0 ? default_core_count(n, K) : config.core_count;
  if (config.importance_threshold && *config.importance_threshold < 0.0) {
    throw std::invalid_argument("contract: importance threshold must be >= 0");
  }
  if (!(config.keep_quantile >= 0.0 && config.keep_quantile <= 1.0)) {
    throw std::invalid_argument("contract: keep_quantile must lie in [0, 1]");
  }
  std::vector<NodeId> cores = select_core_nodes(g, O, config.epsilon, config.distance_mode);

  std::vector<double> best(n, 0.0);
  for (NodeId c : cores) {
    const auto s = personalized_pagerank(g, c, config.phi);
    for (std::size_t i = 0; i < n; ++i) best[i] = std::max(best[i], s[i]);
  }
  std::vector<char> is_core(n, 0);
  for (NodeId c : cores) is_core[static_cast<std::size_t>(c)] = 1;

  double threshold = 0.0;
  if (config.importance_threshold) {
    threshold = *config.importance_threshold;
  } else {
    std::vector<double> others;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_core[i]) others.push_back(best[i]);
    }
    if (!others.empty()) {
      std::sort(others.begin(), others.end());
      const auto idx = static_cast<std::size_t>(
          std::floor(config.keep_quantile * static_cast<double>(others.size() - 1)));
      threshold = others[idx];
    }
  }

  std::vector<NodeId> selected;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_core[i] || best[i] > threshold) selected.push_back(static_cast<NodeId>(i));
  }
  return induce_selection(g, std::move(selected), std::move(cores), threshold);
}

SubgraphSelection random_contract(const WeightedGraph& g, std::size_t size, std::uint64_t seed) {
  const std::size_t n = g.node_count();
  if (size < 1 || size > n) throw std::invalid_argument("random_contract: size must lie in [1, n]");
  std::vector<NodeId> all(n);
  std::iota(all.begin(), all.end(), NodeId{0});
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < size; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n - 1);
    std::swap(all[k], all[pick(rng)]);
  }
  all.resize(size);
  std::sort(all.begin(), all.end());
  return induce_selection(g, std::move(all), {}, 0.0);
}

}  // namespace ceegcn
