#include "ceegcn/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "ceegcn/text_io.hpp"

namespace ceegcn {

namespace {

std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

WeightedGraph WeightedGraph::from_edges(std::size_t n, std::span<const Edge> edges) {
  if (n > static_cast<std::size_t>(std::numeric_limits<NodeId>::max())) {
    throw std::invalid_argument("graph: node count exceeds id range");
  }
  std::vector<Edge> directed;
  directed.reserve(edges.size() * 2);
  for (const Edge& e : edges) {
    if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n ||
        static_cast<std::size_t>(e.v) >= n) {
      throw std::invalid_argument("graph: edge (" + std::to_string(e.u) + ", " +
                                  std::to_string(e.v) + ") references a node outside 0.." +
                                  std::to_string(n) + "-1");
    }
    if (e.u == e.v) {
      throw std::invalid_argument("graph: self-loop on node " + std::to_string(e.u));
    }
    if (!(e.w > 0.0) || !std::isfinite(e.w)) {
      throw std::invalid_argument("graph: edge (" + std::to_string(e.u) + ", " +
                                  std::to_string(e.v) + ") has non-positive weight");
    }
    directed.push_back(e);
    directed.push_back({e.v, e.u, e.w});
  }
  std::sort(directed.begin(), directed.end(), [](const Edge& a, const Edge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });

  WeightedGraph g;
  g.offsets_.assign(n + 1, 0);
  g.adjacency_.reserve(directed.size());
  for (std::size_t k = 0; k < directed.size();) {
    const Edge& first = directed[k];
    // Duplicate addends are summed in sorted order so both orientations get
    // bitwise-identical weights.
    double w = 0.0;
    std::size_t end = k;
    while (end < directed.size() && directed[end].u == first.u && directed[end].v == first.v) {
      ++end;
    }
    std::vector<double> parts;
    parts.reserve(end - k);
    for (std::size_t q = k; q < end; ++q) parts.push_back(directed[q].w);
    std::sort(parts.begin(), parts.end());
    for (double p : parts) w += p;
    g.adjacency_.push_back({first.v, w});
    ++g.offsets_[static_cast<std::size_t>(first.u) + 1];
    k = end;
  }
  for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] += g.offsets_[i];
  for (const Neighbor& nb : g.adjacency_) g.total_weight_2m_ += nb.weight;
  return g;
}

double WeightedGraph::weighted_degree(NodeId i) const {
  double s = 0.0;
  for (const Neighbor& nb : neighbors(i)) s += nb.weight;
  return s;
}

double WeightedGraph::weight(NodeId i, NodeId j) const {
  auto nbrs = neighbors(i);
  auto it = std::lower_bound(nbrs.begin(), nbrs.end(), j,
                             [](const Neighbor& nb, NodeId id) { return nb.id < id; });
  return (it != nbrs.end() && it->id == j) ? it->weight : 0.0;
}

std::vector<Edge> WeightedGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for (std::size_t i = 0; i < node_count(); ++i) {
    for (const Neighbor& nb : neighbors(static_cast<NodeId>(i))) {
      if (static_cast<std::size_t>(nb.id) > i) out.push_back({static_cast<NodeId>(i), nb.id, nb.weight});
    }
  }
  return out;
}

bool WeightedGraph::check_invariants(std::string* why) const {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  const std::size_t n = node_count();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<NodeId>(i);
    auto nbrs = neighbors(id);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const Neighbor& nb = nbrs[k];
      if (nb.id < 0 || static_cast<std::size_t>(nb.id) >= n) return fail("neighbor out of range");
      if (nb.id == id) return fail("stored self-edge on node " + std::to_string(i));
      if (!(nb.weight > 0.0)) return fail("non-positive weight at node " + std::to_string(i));
      if (k > 0 && nbrs[k - 1].id >= nb.id) return fail("neighbor list not strictly sorted");
      if (weight(nb.id, id) != nb.weight) {
        return fail("asymmetric edge (" + std::to_string(i) + ", " + std::to_string(nb.id) + ")");
      }
      total += nb.weight;
    }
  }
  const double scale = std::max(1.0, std::abs(total));
  if (std::abs(total - total_weight_2m_) > 1e-12 * scale) return fail("cached 2m is stale");
  return true;
}

WeightedGraph WeightedGraph::with_slot_weights(std::span<const double> slot_weights,
                                               double prune_below) const {
  if (slot_weights.size() != adjacency_.size()) {
    throw std::invalid_argument("graph: slot weight count mismatch");
  }
  WeightedGraph g;
  const std::size_t n = node_count();
  g.offsets_.assign(n + 1, 0);
  g.adjacency_.reserve(adjacency_.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = offsets_[i]; s < offsets_[i + 1]; ++s) {
      const double w = slot_weights[s];
      if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("graph: invalid slot weight");
      if (w < prune_below || w == 0.0) continue;
      g.adjacency_.push_back({adjacency_[s].id, w});
      g.total_weight_2m_ += w;
    }
    g.offsets_[i + 1] = g.adjacency_.size();
  }
  return g;
}

WeightedGraph WeightedGraph::induced(std::span<const NodeId> nodes) const {
  std::vector<NodeId> remap(node_count(), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (k > 0 && nodes[k - 1] >= nodes[k]) throw std::invalid_argument("induced: ids must be sorted and unique");
    remap[static_cast<std::size_t>(nodes[k])] = static_cast<NodeId>(k);
  }
  WeightedGraph g;
  g.offsets_.assign(nodes.size() + 1, 0);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    for (const Neighbor& nb : neighbors(nodes[k])) {
      const NodeId mapped = remap[static_cast<std::size_t>(nb.id)];
      if (mapped < 0) continue;
      g.adjacency_.push_back({mapped, nb.weight});
      g.total_weight_2m_ += nb.weight;
    }
    g.offsets_[k + 1] = g.adjacency_.size();
  }
  return g;
}

WeightedGraph WeightedGraph::permuted(std::span<const NodeId> perm) const {
  if (perm.size() != node_count()) throw std::invalid_argument("permuted: size mismatch");
  std::vector<Edge> es = edges();
  for (Edge& e : es) {
    e.u = perm[static_cast<std::size_t>(e.u)];
    e.v = perm[static_cast<std::size_t>(e.v)];
  }
  return from_edges(node_count(), es);
}

// ---------------------------------------------------------------------------
// File IO
// ---------------------------------------------------------------------------

LoadedGraph load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list " + path.string());

  struct RawEdge {
    std::string u, v;
    double w;
  };
  std::vector<RawEdge> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty() || fields[0].starts_with('#')) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 3) {
      throw std::runtime_error(where + ": expected `u<TAB>v<TAB>w`, got " +
                               std::to_string(fields.size()) + " fields");
    }
    double w = 0.0;
    if (!parse_double(fields[2], w)) throw std::runtime_error(where + ": cannot parse weight '" + std::string(fields[2]) + "'");
    if (!(w > 0.0) || !std::isfinite(w)) throw std::runtime_error(where + ": rejected line, weight must be > 0");
    if (fields[0] == fields[1]) throw std::runtime_error(where + ": self-loop in input on node " + std::string(fields[0]));
    raw.push_back({std::string(fields[0]), std::string(fields[1]), w});
  }
  if (raw.empty()) throw std::runtime_error(path.string() + ": no edges");

  std::vector<std::string> ids;
  std::unordered_map<std::string, NodeId> index;
  auto intern = [&](const std::string& s) {
    auto [it, inserted] = index.try_emplace(s, static_cast<NodeId>(ids.size()));
    if (inserted) ids.push_back(s);
  };
  for (const RawEdge& e : raw) {
    intern(e.u);
    intern(e.v);
  }
  // Numeric ids keep their numeric order so that re-loading a saved graph
  // reproduces the same dense ids.
  bool all_numeric = true;
  std::vector<std::uint64_t> numeric(ids.size());
  for (std::size_t k = 0; k < ids.size() && all_numeric; ++k) {
    const std::string& s = ids[k];
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), numeric[k]);
    all_numeric = ec == std::errc() && ptr == s.data() + s.size();
  }
  if (all_numeric) {
    std::vector<std::size_t> order(ids.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return numeric[a] < numeric[b]; });
    std::vector<std::string> sorted;
    sorted.reserve(ids.size());
    for (std::size_t k : order) sorted.push_back(ids[k]);
    ids = std::move(sorted);
    for (std::size_t k = 0; k < ids.size(); ++k) index[ids[k]] = static_cast<NodeId>(k);
  }

  std::vector<Edge> edges;
  edges.reserve(raw.size());
  for (const RawEdge& e : raw) edges.push_back({index.at(e.u), index.at(e.v), e.w});
  return {WeightedGraph::from_edges(ids.size(), edges), std::move(ids)};
}

void save_edge_list(const std::filesystem::path& path, const WeightedGraph& g,
                    std::span<const std::string> external_ids) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto name = [&](NodeId i) {
    return external_ids.empty() ? std::to_string(i) : external_ids[static_cast<std::size_t>(i)];
  };
  for (const Edge& e : g.edges()) out << name(e.u) << '\t' << name(e.v) << '\t' << e.w << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void save_id_map(const std::filesystem::path& path, std::span<const std::string> external_ids) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < external_ids.size(); ++i) out << i << '\t' << external_ids[i] << '\n';
}

void save_labels(const std::filesystem::path& path, std::span<const int> labels,
                 std::span<const std::string> external_ids) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (external_ids.empty()) {
      out << i;
    } else {
      out << external_ids[i];
    }
    out << '\t' << labels[i] << '\n';
  }
}

std::vector<std::pair<std::string, int>> load_label_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label file " + path.string());
  std::vector<std::pair<std::string, int>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty() || fields[0].starts_with('#')) continue;
    int label = 0;
    if (fields.size() != 2 || !parse_int(fields[1], label) || label < 0) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected `node<TAB>label` with a non-negative label");
    }
    out.emplace_back(std::string(fields[0]), label);
  }
  return out;
}

std::vector<int> load_labels(const std::filesystem::path& path,
                             std::span<const std::string> external_ids) {
  std::unordered_map<std::string, int> by_id;
  for (auto& [id, label] : load_label_file(path)) by_id[id] = label;
  std::vector<int> labels;
  labels.reserve(external_ids.size());
  for (const std::string& id : external_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::runtime_error(path.string() + ": no label for node " + id);
    labels.push_back(it->second);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

LabeledGraph synth_weighted_sbm(const SbmParams& p, std::uint64_t seed) {
  if (p.K < 1 || static_cast<std::size_t>(p.K) > p.n) throw std::invalid_argument("sbm: need 1 <= K <= n");
  if (!(0.0 <= p.p_out && p.p_out < p.p_in && p.p_in <= 1.0)) {
    throw std::invalid_argument("sbm: need 0 <= p_out < p_in <= 1");
  }
  if (!(p.w_in_mean >= 1.0) || !(p.w_out_mean >= 1.0)) {
    throw std::invalid_argument("sbm: weight means must be >= 1 (weights are 1 + Poisson(mean - 1))");
  }
  LabeledGraph out;
  out.K = p.K;
  out.labels.resize(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    out.labels[i] = static_cast<int>(i * static_cast<std::size_t>(p.K) / p.n);
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto draw_weight = [&](double mean) {
    if (mean <= 1.0) return 1.0;
    std::poisson_distribution<int> extra(mean - 1.0);
    return 1.0 + extra(rng);
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t j = i + 1; j < p.n; ++j) {
      const bool same = out.labels[i] == out.labels[j];
      if (coin(rng) < (same ? p.p_in : p.p_out)) {
        edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j),
                         draw_weight(same ? p.w_in_mean : p.w_out_mean)});
      }
    }
  }
  out.graph = WeightedGraph::from_edges(p.n, edges);
  return out;
}

NoisyGraph inject_noise_edges(const WeightedGraph& g, double fraction, std::uint64_t seed,
                              NoiseWeight weight_mode) {
  if (!(fraction >= 0.0) || !std::isfinite(fraction)) throw std::invalid_argument("noise: fraction must be >= 0");
  const std::size_t n = g.node_count();
  const std::size_t m = g.edge_count();
  const auto wanted = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(m) + 1e-9));
  NoisyGraph out;
  if (wanted == 0) {
    out.graph = g;
    return out;
  }
  const std::size_t pairs = n * (n - 1) / 2;
  const std::size_t free_pairs = pairs - m;
  if (wanted > free_pairs) {
    throw std::invalid_argument("noise: requested " + std::to_string(wanted) +
                                " edges but only " + std::to_string(free_pairs) + " non-edges remain");
  }

  std::mt19937_64 rng(seed);
  std::vector<Edge> original = g.edges();
  std::vector<std::pair<NodeId, NodeId>> chosen;
  chosen.reserve(wanted);
  if (wanted * 2 > free_pairs) {
    std::vector<std::pair<NodeId, NodeId>> candidates;
    candidates.reserve(free_pairs);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!g.has_edge(static_cast<NodeId>(i), static_cast<NodeId>(j))) {
          candidates.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
        }
      }
    }
    for (std::size_t k = 0; k < wanted; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
      std::swap(candidates[k], candidates[pick(rng)]);
      chosen.push_back(candidates[k]);
    }
  } else {
    std::unordered_set<std::uint64_t> taken;
    taken.reserve(wanted * 2);
    std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
    while (chosen.size() < wanted) {
      NodeId a = node(rng);
      NodeId b = node(rng);
      if (a == b || g.has_edge(a, b)) continue;
      if (!taken.insert(pair_key(a, b)).second) continue;
      chosen.emplace_back(std::min(a, b), std::max(a, b));
    }
  }

  std::uniform_int_distribution<std::size_t> pick_edge(0, original.size() - 1);
  for (auto [a, b] : chosen) {
    const double w = weight_mode == NoiseWeight::kUnit ? 1.0 : original[pick_edge(rng)].w;
    out.added.push_back({a, b, w});
  }
  std::vector<Edge> all = original;
  all.insert(all.end(), out.added.begin(), out.added.end());
  out.graph = WeightedGraph::from_edges(n, all);
  return out;
}

}  // namespace ceegcn
