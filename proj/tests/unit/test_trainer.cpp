#include <doctest.h>

#include <sstream>

#include "ceegcn/checkpoint.hpp"
#include "ceegcn/metrics.hpp"
#include "ceegcn/trainer.hpp"
#include "helpers.hpp"

using namespace ceegcn;

namespace {

WeightedGraph tiny_graph() {
  const std::vector<Edge> e = {{0, 1, 2},   {1, 2, 1}, {0, 2, 3}, {2, 3, 0.5},
                               {3, 4, 2},   {4, 5, 1}, {3, 5, 4}, {1, 4, 0.7}};
  return WeightedGraph::from_edges(6, e);
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.heads = 2;
  c.layers = 3;
  c.embedding_dim = 4;
  c.attention_dim = 3;
  c.hidden_dim = 3;
  c.seed = 7;
  c.no_contraction = true;
  return c;
}

LabeledGraph two_blocks(std::uint64_t seed) {
  SbmParams p;
  p.n = 40;
  p.K = 2;
  p.p_in = 0.5;
  p.p_out = 0.0;
  p.w_in_mean = 5.0;
  return synth_weighted_sbm(p, seed);
}

TrainConfig small_config(int epochs) {
  TrainConfig c;
  c.heads = 4;
  c.embedding_dim = 16;
  c.attention_dim = 8;
  c.hidden_dim = 8;
  c.epochs = epochs;
  c.patience = 1000;
  c.seed = 3;
  return c;
}

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  if (!same_matrix(a.embedding, b.embedding) || a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].gamma != b.layers[l].gamma) return false;
    for (std::size_t t = 0; t < a.layers[l].heads.size(); ++t) {
      if (!same_matrix(a.layers[l].heads[t].W1, b.layers[l].heads[t].W1)) return false;
      if (!same_matrix(a.layers[l].heads[t].W2, b.layers[l].heads[t].W2)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("gradient_check on a 6-node graph") {
  const WeightedGraph g = tiny_graph();
  SUBCASE("entmax") { CHECK(gradient_check(tiny_config(), g, 2) < 1e-3); }
  SUBCASE("softmax ablation") {
    TrainConfig c = tiny_config();
    c.softmax_instead_of_entmax = true;
    CHECK(gradient_check(c, g, 2) < 1e-3);
  }
  SUBCASE("eta = 0") {
    TrainConfig c = tiny_config();
    c.eta = 0.0;
    c.allow_off_grid = true;
    CHECK(gradient_check(c, g, 2) < 1e-3);
  }
  SUBCASE("graphs over 8 nodes are refused") {
    std::mt19937_64 rng(1);
    CHECK_THROWS(gradient_check(tiny_config(), testing::random_graph(9, 0.3, rng), 2));
  }
}

TEST_CASE("train with zero epochs returns the initialized model") {
  const LabeledGraph lg = two_blocks(1);
  const TrainConfig c = small_config(0);
  const TrainedModel m = train(lg.graph, 2, c);
  CHECK(m.history.empty());
  CHECK(m.params.embedding.rows() == static_cast<Eigen::Index>(lg.graph.node_count()));
  CHECK(m.params.embedding.cwiseAbs().maxCoeff() <= 0.05);
  CHECK(m.params.layers.size() == c.layers);
  CHECK(m.params.layers[0].gamma[0] == doctest::Approx(1.0 / static_cast<double>(c.heads)));
  CHECK(loss_history_csv(m.history) == "epoch,L_G,L_M,total,Q\n");
}

TEST_CASE("training is deterministic") {
  const LabeledGraph lg = two_blocks(2);
  const TrainedModel a = train(lg.graph, 2, small_config(8));
  const TrainedModel b = train(lg.graph, 2, small_config(8));
  CHECK(same_params(a.params, b.params));
  CHECK(loss_history_csv(a.history) == loss_history_csv(b.history));
  CHECK(a.trained_nodes == b.trained_nodes);
  const Inference ia = infer(lg.graph, a, 2);
  const Inference ib = infer(lg.graph, b, 2);
  CHECK(ia.assignment.labels == ib.assignment.labels);
  CHECK(same_matrix(ia.assignment.Y, ib.assignment.Y));
}

TEST_CASE("separable two-block graph is recovered") {
  const LabeledGraph lg = two_blocks(3);
  std::vector<EpochRecord> seen;
  const TrainedModel m = train(lg.graph, 2, small_config(60), [&](const EpochRecord& r) { seen.push_back(r); });
  REQUIRE(m.history.size() == 60);
  CHECK(seen.size() == m.history.size());
  double first = 0.0, last = 0.0;
  for (int k = 0; k < 10; ++k) {
    first += m.history[static_cast<std::size_t>(k)].total;
    last += m.history[m.history.size() - 1 - static_cast<std::size_t>(k)].total;
  }
  CHECK(last < first);
  const Inference inf = infer(lg.graph, m, 2);
  CHECK(clustering_accuracy(inf.assignment.labels, lg.labels).acc == 1.0);
  CHECK(m.edges_after_contraction <= m.edges_before_contraction);

  const std::string csv = loss_history_csv(m.history);
  CHECK(csv.rfind("epoch,L_G,L_M,total,Q\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 61);
}

TEST_CASE("train and infer errors") {
  const LabeledGraph lg = two_blocks(4);
  CHECK_THROWS_AS(train(lg.graph, 1, small_config(1)), std::invalid_argument);
  CHECK_THROWS_AS(train(lg.graph, 41, small_config(1)), std::invalid_argument);
  const TrainedModel m = train(lg.graph, 2, small_config(0));
  CHECK_THROWS(infer(tiny_graph(), m, 2));
}

TEST_CASE("config text, settings and ablations") {
  TrainConfig c;
  CHECK_NOTHROW(validate(c));
  apply_setting(c, "alpha", "1.3");
  apply_setting(c, "heads", "4");
  apply_setting(c, "self_loop", "mean");
  CHECK(c.alpha == 1.3);
  CHECK(c.heads == 4);
  CHECK(c.self_loop == SelfLoopMode::kMean);
  CHECK_THROWS(apply_setting(c, "no_such_key", "1"));
  CHECK_THROWS(apply_setting(c, "heads", "many"));

  TrainConfig round;
  for (const auto& [k, v] : to_key_values(c)) apply_setting(round, k, v);
  CHECK(to_config_text(round) == to_config_text(c));

  TrainConfig off = c;
  off.epsilon = 0.4;
  CHECK_THROWS_AS(validate(off), std::invalid_argument);
  off.allow_off_grid = true;
  CHECK_NOTHROW(validate(off));

  TrainConfig a;
  apply_ablation(a, "CeeGCN-entmax");
  CHECK(a.softmax_instead_of_entmax);
  CHECK(a.attention_options().normalizer == Normalizer::kSoftmax);
  apply_ablation(a, "f_iz");
  CHECK_FALSE(a.attention_options().use_weight_factor);
  apply_ablation(a, "cgc");
  CHECK(a.random_contraction);
  apply_ablation(a, "ewo");
  CHECK(a.no_weight_update);
  apply_ablation(a, "no-contraction");
  CHECK(a.no_contraction);
  TrainConfig v;
  apply_ablation(v, "ewsgat");
  CHECK(v.attention_options().normalizer == Normalizer::kSoftmax);
  CHECK_FALSE(v.attention_options().use_weight_factor);
  CHECK_THROWS(apply_ablation(v, "bogus"));
}

TEST_CASE("checkpoint round-trip gives identical inference") {
  const LabeledGraph lg = two_blocks(5);
  const TrainedModel m = train(lg.graph, 2, small_config(5));
  std::stringstream buf;
  write_checkpoint(buf, m);
  const TrainedModel back = read_checkpoint(buf);
  CHECK(back.K == 2);
  CHECK(same_params(back.params, m.params));
  CHECK(to_config_text(back.config) == to_config_text(m.config));
  CHECK(back.trained_nodes == m.trained_nodes);
  CHECK(back.core_nodes == m.core_nodes);
  const Inference a = infer(lg.graph, m, 2);
  const Inference b = infer(lg.graph, back, 2);
  CHECK(same_matrix(a.representations, b.representations));
  CHECK(a.assignment.labels == b.assignment.labels);

  std::stringstream bad("ceegcn-checkpoint 1\nK two\n");
  CHECK_THROWS_WITH(read_checkpoint(bad), doctest::Contains("line 2"));
  std::stringstream wrong_version("ceegcn-checkpoint 9\n");
  CHECK_THROWS(read_checkpoint(wrong_version));
}
