#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <tuple>

#include "ceegcn/contraction.hpp"
#include "ceegcn/entmax.hpp"
#include "ceegcn/metrics.hpp"
#include "ceegcn/objective.hpp"
#include "ceegcn/trainer.hpp"

namespace py = pybind11;
using namespace ceegcn;

namespace {

using EdgeTuple = std::tuple<NodeId, NodeId, double>;

WeightedGraph to_graph(std::size_t n, const std::vector<EdgeTuple>& edges) {
  std::vector<Edge> e;
  e.reserve(edges.size());
  for (const auto& [u, v, w] : edges) e.push_back({u, v, w});
  return WeightedGraph::from_edges(n, e);
}

std::vector<EdgeTuple> to_tuples(const std::vector<Edge>& edges) {
  std::vector<EdgeTuple> out;
  out.reserve(edges.size());
  for (const Edge& e : edges) out.emplace_back(e.u, e.v, e.w);
  return out;
}

TrainConfig to_config(const std::map<std::string, std::string>& settings) {
  TrainConfig c;
  for (const auto& [k, v] : settings) apply_setting(c, k, v);
  validate(c);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Weighted-graph clustering with contraction and sparse graph attention";

  m.def(
      "entmax",
      [](const std::vector<double>& z, double alpha) { return entmax(z, alpha).p; }, py::arg("z"),
      py::arg("alpha") = 1.55);

  m.def(
      "synth_sbm",
      [](std::size_t n, int K, double p_in, double p_out, double w_in, double w_out, std::uint64_t seed) {
        const LabeledGraph lg = synth_weighted_sbm({n, K, p_in, p_out, w_in, w_out}, seed);
        return py::make_tuple(to_tuples(lg.graph.edges()), lg.labels);
      },
      py::arg("n") = 120, py::arg("K") = 4, py::arg("p_in") = 0.5, py::arg("p_out") = 0.05, py::arg("w_in") = 5.0,
      py::arg("w_out") = 1.0, py::arg("seed") = 0, "Returns (edges as (u, v, w) tuples, labels).");

  m.def(
      "modularity",
      [](std::size_t n, const std::vector<EdgeTuple>& edges, const std::vector<int>& labels) {
        return modularity(to_graph(n, edges), labels);
      },
      py::arg("n"), py::arg("edges"), py::arg("labels"));

  m.def(
      "clustering_accuracy",
      [](const std::vector<int>& pred, const std::vector<int>& truth) {
        const AccuracyResult r = clustering_accuracy(pred, truth);
        return py::make_tuple(r.acc, r.mapping);
      },
      py::arg("pred"), py::arg("truth"), "Returns (acc, mapping predicted -> true).");

  m.def(
      "contract",
      [](std::size_t n, const std::vector<EdgeTuple>& edges, int K) {
        ContractionConfig cfg;
        const SubgraphSelection s = contract(to_graph(n, edges), cfg, K);
        return py::make_tuple(s.selected, s.core_nodes);
      },
      py::arg("n"), py::arg("edges"), py::arg("K"), "Returns (kept node ids, core node ids).");

  m.def(
      "cluster",
      [](std::size_t n, const std::vector<EdgeTuple>& edges, int K, const std::map<std::string, std::string>& config) {
        const WeightedGraph g = to_graph(n, edges);
        const TrainConfig c = to_config(config);
        TrainedModel model;
        Inference inf;
        {
          py::gil_scoped_release release;
          model = train(g, K, c);
          inf = infer(g, model, K);
        }
        py::list history;
        for (const EpochRecord& r : model.history) {
          history.append(py::dict(py::arg("epoch") = r.epoch, py::arg("L_G") = r.structure,
                                  py::arg("L_M") = r.modularity_loss, py::arg("total") = r.total, py::arg("Q") = r.Q));
        }
        py::dict out;
        out["labels"] = inf.assignment.labels;
        out["memberships"] = inf.assignment.Y;
        out["representations"] = inf.representations;
        out["history"] = history;
        out["trained_nodes"] = model.trained_nodes;
        return out;
      },
      py::arg("n"), py::arg("edges"), py::arg("K"), py::arg("config") = std::map<std::string, std::string>{},
      "Train on the graph and cluster it. `config` maps setting names to string values.");
}
