#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "ceegcn/checkpoint.hpp"
#include "ceegcn/datasets.hpp"
#include "ceegcn/metrics.hpp"
#include "ceegcn/text_io.hpp"
#include "ceegcn/trainer.hpp"

namespace ceegcn::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fnv1a_hex(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

/// Record of one invocation, written as manifest.json.
struct Manifest {
  std::string command;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, hash
  std::vector<std::string> outputs;
  json extra = json::object();
  Clock::time_point start = Clock::now();

  void input(const fs::path& p) { inputs.emplace_back(p.string(), fnv1a_hex(p)); }
  fs::path output(const fs::path& p) {
    outputs.push_back(p.string());
    return p;
  }

  void write(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    outputs.push_back(path.string());
    json j;
    j["command"] = command;
    j["seed"] = seed;
    json cfg = json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = cfg;
    json in = json::array();
    for (const auto& [p, h] : inputs) in.push_back({{"path", p}, {"fnv1a64", h}});
    j["inputs"] = in;
    j["outputs"] = outputs;
    j["wall_clock_seconds"] = seconds_since(start);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    write_text(path, j.dump(2) + "\n");
  }
};

std::string assignment_csv(const ClusterAssignment& a, std::span<const std::string> ids) {
  std::ostringstream out;
  out << "node,label";
  for (Eigen::Index k = 0; k < a.Y.cols(); ++k) out << ",Y_" << k;
  out << '\n';
  for (Eigen::Index i = 0; i < a.Y.rows(); ++i) {
    out << ids[static_cast<std::size_t>(i)] << ',' << a.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < a.Y.cols(); ++k) out << ',' << format_double(a.Y(i, k));
    out << '\n';
  }
  return out.str();
}

/// Reads `node,label,...` rows of an assignment CSV.
std::vector<std::pair<std::string, int>> read_assignment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::pair<std::string, int>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_on(line, ',');
    if (line_no == 1 && fields.size() >= 2 && fields[0] == "node") continue;
    int label = 0;
    if (fields.size() < 2 || !parse_int(fields[1], label)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected node,label");
    }
    rows.emplace_back(std::string(fields[0]), label);
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no assignments");
  return rows;
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

/// Options shared by commands that build a TrainConfig.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> settings;
  std::vector<std::string> ablations;
  std::uint64_t seed = 0;
  bool seed_given = false;

  void add(CLI::App* app, bool with_ablation) {
    app->add_option("--config", config_file, "Config file with `key = value` lines")->check(CLI::ExistingFile);
    app->add_option("--set", settings, "Override a config key: key=value (repeatable)");
    if (with_ablation) {
      app->add_option("--ablation", ablations, "cgc | ewsgat | entmax | f_iz | ewo | no-contraction (repeatable)");
    }
  }

  TrainConfig build() const {
    TrainConfig c;
    if (!config_file.empty()) {
      for (const auto& [k, v] : read_config_file(config_file)) apply_setting(c, k, v);
    }
    for (const std::string& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
      apply_setting(c, std::string(s.substr(0, eq)), s.substr(eq + 1));
    }
    for (const std::string& a : ablations) apply_ablation(c, a);
    if (seed_given) c.seed = seed;
    validate(c);
    return c;
  }
};

struct TrainJob {
  fs::path graph_path;
  fs::path labels_path;
  int K = 0;
  TrainConfig config;
  fs::path out;
};

struct TrainOutcome {
  std::uint64_t seed = 0;
  std::optional<double> acc;
  double train_seconds = 0.0;
  std::size_t epochs = 0;
};

TrainOutcome run_train(const TrainJob& job, bool quiet) {
  Manifest m;
  m.command = "train";
  m.seed = job.config.seed;
  m.config = to_key_values(job.config);
  m.input(job.graph_path);
  fs::create_directories(job.out);
  const LoadedGraph loaded = load_edge_list(job.graph_path);

  const auto t0 = Clock::now();
  const TrainedModel model = train(loaded.graph, job.K, job.config, [&](const EpochRecord& r) {
    if (!quiet && (r.epoch % 10 == 0)) {
      std::cerr << "seed " << job.config.seed << " epoch " << r.epoch << " L=" << r.total << " Q=" << r.Q << '\n';
    }
  });
  const double train_seconds = seconds_since(t0);
  const auto t1 = Clock::now();
  const Inference inference = infer(loaded.graph, model, job.K);
  const double infer_seconds = seconds_since(t1);

  save_checkpoint(m.output(job.out / "checkpoint.txt"), model);
  write_text(m.output(job.out / "loss_history.csv"), loss_history_csv(model.history));
  write_text(m.output(job.out / "config.txt"), to_config_text(job.config));
  write_text(m.output(job.out / "assignment.csv"), assignment_csv(inference.assignment, loaded.external_ids));
  save_id_map(m.output(job.out / "id_map.tsv"), loaded.external_ids);

  TrainOutcome outcome{job.config.seed, std::nullopt, train_seconds, model.history.size()};
  if (!job.labels_path.empty()) {
    m.input(job.labels_path);
    const std::vector<int> truth = load_labels(job.labels_path, loaded.external_ids);
    EvalReport report = evaluate_clustering(inference.assignment.labels, truth);
    report.modularity = modularity(loaded.graph, inference.assignment.labels);
    write_text(m.output(job.out / "eval.json"), to_json(report));
    outcome.acc = report.acc;
  }
  m.extra["K"] = job.K;
  m.extra["train_seconds"] = train_seconds;
  m.extra["infer_seconds"] = infer_seconds;
  m.extra["epochs_run"] = model.history.size();
  m.extra["nodes_before_contraction"] = loaded.graph.node_count();
  m.extra["nodes_after_contraction"] = model.trained_nodes.size();
  m.extra["edges_before_contraction"] = model.edges_before_contraction;
  m.extra["edges_after_contraction"] = model.edges_after_contraction;
  if (outcome.acc) m.extra["acc"] = *outcome.acc;
  m.write(job.out);
  return outcome;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Weighted-graph clustering: contraction, edge-weight-aware sparse attention, fuzzy C-means"};
  app.require_subcommand(1);
  std::string out = "out";
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    return sub->add_option("--seed", seed, "Random seed")->capture_default_str();
  };

  // build-ml100k
  auto* ml = app.add_subcommand("build-ml100k", "Build the MovieLens 100K co-rating graph");
  std::string udata, uitem;
  ml->add_option("--udata", udata, "u.data")->required()->check(CLI::ExistingFile);
  ml->add_option("--uitem", uitem, "u.item")->required()->check(CLI::ExistingFile);
  add_common(ml);

  // synth
  auto* sy = app.add_subcommand("synth", "Generate a weighted stochastic block model");
  SbmParams sbm;
  double noise = 0.0;
  std::string noise_weight = "empirical";
  sy->add_option("--n", sbm.n)->capture_default_str();
  sy->add_option("--K", sbm.K)->capture_default_str();
  sy->add_option("--p-in", sbm.p_in)->capture_default_str();
  sy->add_option("--p-out", sbm.p_out)->capture_default_str();
  sy->add_option("--w-in", sbm.w_in_mean, "Mean intra-block weight")->capture_default_str();
  sy->add_option("--w-out", sbm.w_out_mean, "Mean inter-block weight")->capture_default_str();
  sy->add_option("--noise", noise, "Fraction of noise edges to inject")->capture_default_str();
  sy->add_option("--noise-weight", noise_weight, "empirical | unit")->capture_default_str();
  add_common(sy);

  // contract
  auto* co = app.add_subcommand("contract", "Select core nodes and extract the contracted subgraph");
  std::string graph_path;
  int K = 0;
  ConfigFlags contract_flags;
  co->add_option("--graph", graph_path, "Edge list")->required()->check(CLI::ExistingFile);
  co->add_option("--K", K, "Number of clusters")->required();
  contract_flags.add(co, false);
  auto* co_seed = add_common(co);

  // train
  auto* tr = app.add_subcommand("train", "Train and cluster");
  ConfigFlags train_flags;
  std::string labels_path;
  int sweep = 0;
  int jobs = 1;
  bool quiet = false;
  tr->add_option("--graph", graph_path, "Edge list")->required()->check(CLI::ExistingFile);
  tr->add_option("--K", K, "Number of clusters")->required();
  tr->add_option("--labels", labels_path, "Ground-truth labels; writes eval.json")->check(CLI::ExistingFile);
  tr->add_option("--sweep-seeds", sweep, "Train seeds seed..seed+N-1 into seed_<s>/ subdirectories");
  tr->add_option("--jobs", jobs, "Parallel runs in sweep mode")->capture_default_str();
  tr->add_flag("--quiet", quiet, "No per-epoch progress");
  train_flags.add(tr, true);
  auto* tr_seed = add_common(tr);

  // infer
  auto* in = app.add_subcommand("infer", "Cluster a graph with a trained checkpoint");
  std::string checkpoint_path;
  in->add_option("--checkpoint", checkpoint_path)->required()->check(CLI::ExistingFile);
  in->add_option("--graph", graph_path, "Edge list")->required()->check(CLI::ExistingFile);
  in->add_option("--K", K, "Number of clusters (default: from checkpoint)");
  add_common(in);

  // eval
  auto* ev = app.add_subcommand("eval", "Score an assignment against ground truth");
  std::string pred_path;
  std::string eval_graph;
  ev->add_option("--pred", pred_path, "Assignment CSV (node,label,...)")->required()->check(CLI::ExistingFile);
  ev->add_option("--labels", labels_path, "Ground-truth label file")->required()->check(CLI::ExistingFile);
  ev->add_option("--graph", eval_graph, "Edge list for reporting modularity")->check(CLI::ExistingFile);
  add_common(ev);

  // attention-dump
  auto* ad = app.add_subcommand("attention-dump", "Per-edge final-layer head-averaged attention");
  ad->add_option("--checkpoint", checkpoint_path)->required()->check(CLI::ExistingFile);
  ad->add_option("--graph", graph_path, "Edge list")->required()->check(CLI::ExistingFile);
  add_common(ad);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (ml->parsed()) {
      Manifest m;
      m.command = "build-ml100k";
      m.seed = seed;
      m.input(udata);
      m.input(uitem);
      const fs::path dir = prepare_out(out);
      const Ml100kDataset ds = build_ml100k(udata, uitem);
      save_edge_list(m.output(dir / "graph.tsv"), ds.graph.graph, ds.item_ids);
      save_labels(m.output(dir / "labels.tsv"), ds.graph.labels, ds.item_ids);
      write_text(m.output(dir / "report.json"), to_json(ds.report));
      m.extra["nodes"] = ds.report.node_count;
      m.extra["edges"] = ds.report.edge_count;
      m.extra["clusters"] = ds.report.cluster_count;
      m.write(dir);
    } else if (sy->parsed()) {
      Manifest m;
      m.command = "synth";
      m.seed = seed;
      NoiseWeight nw;
      if (noise_weight == "empirical") nw = NoiseWeight::kEmpirical;
      else if (noise_weight == "unit") nw = NoiseWeight::kUnit;
      else throw std::invalid_argument("--noise-weight must be empirical or unit");
      m.config = {{"n", std::to_string(sbm.n)},           {"K", std::to_string(sbm.K)},
                  {"p_in", format_double(sbm.p_in)},      {"p_out", format_double(sbm.p_out)},
                  {"w_in", format_double(sbm.w_in_mean)}, {"w_out", format_double(sbm.w_out_mean)},
                  {"noise", format_double(noise)},        {"noise_weight", noise_weight}};
      const fs::path dir = prepare_out(out);
      LabeledGraph lg = synth_weighted_sbm(sbm, seed);
      std::vector<Edge> added;
      if (noise > 0.0) {
        NoisyGraph ng = inject_noise_edges(lg.graph, noise, seed + 1, nw);
        lg.graph = std::move(ng.graph);
        added = std::move(ng.added);
      }
      save_edge_list(m.output(dir / "graph.tsv"), lg.graph);
      save_labels(m.output(dir / "labels.tsv"), lg.labels);
      if (noise > 0.0) {
        std::ostringstream ne;
        for (const Edge& e : added) ne << e.u << '\t' << e.v << '\t' << format_double(e.w) << '\n';
        write_text(m.output(dir / "noise_edges.tsv"), ne.str());
      }
      m.extra["nodes"] = lg.graph.node_count();
      m.extra["edges"] = lg.graph.edge_count();
      m.extra["noise_edges"] = added.size();
      m.write(dir);
    } else if (co->parsed()) {
      contract_flags.seed = seed;
      contract_flags.seed_given = co_seed->count() > 0;
      const TrainConfig c = contract_flags.build();
      Manifest m;
      m.command = "contract";
      m.seed = c.seed;
      m.config = to_key_values(c);
      m.input(graph_path);
      const fs::path dir = prepare_out(out);
      const LoadedGraph loaded = load_edge_list(graph_path);
      ContractionConfig cc;
      cc.core_count = c.core_count;
      cc.epsilon = c.epsilon;
      cc.phi = c.phi;
      cc.importance_threshold = c.importance_threshold;
      cc.keep_quantile = c.keep_quantile;
      cc.distance_mode = c.distance_mode;
      const auto t0 = Clock::now();
      const SubgraphSelection sel = contract(loaded.graph, cc, K);
      const double secs = seconds_since(t0);
      std::vector<std::string> sub_ids;
      std::ostringstream map_text;
      for (std::size_t k = 0; k < sel.selected.size(); ++k) {
        const std::string& id = loaded.external_ids[static_cast<std::size_t>(sel.selected[k])];
        sub_ids.push_back(id);
        map_text << id << '\t' << k << '\n';
      }
      save_edge_list(m.output(dir / "subgraph.tsv"), sel.subgraph, sub_ids);
      write_text(m.output(dir / "selection.tsv"), map_text.str());
      std::ostringstream cores;
      for (NodeId v : sel.core_nodes) cores << loaded.external_ids[static_cast<std::size_t>(v)] << '\n';
      write_text(m.output(dir / "cores.txt"), cores.str());
      m.extra["contract_seconds"] = secs;
      m.extra["importance_threshold_used"] = sel.threshold;
      m.extra["nodes_before_contraction"] = loaded.graph.node_count();
      m.extra["nodes_after_contraction"] = sel.selected.size();
      m.extra["edges_before_contraction"] = loaded.graph.edge_count();
      m.extra["edges_after_contraction"] = sel.subgraph.edge_count();
      m.write(dir);
    } else if (tr->parsed()) {
      train_flags.seed = seed;
      train_flags.seed_given = tr_seed->count() > 0;
      const TrainConfig base = train_flags.build();
      const fs::path dir = prepare_out(out);
      if (sweep <= 0) {
        run_train({graph_path, labels_path, K, base, dir}, quiet);
      } else {
        std::vector<TrainJob> work;
        for (int s = 0; s < sweep; ++s) {
          TrainConfig c = base;
          c.seed = base.seed + static_cast<std::uint64_t>(s);
          work.push_back({graph_path, labels_path, K, c, dir / ("seed_" + std::to_string(c.seed))});
        }
        std::vector<TrainOutcome> outcomes(work.size());
        std::vector<std::string> errors(work.size());
        std::mutex next_mutex;
        std::size_t next = 0;
        auto worker = [&] {
          for (;;) {
            std::size_t k;
            {
              std::lock_guard<std::mutex> lock(next_mutex);
              if (next >= work.size()) return;
              k = next++;
            }
            try {
              outcomes[k] = run_train(work[k], true);
            } catch (const std::exception& e) {
              errors[k] = e.what();
            }
          }
        };
        std::vector<std::thread> threads;
        for (int t = 0; t < std::max(1, jobs); ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
        for (std::size_t k = 0; k < errors.size(); ++k) {
          if (!errors[k].empty()) throw std::runtime_error("seed " + std::to_string(work[k].config.seed) + ": " + errors[k]);
        }
        json summary;
        json runs = json::array();
        std::vector<double> accs;
        for (const TrainOutcome& o : outcomes) {
          json r = {{"seed", o.seed}, {"train_seconds", o.train_seconds}, {"epochs_run", o.epochs}};
          if (o.acc) {
            r["acc"] = *o.acc;
            accs.push_back(*o.acc);
          }
          runs.push_back(r);
        }
        summary["runs"] = runs;
        if (!accs.empty()) {
          std::sort(accs.begin(), accs.end());
          const std::size_t h = accs.size() / 2;
          summary["median_acc"] = accs.size() % 2 ? accs[h] : 0.5 * (accs[h - 1] + accs[h]);
        }
        write_text(dir / "sweep_summary.json", summary.dump(2) + "\n");
      }
    } else if (in->parsed()) {
      Manifest m;
      m.command = "infer";
      m.input(checkpoint_path);
      m.input(graph_path);
      const fs::path dir = prepare_out(out);
      const TrainedModel model = load_checkpoint(checkpoint_path);
      m.seed = model.config.seed;
      m.config = to_key_values(model.config);
      const LoadedGraph loaded = load_edge_list(graph_path);
      const Inference inference = infer(loaded.graph, model, K > 0 ? K : model.K);
      write_text(m.output(dir / "assignment.csv"), assignment_csv(inference.assignment, loaded.external_ids));
      m.write(dir);
    } else if (ev->parsed()) {
      Manifest m;
      m.command = "eval";
      m.seed = seed;
      m.input(pred_path);
      m.input(labels_path);
      const fs::path dir = prepare_out(out);
      const auto pred_rows = read_assignment(pred_path);
      std::vector<std::string> ids;
      std::vector<int> pred;
      for (const auto& [id, label] : pred_rows) {
        ids.push_back(id);
        pred.push_back(label);
      }
      const std::vector<int> truth = load_labels(labels_path, ids);
      EvalReport report = evaluate_clustering(pred, truth);
      if (!eval_graph.empty()) {
        m.input(eval_graph);
        const LoadedGraph loaded = load_edge_list(eval_graph);
        std::map<std::string, int> by_id;
        for (std::size_t k = 0; k < ids.size(); ++k) by_id[ids[k]] = pred[k];
        std::vector<int> graph_labels;
        for (const std::string& id : loaded.external_ids) {
          auto it = by_id.find(id);
          if (it == by_id.end()) throw std::runtime_error("graph node " + id + " has no predicted label");
          graph_labels.push_back(it->second);
        }
        report.modularity = modularity(loaded.graph, graph_labels);
      }
      write_text(m.output(dir / "eval.json"), to_json(report));
      write_text(m.output(dir / "confusion.csv"), confusion_csv(report.confusion));
      m.extra["acc"] = report.acc;
      m.write(dir);
      std::cout << "acc " << format_double(report.acc) << " micro_f1 " << format_double(report.micro_f1)
                << " macro_f1 " << format_double(report.macro_f1) << '\n';
    } else if (ad->parsed()) {
      Manifest m;
      m.command = "attention-dump";
      m.input(checkpoint_path);
      m.input(graph_path);
      const fs::path dir = prepare_out(out);
      const TrainedModel model = load_checkpoint(checkpoint_path);
      m.seed = model.config.seed;
      const LoadedGraph loaded = load_edge_list(graph_path);
      const Inference inference = infer(loaded.graph, model, model.K);
      std::ostringstream csv;
      csv << "i,j,a_ij\n";
      const AttentionTopology& topo = inference.topology;
      for (std::size_t i = 0; i < loaded.graph.node_count(); ++i) {
        const auto id = static_cast<NodeId>(i);
        for (std::size_t s = topo.begin(id); s < topo.end(id); ++s) {
          if (topo.is_self(s)) continue;
          csv << loaded.external_ids[i] << ',' << loaded.external_ids[static_cast<std::size_t>(topo.target(s))] << ','
              << format_double(inference.attention.final_mean[s]) << '\n';
        }
      }
      write_text(m.output(dir / "attention.csv"), csv.str());
      m.write(dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ceegcn::cli
