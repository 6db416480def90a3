#include "ceegcn/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ceegcn/text_io.hpp"

namespace ceegcn {

namespace {

constexpr const char* kMagic = "ceegcn-checkpoint";
constexpr int kVersion = 1;

void write_matrix(std::ostream& out, const std::string& name, const double* data, Eigen::Index rows,
                  Eigen::Index cols) {
  out << "matrix " << name << ' ' << rows << ' ' << cols << '\n';
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (c) out << ' ';
      out << format_double(data[r * cols + c]);
    }
    out << '\n';
  }
}

void write_nodes(std::ostream& out, const char* name, const std::vector<NodeId>& nodes) {
  out << "nodes " << name << ' ' << nodes.size();
  for (NodeId v : nodes) out << ' ' << v;
  out << '\n';
}

[[noreturn]] void bad(std::size_t line, const std::string& why) {
  throw std::runtime_error("checkpoint line " + std::to_string(line) + ": " + why);
}

}  // namespace

void write_checkpoint(std::ostream& out, const TrainedModel& model) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "K " << model.K << '\n';
  for (const auto& [k, v] : to_key_values(model.config)) out << "config " << k << " = " << v << '\n';
  write_nodes(out, "trained", model.trained_nodes);
  write_nodes(out, "core", model.core_nodes);
  const Matrix& e = model.params.embedding;
  write_matrix(out, "embedding", e.data(), e.rows(), e.cols());
  for (std::size_t l = 0; l < model.params.layers.size(); ++l) {
    const LayerParams& layer = model.params.layers[l];
    const std::string prefix = "layer" + std::to_string(l);
    for (std::size_t t = 0; t < layer.heads.size(); ++t) {
      const std::string head = prefix + ".head" + std::to_string(t);
      write_matrix(out, head + ".W1", layer.heads[t].W1.data(), layer.heads[t].W1.rows(), layer.heads[t].W1.cols());
      write_matrix(out, head + ".W2", layer.heads[t].W2.data(), layer.heads[t].W2.rows(), layer.heads[t].W2.cols());
    }
    write_matrix(out, prefix + ".gamma", layer.gamma.data(), layer.gamma.size(), 1);
  }
  if (model.training_centers) {
    const Matrix& c = *model.training_centers;
    write_matrix(out, "training_centers", c.data(), c.rows(), c.cols());
  }
  out << "end\n";
}

void save_checkpoint(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  write_checkpoint(out, model);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

TrainedModel read_checkpoint(std::istream& in) {
  TrainedModel model;
  std::map<std::string, Matrix> matrices;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  bool ended = false;
  TrainConfig config;
  config.allow_off_grid = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (!header) {
      int version = 0;
      if (tag != kMagic || !(fields >> version)) bad(line_no, "not a ceegcn checkpoint");
      if (version != kVersion) bad(line_no, "unsupported checkpoint version " + std::to_string(version));
      header = true;
    } else if (tag == "K") {
      if (!(fields >> model.K)) bad(line_no, "malformed K");
    } else if (tag == "config") {
      const auto eq = line.find('=');
      if (eq == std::string::npos) bad(line_no, "malformed config line");
      std::string key;
      fields >> key;
      apply_setting(config, key, line.substr(eq + 1));
    } else if (tag == "nodes") {
      std::string which;
      std::size_t count = 0;
      if (!(fields >> which >> count)) bad(line_no, "malformed node list");
      std::vector<NodeId> ids(count);
      for (NodeId& v : ids) {
        if (!(fields >> v)) bad(line_no, "node list shorter than its count");
      }
      if (which == "trained") model.trained_nodes = std::move(ids);
      else if (which == "core") model.core_nodes = std::move(ids);
      else bad(line_no, "unknown node list '" + which + "'");
    } else if (tag == "matrix") {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      if (!(fields >> name >> rows >> cols) || rows < 0 || cols < 0) bad(line_no, "malformed matrix header");
      Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) bad(line_no, "matrix '" + name + "' truncated");
        ++line_no;
        const auto values = split_fields(line);
        if (static_cast<Eigen::Index>(values.size()) != cols) bad(line_no, "matrix '" + name + "' row has wrong width");
        for (Eigen::Index c = 0; c < cols; ++c) {
          if (!parse_double(values[static_cast<std::size_t>(c)], m(r, c))) bad(line_no, "bad number");
        }
      }
      matrices.emplace(name, std::move(m));
    } else if (tag == "end") {
      ended = true;
      break;
    } else {
      bad(line_no, "unknown record '" + tag + "'");
    }
  }
  if (!header) throw std::runtime_error("checkpoint is empty");
  if (!ended) throw std::runtime_error("checkpoint is truncated (no end marker)");

  auto take = [&](const std::string& name) {
    auto it = matrices.find(name);
    if (it == matrices.end()) throw std::runtime_error("checkpoint is missing matrix '" + name + "'");
    Matrix m = std::move(it->second);
    matrices.erase(it);
    return m;
  };
  model.params.embedding = take("embedding");
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    LayerParams layer;
    for (std::size_t t = 0; t < config.heads; ++t) {
      const std::string head = prefix + ".head" + std::to_string(t);
      layer.heads.push_back({take(head + ".W1"), take(head + ".W2")});
    }
    layer.gamma = take(prefix + ".gamma").col(0);
    model.params.layers.push_back(std::move(layer));
  }
  if (matrices.count("training_centers")) model.training_centers = take("training_centers");
  if (!matrices.empty()) throw std::runtime_error("checkpoint has unexpected matrix '" + matrices.begin()->first + "'");
  model.config = config;
  return model;
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace ceegcn
