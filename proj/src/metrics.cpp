#include "ceegcn/metrics.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ceegcn {

namespace {

std::vector<int> distinct(std::span<const int> v) {
  std::vector<int> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t index_of(const std::vector<int>& sorted, int value) {
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), value) - sorted.begin());
}

void check_pair(std::span<const int> pred, std::span<const int> truth) {
  if (pred.empty()) throw std::invalid_argument("metrics: empty label vectors");
  if (pred.size() != truth.size()) throw std::invalid_argument("metrics: predicted and true label counts differ");
}

}  // namespace

std::vector<int> hungarian_min_cost(std::span<const double> cost, std::size_t rows, std::size_t cols) {
  if (cost.size() != rows * cols) throw std::invalid_argument("hungarian: cost size mismatch");
  // Potentials method on a square matrix padded with zeros.
  const std::size_t n = std::max(rows, cols);
  auto a = [&](std::size_t i, std::size_t j) { return (i < rows && j < cols) ? cost[i * cols + j] : 0.0; };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = p[j];
    if (i >= 1 && i - 1 < rows && j - 1 < cols) assignment[i - 1] = static_cast<int>(j - 1);
  }
  return assignment;
}

Confusion confusion_matrix(std::span<const int> pred, std::span<const int> truth) {
  check_pair(pred, truth);
  Confusion c;
  c.predicted_labels = distinct(pred);
  c.true_labels = distinct(truth);
  c.counts.assign(c.predicted_labels.size(), std::vector<long>(c.true_labels.size(), 0));
  for (std::size_t k = 0; k < pred.size(); ++k) {
    ++c.counts[index_of(c.predicted_labels, pred[k])][index_of(c.true_labels, truth[k])];
  }
  return c;
}

AccuracyResult clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
  const Confusion c = confusion_matrix(pred, truth);
  const std::size_t rows = c.predicted_labels.size();
  const std::size_t cols = c.true_labels.size();
  std::vector<double> cost(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) cost[i * cols + j] = -static_cast<double>(c.counts[i][j]);
  }
  const std::vector<int> assignment = hungarian_min_cost(cost, rows, cols);
  AccuracyResult result;
  long matched = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (assignment[i] < 0) continue;
    result.mapping[c.predicted_labels[i]] = c.true_labels[static_cast<std::size_t>(assignment[i])];
    matched += c.counts[i][static_cast<std::size_t>(assignment[i])];
  }
  result.acc = static_cast<double>(matched) / static_cast<double>(pred.size());
  return result;
}

F1Scores f1_scores(std::span<const int> pred, std::span<const int> truth, const std::map<int, int>& mapping) {
  check_pair(pred, truth);
  const std::vector<int> classes = distinct(truth);
  std::vector<long> tp(classes.size(), 0), fp(classes.size(), 0), fn(classes.size(), 0);
  long unmapped = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const std::size_t t = index_of(classes, truth[k]);
    auto it = mapping.find(pred[k]);
    const bool known = it != mapping.end() && std::binary_search(classes.begin(), classes.end(), it->second);
    if (known && it->second == truth[k]) {
      ++tp[t];
      continue;
    }
    ++fn[t];
    if (known) ++fp[index_of(classes, it->second)];
    else ++unmapped;
  }
  auto f1 = [](long t, long p, long n) {
    const long denom = 2 * t + p + n;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(t) / static_cast<double>(denom);
  };
  F1Scores s;
  long TP = 0, FP = unmapped, FN = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    s.macro += f1(tp[c], fp[c], fn[c]);
    TP += tp[c];
    FP += fp[c];
    FN += fn[c];
  }
  s.macro /= static_cast<double>(classes.size());
  s.micro = f1(TP, FP, FN);
  return s;
}

EvalReport evaluate_clustering(std::span<const int> pred, std::span<const int> truth) {
  EvalReport r;
  const AccuracyResult acc = clustering_accuracy(pred, truth);
  r.acc = acc.acc;
  r.mapping = acc.mapping;
  const F1Scores f1 = f1_scores(pred, truth, acc.mapping);
  r.micro_f1 = f1.micro;
  r.macro_f1 = f1.macro;
  r.confusion = confusion_matrix(pred, truth);
  return r;
}

std::string to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["acc"] = r.acc;
  j["micro_f1"] = r.micro_f1;
  j["macro_f1"] = r.macro_f1;
  j["modularity"] = r.modularity ? nlohmann::ordered_json(*r.modularity) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json mapping = nlohmann::ordered_json::object();
  for (const auto& [p, t] : r.mapping) mapping[std::to_string(p)] = t;
  j["mapping"] = mapping;
  j["confusion"] = {{"predicted_labels", r.confusion.predicted_labels},
                    {"true_labels", r.confusion.true_labels},
                    {"counts", r.confusion.counts}};
  return j.dump(2) + "\n";
}

std::string confusion_csv(const Confusion& c) {
  std::ostringstream out;
  out << "pred\\true";
  for (int t : c.true_labels) out << ',' << t;
  out << '\n';
  for (std::size_t i = 0; i < c.predicted_labels.size(); ++i) {
    out << c.predicted_labels[i];
    for (long v : c.counts[i]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace ceegcn
