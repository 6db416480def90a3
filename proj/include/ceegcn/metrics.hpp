#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ceegcn {

/// Optimal assignment for a rectangular cost matrix (row-major, rows x cols).
/// Returns, for every row, its column or -1 when rows > cols. Minimizes cost.
std::vector<int> hungarian_min_cost(std::span<const double> cost, std::size_t rows, std::size_t cols);

struct AccuracyResult {
  double acc = 0.0;
  /// Predicted label -> true label; unmatched predicted labels are absent.
  std::map<int, int> mapping;
};

/// Best one-to-one matching of predicted to true labels, acc = matched / n.
/// Throws on empty or unequal-length input.
AccuracyResult clustering_accuracy(std::span<const int> pred, std::span<const int> truth);

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};

/// F1 after mapping predictions. Predictions with no mapping count as wrong;
/// macro averages over the true classes.
F1Scores f1_scores(std::span<const int> pred, std::span<const int> truth, const std::map<int, int>& mapping);

struct Confusion {
  std::vector<int> predicted_labels;  ///< row labels, ascending
  std::vector<int> true_labels;       ///< column labels, ascending
  std::vector<std::vector<long>> counts;
};

Confusion confusion_matrix(std::span<const int> pred, std::span<const int> truth);

struct EvalReport {
  double acc = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> modularity;
  std::map<int, int> mapping;
  Confusion confusion;
};

EvalReport evaluate_clustering(std::span<const int> pred, std::span<const int> truth);

std::string to_json(const EvalReport& report);
/// Rows are predicted labels, columns true labels, with a header line.
std::string confusion_csv(const Confusion& confusion);

}  // namespace ceegcn
