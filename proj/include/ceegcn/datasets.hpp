#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ceegcn/graph.hpp"

namespace ceegcn {

struct Ml100kBuildReport {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::size_t cluster_count = 0;
  double density = 0.0;
  std::size_t dropped_isolated = 0;
  std::size_t movies_in_catalog = 0;
  std::size_t rating_rows = 0;
  /// Consecutive same-user pairs with distinct movies (= sum of edge weights).
  std::size_t transition_pairs = 0;
  std::size_t repeat_pairs_skipped = 0;
  std::size_t timestamp_ties = 0;
  std::size_t genre_ties_broken = 0;
  std::size_t movies_without_genre = 0;
  std::map<std::string, std::size_t> genre_frequency_table;
  /// Label id -> genre name, ordered by genre column.
  std::vector<std::string> label_names;
  std::string tie_break_rule = "timestamp ascending, then item id ascending";
};

struct Ml100kDataset {
  LabeledGraph graph;
  /// MovieLens item id of each dense node.
  std::vector<std::string> item_ids;
  Ml100kBuildReport report;
};

/// Movie co-rating graph from stock MovieLens 100K `u.data` and `u.item`.
///
/// Per user, ratings are ordered by (timestamp, item id); each consecutive pair
/// of distinct movies adds 1 to their edge weight. Movies left without edges
/// are dropped. A movie's label is, among its own genres, the genre that is
/// most frequent over the whole catalog (lower column index on ties).
Ml100kDataset build_ml100k(const std::filesystem::path& udata_path,
                           const std::filesystem::path& uitem_path);

/// JSON rendering of the report.
std::string to_json(const Ml100kBuildReport& report);

}  // namespace ceegcn
