#include "ceegcn/datasets.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "ceegcn/text_io.hpp"
#include "json.hpp"

namespace ceegcn {

namespace {

constexpr std::array<const char*, 19> kGenres = {
    "unknown", "Action",  "Adventure", "Animation", "Children's", "Comedy",  "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",     "Musical", "Mystery",
    "Romance", "Sci-Fi",  "Thriller",  "War",       "Western"};
constexpr int kUnknownGenre = 0;

struct Rating {
  long user;
  long item;
  long timestamp;
};

struct Movie {
  long item;
  std::array<bool, kGenres.size()> genres{};
};

std::vector<Movie> read_items(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open u.item file " + path.string());
  std::vector<Movie> movies;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_on(line, '|');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 5 + kGenres.size()) {
      throw std::runtime_error(where + ": expected 24 pipe-separated fields, got " +
                               std::to_string(fields.size()));
    }
    Movie m;
    if (!parse_int(fields[0], m.item)) throw std::runtime_error(where + ": bad movie id");
    for (std::size_t g = 0; g < kGenres.size(); ++g) {
      std::string_view flag = fields[5 + g];
      if (flag != "0" && flag != "1") throw std::runtime_error(where + ": genre flag must be 0 or 1");
      m.genres[g] = flag == "1";
    }
    movies.push_back(m);
  }
  if (movies.empty()) throw std::runtime_error(path.string() + ": no movies");
  return movies;
}

std::vector<Rating> read_ratings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open u.data file " + path.string());
  std::vector<Rating> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    Rating r{};
    int rating = 0;
    if (fields.size() != 4 || !parse_int(fields[0], r.user) || !parse_int(fields[1], r.item) ||
        !parse_int(fields[2], rating) || !parse_int(fields[3], r.timestamp)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected `user<TAB>item<TAB>rating<TAB>timestamp`");
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no ratings");
  return rows;
}

}  // namespace

Ml100kDataset build_ml100k(const std::filesystem::path& udata_path,
                           const std::filesystem::path& uitem_path) {
  const std::vector<Movie> movies = read_items(uitem_path);
  std::vector<Rating> ratings = read_ratings(udata_path);

  Ml100kDataset out;
  Ml100kBuildReport& report = out.report;
  report.movies_in_catalog = movies.size();
  report.rating_rows = ratings.size();

  std::unordered_map<long, std::size_t> movie_index;
  for (std::size_t k = 0; k < movies.size(); ++k) {
    if (!movie_index.emplace(movies[k].item, k).second) {
      throw std::runtime_error(uitem_path.string() + ": duplicate movie id " + std::to_string(movies[k].item));
    }
  }
  for (const Rating& r : ratings) {
    if (!movie_index.contains(r.item)) {
      throw std::runtime_error(udata_path.string() + ": rating references unknown movie " + std::to_string(r.item));
    }
  }

  std::array<std::size_t, kGenres.size()> frequency{};
  for (const Movie& m : movies) {
    for (std::size_t g = 0; g < kGenres.size(); ++g) frequency[g] += m.genres[g] ? 1 : 0;
  }
  for (std::size_t g = 0; g < kGenres.size(); ++g) report.genre_frequency_table[kGenres[g]] = frequency[g];

  std::sort(ratings.begin(), ratings.end(), [](const Rating& a, const Rating& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.item < b.item;
  });

  const std::size_t catalog = movies.size();
  std::vector<Edge> transitions;
  for (std::size_t k = 1; k < ratings.size(); ++k) {
    const Rating& prev = ratings[k - 1];
    const Rating& cur = ratings[k];
    if (prev.user != cur.user) continue;
    if (prev.timestamp == cur.timestamp) ++report.timestamp_ties;
    if (prev.item == cur.item) {
      ++report.repeat_pairs_skipped;
      continue;
    }
    transitions.push_back({static_cast<NodeId>(movie_index.at(prev.item)),
                           static_cast<NodeId>(movie_index.at(cur.item)), 1.0});
  }
  report.transition_pairs = transitions.size();
  const WeightedGraph catalog_graph = WeightedGraph::from_edges(catalog, transitions);

  std::vector<NodeId> kept;
  for (std::size_t k = 0; k < catalog; ++k) {
    if (catalog_graph.degree(static_cast<NodeId>(k)) > 0) kept.push_back(static_cast<NodeId>(k));
  }
  report.dropped_isolated = catalog - kept.size();

  // Label: the catalog-wide most frequent genre among the movie's own genres.
  std::vector<int> genre_of(kept.size(), kUnknownGenre);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const Movie& m = movies[static_cast<std::size_t>(kept[k])];
    int best = -1;
    int candidates_at_best = 0;
    for (std::size_t g = 0; g < kGenres.size(); ++g) {
      if (!m.genres[g]) continue;
      if (best < 0 || frequency[g] > frequency[static_cast<std::size_t>(best)]) {
        best = static_cast<int>(g);
        candidates_at_best = 1;
      } else if (frequency[g] == frequency[static_cast<std::size_t>(best)]) {
        ++candidates_at_best;
      }
    }
    if (best < 0) {
      ++report.movies_without_genre;
      best = kUnknownGenre;
    }
    if (candidates_at_best > 1) ++report.genre_ties_broken;
    genre_of[k] = best;
  }
  std::array<int, kGenres.size()> label_of_genre;
  label_of_genre.fill(-1);
  for (int g : genre_of) label_of_genre[static_cast<std::size_t>(g)] = 0;
  int next = 0;
  for (std::size_t g = 0; g < kGenres.size(); ++g) {
    if (label_of_genre[g] == 0) {
      label_of_genre[g] = next++;
      report.label_names.emplace_back(kGenres[g]);
    }
  }

  out.graph.graph = catalog_graph.induced(kept);
  out.graph.K = next;
  out.graph.labels.reserve(kept.size());
  for (int g : genre_of) out.graph.labels.push_back(label_of_genre[static_cast<std::size_t>(g)]);
  out.item_ids.reserve(kept.size());
  for (NodeId k : kept) out.item_ids.push_back(std::to_string(movies[static_cast<std::size_t>(k)].item));

  report.node_count = out.graph.graph.node_count();
  report.edge_count = out.graph.graph.edge_count();
  report.cluster_count = static_cast<std::size_t>(next);
  const double n = static_cast<double>(report.node_count);
  report.density = n > 1 ? static_cast<double>(report.edge_count) / (n * (n - 1) / 2.0) : 0.0;
  return out;
}

std::string to_json(const Ml100kBuildReport& r) {
  nlohmann::ordered_json j;
  j["node_count"] = r.node_count;
  j["edge_count"] = r.edge_count;
  j["cluster_count"] = r.cluster_count;
  j["density"] = r.density;
  j["dropped_isolated"] = r.dropped_isolated;
  j["movies_in_catalog"] = r.movies_in_catalog;
  j["rating_rows"] = r.rating_rows;
  j["transition_pairs"] = r.transition_pairs;
  j["repeat_pairs_skipped"] = r.repeat_pairs_skipped;
  j["timestamp_ties"] = r.timestamp_ties;
  j["tie_break_rule"] = r.tie_break_rule;
  j["genre_ties_broken"] = r.genre_ties_broken;
  j["movies_without_genre"] = r.movies_without_genre;
  j["genre_frequency_table"] = r.genre_frequency_table;
  j["label_names"] = r.label_names;
  return j.dump(2);
}

}  // namespace ceegcn
