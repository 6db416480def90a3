#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ceegcn/text_io.hpp"
#include "ceegcn/trainer.hpp"

namespace ceegcn {

namespace {

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double(v, out) || !std::isfinite(out)) throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  if (!parse_int(v, out)) throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string s = lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

std::string b(bool v) { return v ? "true" : "false"; }

const char* name(DistanceMode m) { return m == DistanceMode::kUnit ? "unit" : "reciprocal"; }
const char* name(SelfLoopMode m) {
  switch (m) {
    case SelfLoopMode::kMean: return "mean";
    case SelfLoopMode::kMin: return "min";
    default: return "max";
  }
}
const char* name(FcmMode m) { return m == FcmMode::kLiteral ? "literal" : "similarity"; }
const char* name(WeightRefinement m) { return m == WeightRefinement::kPersistent ? "persistent" : "transient"; }

}  // namespace

AttentionOptions TrainConfig::attention_options() const {
  AttentionOptions o;
  o.alpha = alpha;
  o.self_loop = self_loop;
  o.normalizer = (softmax_instead_of_entmax || vanilla_gat) ? Normalizer::kSoftmax : Normalizer::kEntmax;
  o.use_weight_factor = !(drop_f_iz || vanilla_gat);
  return o;
}

ModelShape TrainConfig::shape(std::size_t node_count) const {
  return {node_count, embedding_dim, attention_dim, hidden_dim, layers, heads};
}

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) fail("epsilon must lie in [0, 1]");
  if (!(c.phi > 0.0 && c.phi <= 1.0)) fail("phi must lie in (0, 1]");
  if (!(c.alpha > 1.0 && c.alpha <= 2.0)) fail("alpha must lie in (1, 2]");
  if (!(c.keep_quantile >= 0.0 && c.keep_quantile <= 1.0)) fail("keep_quantile must lie in [0, 1]");
  if (c.importance_threshold && *c.importance_threshold < 0.0) fail("importance_threshold must be >= 0");
  if (c.heads < 1 || c.layers < 1) fail("need at least one layer and one head");
  if (c.embedding_dim < 1 || c.attention_dim < 1 || c.hidden_dim < 1) fail("dimensions must be >= 1");
  if (!(c.eta >= 0.0)) fail("eta must be >= 0");
  if (c.negatives < 0) fail("negatives must be >= 0");
  if (!(c.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (c.epochs < 0 || c.patience < 1) fail("epochs must be >= 0 and patience >= 1");
  if (c.fcm_iterations < 0) fail("fcm_iterations must be >= 0");
  if (c.allow_off_grid) return;
  const double grid_eps[] = {0.0, 0.3, 0.5, 0.8, 1.0};
  if (std::none_of(std::begin(grid_eps), std::end(grid_eps), [&](double v) { return std::abs(v - c.epsilon) < 1e-12; })) {
    fail("epsilon outside the tuning grid {0, 0.3, 0.5, 0.8, 1.0} (set allow_off_grid to override)");
  }
  if (c.alpha < 1.2 - 1e-12 || c.alpha > 1.9 + 1e-12) fail("alpha outside [1.2, 1.9] (set allow_off_grid to override)");
  if (c.eta < 0.02 - 1e-12 || c.eta > 0.08 + 1e-12) fail("eta outside [0.02, 0.08] (set allow_off_grid to override)");
  if (c.layers < 2 || c.layers > 6) fail("layers outside {2..6} (set allow_off_grid to override)");
}

std::vector<std::pair<std::string, std::string>> to_key_values(const TrainConfig& c) {
  return {
      {"epsilon", format_double(c.epsilon)},
      {"phi", format_double(c.phi)},
      {"core_count", std::to_string(c.core_count)},
      {"importance_threshold", c.importance_threshold ? format_double(*c.importance_threshold) : "auto"},
      {"keep_quantile", format_double(c.keep_quantile)},
      {"distance_mode", name(c.distance_mode)},
      {"alpha", format_double(c.alpha)},
      {"heads", std::to_string(c.heads)},
      {"layers", std::to_string(c.layers)},
      {"embedding_dim", std::to_string(c.embedding_dim)},
      {"attention_dim", std::to_string(c.attention_dim)},
      {"hidden_dim", std::to_string(c.hidden_dim)},
      {"self_loop", name(c.self_loop)},
      {"eta", format_double(c.eta)},
      {"negatives", std::to_string(c.negatives)},
      {"learning_rate", format_double(c.learning_rate)},
      {"epochs", std::to_string(c.epochs)},
      {"patience", std::to_string(c.patience)},
      {"min_improvement", format_double(c.min_improvement)},
      {"refinement", name(c.refinement)},
      {"fcm_mode", name(c.fcm_mode)},
      {"fcm_iterations", std::to_string(c.fcm_iterations)},
      {"fcm_warm_start", b(c.fcm_warm_start)},
      {"reuse_training_centers", b(c.reuse_training_centers)},
      {"seed", std::to_string(c.seed)},
      {"no_contraction", b(c.no_contraction)},
      {"random_contraction", b(c.random_contraction)},
      {"softmax_instead_of_entmax", b(c.softmax_instead_of_entmax)},
      {"drop_f_iz", b(c.drop_f_iz)},
      {"no_weight_update", b(c.no_weight_update)},
      {"vanilla_gat", b(c.vanilla_gat)},
      {"allow_off_grid", b(c.allow_off_grid)},
  };
}

std::string to_config_text(const TrainConfig& c) {
  std::ostringstream out;
  for (const auto& [k, v] : to_key_values(c)) out << k << " = " << v << '\n';
  return out.str();
}

void apply_setting(TrainConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "epsilon") c.epsilon = to_double(key, v);
  else if (key == "phi") c.phi = to_double(key, v);
  else if (key == "core_count") c.core_count = to_int<std::size_t>(key, v);
  else if (key == "importance_threshold") {
    if (lower(v) == "auto") c.importance_threshold.reset();
    else c.importance_threshold = to_double(key, v);
  } else if (key == "keep_quantile") c.keep_quantile = to_double(key, v);
  else if (key == "distance_mode") {
    if (v == "reciprocal") c.distance_mode = DistanceMode::kReciprocalWeight;
    else if (v == "unit") c.distance_mode = DistanceMode::kUnit;
    else throw std::invalid_argument("config: distance_mode must be reciprocal or unit");
  } else if (key == "alpha") c.alpha = to_double(key, v);
  else if (key == "heads") c.heads = to_int<std::size_t>(key, v);
  else if (key == "layers") c.layers = to_int<std::size_t>(key, v);
  else if (key == "embedding_dim") c.embedding_dim = to_int<std::size_t>(key, v);
  else if (key == "attention_dim") c.attention_dim = to_int<std::size_t>(key, v);
  else if (key == "hidden_dim") c.hidden_dim = to_int<std::size_t>(key, v);
  else if (key == "self_loop") {
    if (v == "max") c.self_loop = SelfLoopMode::kMax;
    else if (v == "mean") c.self_loop = SelfLoopMode::kMean;
    else if (v == "min") c.self_loop = SelfLoopMode::kMin;
    else throw std::invalid_argument("config: self_loop must be max, mean or min");
  } else if (key == "eta") c.eta = to_double(key, v);
  else if (key == "negatives") c.negatives = to_int<int>(key, v);
  else if (key == "learning_rate") c.learning_rate = to_double(key, v);
  else if (key == "epochs") c.epochs = to_int<int>(key, v);
  else if (key == "patience") c.patience = to_int<int>(key, v);
  else if (key == "min_improvement") c.min_improvement = to_double(key, v);
  else if (key == "refinement") {
    if (v == "transient") c.refinement = WeightRefinement::kTransient;
    else if (v == "persistent") c.refinement = WeightRefinement::kPersistent;
    else throw std::invalid_argument("config: refinement must be transient or persistent");
  } else if (key == "fcm_mode") {
    if (v == "similarity") c.fcm_mode = FcmMode::kSimilarityProportional;
    else if (v == "literal") c.fcm_mode = FcmMode::kLiteral;
    else throw std::invalid_argument("config: fcm_mode must be similarity or literal");
  } else if (key == "fcm_iterations") c.fcm_iterations = to_int<int>(key, v);
  else if (key == "fcm_warm_start") c.fcm_warm_start = to_bool(key, v);
  else if (key == "reuse_training_centers") c.reuse_training_centers = to_bool(key, v);
  else if (key == "seed") c.seed = to_int<std::uint64_t>(key, v);
  else if (key == "no_contraction") c.no_contraction = to_bool(key, v);
  else if (key == "random_contraction") c.random_contraction = to_bool(key, v);
  else if (key == "softmax_instead_of_entmax") c.softmax_instead_of_entmax = to_bool(key, v);
  else if (key == "drop_f_iz") c.drop_f_iz = to_bool(key, v);
  else if (key == "no_weight_update") c.no_weight_update = to_bool(key, v);
  else if (key == "vanilla_gat") c.vanilla_gat = to_bool(key, v);
  else if (key == "allow_off_grid") c.allow_off_grid = to_bool(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected `key = value`");
    }
    out.emplace_back(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

void apply_ablation(TrainConfig& c, const std::string& raw) {
  std::string n = lower(raw);
  if (n.starts_with("ceegcn-")) n = n.substr(7);
  if (n == "cgc") c.random_contraction = true;
  else if (n == "ewsgat") c.vanilla_gat = true;
  else if (n == "entmax") c.softmax_instead_of_entmax = true;
  else if (n == "f_iz" || n == "fiz") c.drop_f_iz = true;
  else if (n == "ewo") c.no_weight_update = true;
  else if (n == "no-contraction" || n == "no_contraction") c.no_contraction = true;
  else throw std::invalid_argument("unknown ablation '" + raw + "' (expected cgc, ewsgat, entmax, f_iz, ewo, no-contraction)");
}

}  // namespace ceegcn
