// Copyright 2026 The lexidebias Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "lexidebias/embedding_store.hpp"
#include "lexidebias/error.hpp"
#include "lexidebias/geometry.hpp"
#include "lexidebias/stats.hpp"
#include "lexidebias/text.hpp"

namespace lexidebias {

// ---------------------------------------------------------------------------
// WEAT

struct WeatSpec {
  std::string name;
  std::vector<std::string> x, y;  // targets
  std::vector<std::string> a, b;  // attributes

  void validate() const {
    if (x.empty() || y.empty() || a.empty() || b.empty()) {
      throw DataError("WEAT spec '" + name + "': all four word sets must be non-empty");
    }
    if (x.size() != y.size()) {
      throw DataError(fmt::format("WEAT spec '{}': target sets differ in size ({} vs {})", name,
                                  x.size(), y.size()));
    }
    for (const auto* set : {&x, &y, &a, &b}) {
      if (std::set<std::string>(set->begin(), set->end()).size() != set->size()) {
        throw DataError("WEAT spec '" + name + "': duplicate word within a set");
      }
    }
  }
};

enum class PermutationMethod { exhaustive, monte_carlo };

inline const char* to_string(PermutationMethod m) {
  return m == PermutationMethod::exhaustive ? "exhaustive" : "monte_carlo";
}

struct PermutationOptions {
  std::uint64_t max_exhaustive = 100000;
  std::uint64_t mc_samples = 100000;
  std::uint64_t seed = 0;
};

struct PermutationResult {
  double p_value = 0.0;
  PermutationMethod method = PermutationMethod::exhaustive;
  std::uint64_t permutations = 0;
};

struct WeatResult {
  std::string name;
  double statistic = 0.0;
  double p_value = 0.0;
  double effect_size = 0.0;
  PermutationMethod method = PermutationMethod::exhaustive;
  std::uint64_t permutations = 0;
};

/// Reads one spec object or an array of them:
/// {"name", "targets_x", "targets_y", "attributes_a", "attributes_b"}.
inline std::vector<WeatSpec> load_weat_specs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open WEAT spec file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("{}: invalid JSON: {}", path, e.what()));
  }
  auto read_one = [&](const nlohmann::json& j) {
    try {
      WeatSpec spec;
      spec.name = j.at("name").get<std::string>();
      spec.x = j.at("targets_x").get<std::vector<std::string>>();
      spec.y = j.at("targets_y").get<std::vector<std::string>>();
      spec.a = j.at("attributes_a").get<std::vector<std::string>>();
      spec.b = j.at("attributes_b").get<std::vector<std::string>>();
      spec.validate();
      return spec;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}: malformed WEAT spec: {}", path, e.what()));
    }
  };
  std::vector<WeatSpec> specs;
  if (doc.is_array()) {
    for (const auto& j : doc) specs.push_back(read_one(j));
  } else {
    specs.push_back(read_one(doc));
  }
  if (specs.empty()) throw DataError("no WEAT specs in " + path);
  return specs;
}

namespace detail {

inline void require_words(const EmbeddingSet& emb,
                          std::initializer_list<const std::vector<std::string>*> sets,
                          const std::string& context) {
  std::vector<std::string> missing;
  for (const auto* set : sets) {
    for (const auto& w : *set) {
      if (!emb.contains(w) && std::find(missing.begin(), missing.end(), w) == missing.end()) {
        missing.push_back(w);
      }
    }
  }
  if (!missing.empty()) {
    throw NotFound(fmt::format("{}: words missing from embeddings: {}", context,
                               fmt::join(missing, ", ")));
  }
}

inline double mean_cosine(const Vector& t, const std::vector<std::string>& words,
                          const EmbeddingSet& emb) {
  double sum = 0.0;
  for (const auto& w : words) sum += cosine(t, emb.at(w));
  return sum / static_cast<double>(words.size());
}

// k(t) for every target, X first then Y.
inline std::vector<double> target_associations(const WeatSpec& spec, const EmbeddingSet& emb) {
  spec.validate();
  require_words(emb, {&spec.x, &spec.y, &spec.a, &spec.b}, "WEAT '" + spec.name + "'");
  std::vector<double> k;
  k.reserve(spec.x.size() + spec.y.size());
  for (const auto* set : {&spec.x, &spec.y}) {
    for (const auto& t : *set) {
      const Vector& v = emb.at(t);
      k.push_back(mean_cosine(v, spec.a, emb) - mean_cosine(v, spec.b, emb));
    }
  }
  return k;
}

// Sum over members minus sum over non-members, accumulated in index order.
inline double partition_statistic(const std::vector<double>& k, const std::vector<char>& in_x) {
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) (in_x[i] ? sx : sy) += k[i];
  return sx - sy;
}

// C(n, r), saturating at `cap + 1`.
inline std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t r, std::uint64_t cap) {
  r = std::min(r, n - r);
  long double c = 1.0L;
  for (std::uint64_t i = 1; i <= r; ++i) {
    c = c * static_cast<long double>(n - r + i) / static_cast<long double>(i);
    if (c > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(c)));
}

}  // namespace detail

/// mean_{a in A} cos(t, a) - mean_{b in B} cos(t, b).
inline double weat_association(const Vector& t, const std::vector<std::string>& a,
                               const std::vector<std::string>& b, const EmbeddingSet& emb) {
  if (a.empty() || b.empty()) throw DataError("weat_association: empty attribute set");
  detail::require_words(emb, {&a, &b}, "weat_association");
  return detail::mean_cosine(t, a, emb) - detail::mean_cosine(t, b, emb);
}

/// sum_{x in X} k(x) - sum_{y in Y} k(y).
inline double weat_statistic(const WeatSpec& spec, const EmbeddingSet& emb) {
  const auto k = detail::target_associations(spec, emb);
  std::vector<char> in_x(k.size(), 0);
  std::fill(in_x.begin(), in_x.begin() + static_cast<std::ptrdiff_t>(spec.x.size()), 1);
  return detail::partition_statistic(k, in_x);
}

/// One-sided permutation p-value: the fraction of equal-size repartitions of
/// X u Y whose statistic is strictly greater than the observed one. All
/// C(2N, N) partitions are enumerated when that count is <= max_exhaustive;
/// otherwise mc_samples random partitions are drawn with `seed`.
inline PermutationResult weat_pvalue(const WeatSpec& spec, const EmbeddingSet& emb,
                                     const PermutationOptions& opts = {}) {
  const auto k = detail::target_associations(spec, emb);
  const std::size_t total = k.size();
  const std::size_t half = spec.x.size();
  std::vector<char> in_x(total, 0);
  std::fill(in_x.begin(), in_x.begin() + static_cast<std::ptrdiff_t>(half), 1);
  const double observed = detail::partition_statistic(k, in_x);

  PermutationResult result;
  const std::uint64_t partitions = detail::binomial_capped(total, half, opts.max_exhaustive);
  std::uint64_t greater = 0;
  if (partitions <= opts.max_exhaustive) {
    result.method = PermutationMethod::exhaustive;
    // in_x starts at the lexicographically greatest arrangement (1...10...0).
    do {
      if (detail::partition_statistic(k, in_x) > observed) ++greater;
      ++result.permutations;
    } while (std::prev_permutation(in_x.begin(), in_x.end()));
  } else {
    if (opts.mc_samples == 0) throw ConfigError("Monte-Carlo permutation test needs samples > 0");
    result.method = PermutationMethod::monte_carlo;
    std::mt19937_64 rng(opts.seed);
    for (std::uint64_t s = 0; s < opts.mc_samples; ++s) {
      std::shuffle(in_x.begin(), in_x.end(), rng);
      if (detail::partition_statistic(k, in_x) > observed) ++greater;
    }
    result.permutations = opts.mc_samples;
  }
  result.p_value = static_cast<double>(greater) / static_cast<double>(result.permutations);
  return result;
}

/// (mean_X k - mean_Y k) / sd_{X u Y} k with the population standard deviation.
inline double weat_effect_size(const WeatSpec& spec, const EmbeddingSet& emb) {
  const auto k = detail::target_associations(spec, emb);
  const std::size_t half = spec.x.size();
  double mx = 0.0, my = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    (i < half ? mx : my) += k[i];
    mean += k[i];
  }
  mx /= static_cast<double>(half);
  my /= static_cast<double>(k.size() - half);
  mean /= static_cast<double>(k.size());
  double var = 0.0;
  for (double v : k) var += (v - mean) * (v - mean);
  var /= static_cast<double>(k.size());
  const double sd = std::sqrt(var);
  if (!(sd > 0.0)) throw NumericError("WEAT '" + spec.name + "': zero standard deviation");
  return (mx - my) / sd;
}

inline WeatResult run_weat(const WeatSpec& spec, const EmbeddingSet& emb,
                           const PermutationOptions& opts = {}) {
  WeatResult r;
  r.name = spec.name;
  r.statistic = weat_statistic(spec, emb);
  const auto perm = weat_pvalue(spec, emb, opts);
  r.p_value = perm.p_value;
  r.method = perm.method;
  r.permutations = perm.permutations;
  r.effect_size = weat_effect_size(spec, emb);
  return r;
}

// ---------------------------------------------------------------------------
// WAT

struct SeedPair {
  std::string masculine;
  std::string feminine;
};

/// Undirected weighted word-association graph with masculine/feminine seed pairs.
class AssociationGraph {
 public:
  struct Edge {
    std::size_t u, v;
    double weight;
  };

  std::size_t add_node(const std::string& word) {
    auto [it, inserted] = index_.emplace(word, nodes_.size());
    if (inserted) {
      nodes_.push_back(word);
      adjacency_.emplace_back();
    }
    return it->second;
  }

  /// Parallel edges accumulate their weights.
  void add_edge(const std::string& u, const std::string& v, double weight) {
    if (u == v) throw DataError("self-loop on '" + u + "'");
    if (!(weight > 0.0) || !std::isfinite(weight)) {
      throw DataError(fmt::format("edge {}-{} has non-positive weight {}", u, v, weight));
    }
    const std::size_t a = add_node(u);
    const std::size_t b = add_node(v);
    auto bump = [&](std::size_t from, std::size_t to) {
      for (auto& [n, w] : adjacency_[from]) {
        if (n == to) {
          w += weight;
          return;
        }
      }
      adjacency_[from].emplace_back(to, weight);
    };
    bump(a, b);
    bump(b, a);
  }

  void add_seed(const std::string& masculine, const std::string& feminine) {
    if (!contains(masculine) || !contains(feminine)) {
      throw NotFound(fmt::format("seed pair ({}, {}) not in graph", masculine, feminine));
    }
    seeds_.push_back({masculine, feminine});
  }

  bool contains(const std::string& w) const { return index_.contains(w); }
  std::size_t index(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) throw NotFound("word '" + w + "' not in graph");
    return it->second;
  }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::vector<SeedPair>& seeds() const noexcept { return seeds_; }
  const std::vector<std::vector<std::pair<std::size_t, double>>>& adjacency() const noexcept {
    return adjacency_;
  }

 private:
  std::vector<std::string> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency_;
  std::vector<SeedPair> seeds_;
};

inline std::vector<SeedPair> load_seed_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open seeds file: " + path);
  std::vector<SeedPair> seeds;
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    detail::split_tabs(line, fields);
    if (fields.size() != 2) throw ParseError(path, line_no, "expected masculine<TAB>feminine");
    seeds.push_back({std::string(detail::trim(fields[0])), std::string(detail::trim(fields[1]))});
  }
  return seeds;
}

/// Edge list `u<TAB>v<TAB>weight` plus seed pairs. Self-loops and seed pairs
/// outside the graph are skipped with a warning.
inline AssociationGraph load_association_graph(const std::string& edges_path,
                                               const std::string& seeds_path) {
  std::ifstream in(edges_path);
  if (!in) throw DataError("cannot open graph file: " + edges_path);
  AssociationGraph graph;
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    detail::split_tabs(line, fields);
    double weight = 0.0;
    if (fields.size() != 3 || !detail::parse_double(fields[2], weight)) {
      throw ParseError(edges_path, line_no, "expected u<TAB>v<TAB>weight");
    }
    const std::string u(detail::trim(fields[0])), v(detail::trim(fields[1]));
    if (u == v) {
      logger()->warn("{}:{}: self-loop on '{}' skipped", edges_path, line_no, u);
      continue;
    }
    if (!(weight > 0.0)) throw ParseError(edges_path, line_no, "edge weight must be positive");
    graph.add_edge(u, v, weight);
  }
  for (const auto& s : load_seed_pairs(seeds_path)) {
    if (graph.contains(s.masculine) && graph.contains(s.feminine)) {
      graph.add_seed(s.masculine, s.feminine);
    } else {
      logger()->warn("seed pair ({}, {}) not in graph, skipped", s.masculine, s.feminine);
    }
  }
  return graph;
}

/// Per-node (b_m, b_f) after propagation.
struct GenderInfo {
  std::vector<std::string> nodes;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<double> masculine;
  std::vector<double> feminine;
  int iterations = 0;

  std::pair<double, double> at(const std::string& word) const {
    auto it = index.find(word);
    if (it == index.end()) throw NotFound("word '" + word + "' not in gender information");
    return {masculine[it->second], feminine[it->second]};
  }
};

struct PropagationOptions {
  double lambda = 0.85;
  double tolerance = 1e-10;
  int max_iterations = 1000;
};

/// Label propagation F <- lambda S F + (1 - lambda) Y with
/// S = D^{-1/2} W D^{-1/2}; Y holds (1,0) for masculine seeds and (0,1) for
/// feminine seeds. Stops when the max-abs change drops below tolerance.
inline GenderInfo wat_propagate(const AssociationGraph& graph, const PropagationOptions& opts = {}) {
  if (!(opts.lambda > 0.0 && opts.lambda < 1.0)) throw ConfigError("lambda must lie in (0, 1)");
  const std::size_t n = graph.size();
  std::vector<double> ym(n, 0.0), yf(n, 0.0);
  for (const auto& s : graph.seeds()) {
    ym[graph.index(s.masculine)] = 1.0;
    yf[graph.index(s.feminine)] = 1.0;
  }
  std::vector<double> inv_sqrt_degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (const auto& [j, w] : graph.adjacency()[i]) d += w;
    inv_sqrt_degree[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }

  GenderInfo info;
  info.nodes = graph.nodes();
  for (std::size_t i = 0; i < n; ++i) info.index.emplace(info.nodes[i], i);
  info.masculine = ym;
  info.feminine = yf;
  std::vector<double> next_m(n), next_f(n);
  double residual = 0.0;
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double sm = 0.0, sf = 0.0;
      for (const auto& [j, w] : graph.adjacency()[i]) {
        const double s = w * inv_sqrt_degree[i] * inv_sqrt_degree[j];
        sm += s * info.masculine[j];
        sf += s * info.feminine[j];
      }
      next_m[i] = opts.lambda * sm + (1.0 - opts.lambda) * ym[i];
      next_f[i] = opts.lambda * sf + (1.0 - opts.lambda) * yf[i];
      residual = std::max({residual, std::abs(next_m[i] - info.masculine[i]),
                           std::abs(next_f[i] - info.feminine[i])});
    }
    info.masculine.swap(next_m);
    info.feminine.swap(next_f);
    info.iterations = iter;
    if (residual < opts.tolerance) return info;
  }
  throw NumericError(fmt::format("WAT propagation did not converge in {} iterations (residual {:.3g})",
                                 opts.max_iterations, residual));
}

/// log((b_m + eps) / (b_f + eps)).
inline double wat_bias_score(const GenderInfo& info, const std::string& word,
                             double epsilon = 1e-8) {
  const auto [bm, bf] = info.at(word);
  return std::log((bm + epsilon) / (bf + epsilon));
}

/// Mean over seed pairs of cos(w, masculine) - cos(w, feminine).
inline double wat_embedding_score(const Vector& w, const std::vector<SeedPair>& pairs,
                                  const EmbeddingSet& emb) {
  if (pairs.empty()) throw DataError("wat_embedding_score: no seed pairs");
  double sum = 0.0;
  for (const auto& p : pairs) sum += cosine(w, emb.at(p.masculine)) - cosine(w, emb.at(p.feminine));
  return sum / static_cast<double>(pairs.size());
}

struct WatResult {
  double pearson = 0.0;
  std::size_t words = 0;
  std::size_t skipped = 0;
};

/// Pearson correlation between propagation bias scores and embedding scores
/// over words present in both the graph and the embeddings.
inline WatResult wat_correlation(const AssociationGraph& graph, const EmbeddingSet& emb,
                                 const PropagationOptions& opts = {}, double epsilon = 1e-8) {
  std::vector<SeedPair> pairs;
  for (const auto& s : graph.seeds()) {
    if (emb.contains(s.masculine) && emb.contains(s.feminine)) {
      pairs.push_back(s);
    } else {
      logger()->warn("WAT seed pair ({}, {}) missing from embeddings, skipped", s.masculine,
                     s.feminine);
    }
  }
  if (pairs.empty()) throw DataError("WAT: no seed pair is covered by the embeddings");
  const GenderInfo info = wat_propagate(graph, opts);
  WatResult result;
  std::vector<double> graph_scores, emb_scores;
  for (const auto& word : graph.nodes()) {
    const Vector* v = emb.find(word);
    if (v == nullptr || v->norm() == 0.0) {
      ++result.skipped;
      continue;
    }
    graph_scores.push_back(wat_bias_score(info, word, epsilon));
    emb_scores.push_back(wat_embedding_score(*v, pairs, emb));
  }
  if (result.skipped > 0) {
    logger()->warn("WAT: {} graph words missing from embeddings were skipped", result.skipped);
  }
  result.words = graph_scores.size();
  if (result.words < 3) throw DataError("WAT: fewer than 3 words shared by graph and embeddings");
  result.pearson = pearson(graph_scores, emb_scores);
  return result;
}

// ---------------------------------------------------------------------------
// SemBias

enum class SemBiasLabel { definition, stereotype, none };

inline SemBiasLabel parse_sembias_label(std::string_view s) {
  const std::string lower = detail::to_lower(detail::trim(s));
  if (lower == "definition") return SemBiasLabel::definition;
  if (lower == "stereotype") return SemBiasLabel::stereotype;
  if (lower == "none") return SemBiasLabel::none;
  throw DataError(fmt::format("unknown SemBias label '{}'", s));
}

struct SemBiasInstance {
  std::array<std::pair<std::string, std::string>, 4> pairs;
  std::array<SemBiasLabel, 4> labels{};
  bool subset = false;

  void validate() const {
    const auto defs = std::count(labels.begin(), labels.end(), SemBiasLabel::definition);
    const auto stereo = std::count(labels.begin(), labels.end(), SemBiasLabel::stereotype);
    if (defs != 1 || stereo != 1) {
      throw DataError("SemBias instance needs exactly one definition and one stereotype pair");
    }
  }
};

/// 8 word columns (a1 b1 ... a4 b4), 4 label columns, subset flag (0/1).
inline std::vector<SemBiasInstance> load_sembias(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open SemBias file: " + path);
  std::vector<SemBiasInstance> data;
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    detail::split_tabs(line, fields);
    if (fields.size() != 13) {
      throw ParseError(path, line_no, fmt::format("expected 13 columns, got {}", fields.size()));
    }
    SemBiasInstance inst;
    try {
      for (std::size_t i = 0; i < 4; ++i) {
        inst.pairs[i] = {std::string(detail::trim(fields[2 * i])),
                         std::string(detail::trim(fields[2 * i + 1]))};
        inst.labels[i] = parse_sembias_label(fields[8 + i]);
      }
      int flag = 0;
      if (!detail::parse_integer(fields[12], flag) || (flag != 0 && flag != 1)) {
        throw DataError("subset flag must be 0 or 1");
      }
      inst.subset = flag == 1;
      inst.validate();
    } catch (const ParseError&) {
      throw;
    } catch (const DataError& e) {
      throw ParseError(path, line_no, e.what());
    }
    data.push_back(std::move(inst));
  }
  return data;
}

/// Index of the pair whose difference has the highest cosine with he - she.
/// Ties resolve to the lowest index.
inline std::size_t sembias_classify(const SemBiasInstance& inst, const EmbeddingSet& emb,
                                    const std::string& he = "he", const std::string& she = "she") {
  const Vector direction = emb.at(he) - emb.at(she);
  std::size_t best = 0;
  double best_score = -2.0;
  for (std::size_t i = 0; i < inst.pairs.size(); ++i) {
    const double score =
        cosine(direction, emb.at(inst.pairs[i].first) - emb.at(inst.pairs[i].second));
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

struct SemBiasRates {
  double definition = 0.0;
  double stereotype = 0.0;
  double none = 0.0;
  std::size_t instances = 0;
};

inline SemBiasRates sembias_accuracy(const std::vector<SemBiasInstance>& data,
                                     const EmbeddingSet& emb, bool subset_only = false,
                                     const std::string& he = "he", const std::string& she = "she") {
  std::array<std::size_t, 3> counts{};
  SemBiasRates rates;
  for (const auto& inst : data) {
    if (subset_only && !inst.subset) continue;
    const std::size_t pick = sembias_classify(inst, emb, he, she);
    ++counts[static_cast<std::size_t>(inst.labels[pick])];
    ++rates.instances;
  }
  if (rates.instances == 0) throw DataError("SemBias: no instances to evaluate");
  const double n = static_cast<double>(rates.instances);
  rates.definition = static_cast<double>(counts[0]) / n;
  rates.stereotype = static_cast<double>(counts[1]) / n;
  rates.none = static_cast<double>(counts[2]) / n;
  return rates;
}

}  // namespace lexidebias
