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

#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "lexidebias/embedding_store.hpp"
#include "lexidebias/error.hpp"
#include "lexidebias/geometry.hpp"
#include "lexidebias/gloss_corpus.hpp"

namespace lexidebias {

enum class WeightMode { sif, inverse_prob };

inline WeightMode parse_weight_mode(std::string_view name) {
  if (name == "sif") return WeightMode::sif;
  if (name == "inverse_prob") return WeightMode::inverse_prob;
  throw ConfigError(fmt::format("unknown weight mode '{}' (expected sif|inverse_prob)", name));
}

struct SifConfig {
  double smoothing = 1e-3;
  WeightMode weight_mode = WeightMode::sif;
  int pc_iterations = 100;
  double pc_tolerance = 1e-8;

  void validate() const {
    if (!(smoothing > 0.0)) throw ConfigError("SIF smoothing must be positive");
    if (!(pc_tolerance > 0.0)) throw ConfigError("principal component tolerance must be positive");
    if (pc_iterations < 1) throw ConfigError("principal component iterations must be >= 1");
  }
};

/// a / (a + p(token)) in sif mode, 1 / p(token) in inverse_prob mode.
inline double sif_weight(const FrequencyTable& freq, const std::string& token,
                         const SifConfig& cfg) {
  const double p = freq.probability(token);
  if (p <= 0.0) throw NumericError(fmt::format("token '{}' has zero unigram probability", token));
  return cfg.weight_mode == WeightMode::sif ? cfg.smoothing / (cfg.smoothing + p) : 1.0 / p;
}

/// Weighted mean of the in-vocabulary token vectors.
inline Vector embed_sentence(const Tokens& tokens, const EmbeddingSet& emb,
                             const FrequencyTable& freq, const SifConfig& cfg) {
  Vector sum = Vector::Zero(emb.dim());
  std::size_t kept = 0;
  for (const auto& token : tokens) {
    const Vector* v = emb.find(token);
    if (v == nullptr) continue;
    sum += sif_weight(freq, token, cfg) * *v;
    ++kept;
  }
  if (kept == 0) throw DataError("sentence has no in-vocabulary tokens");
  return sum / static_cast<double>(kept);
}

/// Dominant right singular direction of the stacked rows (no centering), by
/// power iteration on the Gram matrix G = X^T X. Each iteration applies
/// G^32 (G squared five times, trace-normalized), so nearly tied leading
/// eigenvalues still converge within the iteration budget. The sign is fixed
/// so the first non-negligible component is positive.
inline Vector principal_component(std::span<const Vector> vectors, const SifConfig& cfg = {}) {
  if (vectors.size() < 2) throw DataError("principal component needs at least two vectors");
  const Eigen::Index dim = vectors.front().size();
  Matrix gram = Matrix::Zero(dim, dim);
  std::size_t start = 0;
  double best_norm = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim) throw DataError("principal component: ragged vectors");
    gram.selfadjointView<Eigen::Lower>().rankUpdate(vectors[i]);
    const double n = vectors[i].norm();
    if (n > best_norm) {
      best_norm = n;
      start = i;
    }
  }
  if (best_norm == 0.0) throw NumericError("principal component of all-zero vectors");
  gram = gram.selfadjointView<Eigen::Lower>();

  constexpr int kSquarings = 5;
  for (int i = 0; i < kSquarings; ++i) {
    gram /= gram.trace();
    gram = (gram * gram).eval();
  }

  Vector direction = vectors[start] / best_norm;
  for (int iter = 0; iter < cfg.pc_iterations; ++iter) {
    Vector next = gram * direction;
    const double n = next.norm();
    if (n == 0.0) break;
    next /= n;
    const double change = (next - direction).norm();
    direction = std::move(next);
    if (change < cfg.pc_tolerance) break;
  }

  const double scale = direction.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (std::abs(direction[i]) > 1e-12 * scale) {
      if (direction[i] < 0.0) direction = -direction;
      break;
    }
  }
  return direction;
}

/// Definition vectors s(w) with the corpus-level principal component removed.
struct DefinitionVectors {
  std::unordered_map<std::string, Vector> vectors;
  Vector principal;

  const Vector& at(const std::string& word) const {
    auto it = vectors.find(word);
    if (it == vectors.end()) throw NotFound("no definition vector for '" + word + "'");
    return it->second;
  }
};

inline DefinitionVectors build_definition_vectors(const std::vector<std::string>& words,
                                                  const GlossDictionary& dict,
                                                  const EmbeddingSet& emb,
                                                  const FrequencyTable& freq, GlossMode mode,
                                                  const SifConfig& cfg) {
  cfg.validate();
  std::vector<Vector> raw;
  raw.reserve(words.size());
  for (const auto& w : words) {
    raw.push_back(embed_sentence(select_gloss_tokens(dict, w, mode), emb, freq, cfg));
  }
  DefinitionVectors out;
  out.principal = principal_component(raw, cfg);
  for (std::size_t i = 0; i < words.size(); ++i) {
    remove_direction(raw[i], out.principal);
    out.vectors.emplace(words[i], std::move(raw[i]));
  }
  return out;
}

/// Cache format: a `#PC u1 ... un` row, then `word<TAB>v1 ... vn` rows.
inline void save_definition_vectors(const DefinitionVectors& defs,
                                    const std::vector<std::string>& order,
                                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "#PC";
  for (double x : defs.principal) out << ' ' << fmt::format("{:.17g}", x);
  out << '\n';
  for (const auto& w : order) {
    out << w << '\t';
    const Vector& v = defs.at(w);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i > 0) out << ' ';
      out << fmt::format("{:.17g}", v[i]);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

inline DefinitionVectors load_definition_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open definition cache: " + path);
  DefinitionVectors defs;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> fields;
  auto parse_vector = [&](std::span<const std::string_view> parts) {
    Vector v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!detail::parse_double(parts[i], v[static_cast<Eigen::Index>(i)])) {
        throw ParseError(path, line_no, fmt::format("non-numeric component '{}'", parts[i]));
      }
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    if (line.starts_with("#PC")) {
      detail::split_whitespace(std::string_view(line).substr(3), fields);
      defs.principal = parse_vector(fields);
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path, line_no, "expected word<TAB>vector");
    detail::split_whitespace(std::string_view(line).substr(tab + 1), fields);
    Vector v = parse_vector(fields);
    if (defs.principal.size() != 0 && v.size() != defs.principal.size()) {
      throw ParseError(path, line_no, "dimension does not match principal component");
    }
    defs.vectors.emplace(line.substr(0, tab), std::move(v));
  }
  if (defs.principal.size() == 0) throw DataError("definition cache has no #PC row: " + path);
  return defs;
}

}  // namespace lexidebias
