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

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lexidebias/embedding_store.hpp"
#include "lexidebias/error.hpp"
#include "lexidebias/geometry.hpp"
#include "lexidebias/stats.hpp"
#include "lexidebias/text.hpp"
#include "lexidebias/training.hpp"

namespace lexidebias {

struct SimilarityPair {
  std::string word1;
  std::string word2;
  double human_score = 0.0;
};

/// `word1<TAB>word2<TAB>score` rows.
inline std::vector<SimilarityPair> load_similarity_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open similarity file: " + path);
  std::vector<SimilarityPair> pairs;
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    detail::split_tabs(line, fields);
    SimilarityPair p;
    if (fields.size() != 3 || !detail::parse_double(fields[2], p.human_score) ||
        !std::isfinite(p.human_score)) {
      throw ParseError(path, line_no, "expected word1<TAB>word2<TAB>score");
    }
    p.word1 = std::string(detail::trim(fields[0]));
    p.word2 = std::string(detail::trim(fields[1]));
    pairs.push_back(std::move(p));
  }
  return pairs;
}

struct SimilarityResult {
  double spearman = 0.0;
  double coverage = 0.0;
  std::size_t covered = 0;
  std::size_t total = 0;
};

/// Spearman correlation between cosine similarities and human scores over the
/// pairs whose words are both in the vocabulary.
inline SimilarityResult similarity_benchmark(const EmbeddingSet& emb,
                                             const std::vector<SimilarityPair>& pairs) {
  std::vector<double> model, human;
  for (const auto& p : pairs) {
    const Vector* u = emb.find(p.word1);
    const Vector* v = emb.find(p.word2);
    if (u == nullptr || v == nullptr || u->norm() == 0.0 || v->norm() == 0.0) continue;
    model.push_back(cosine(*u, *v));
    human.push_back(p.human_score);
  }
  SimilarityResult r;
  r.total = pairs.size();
  r.covered = model.size();
  if (r.covered < 3) throw DataError("similarity benchmark: fewer than 3 covered pairs");
  r.coverage = static_cast<double>(r.covered) / static_cast<double>(r.total);
  r.spearman = spearman(model, human);
  return r;
}

/// Unit-normalized copy of a vocabulary for repeated argmax-cosine queries.
class AnalogySolver {
 public:
  explicit AnalogySolver(const EmbeddingSet& emb) : emb_(emb), units_(emb.size(), emb.dim()) {
    for (std::size_t i = 0; i < emb.size(); ++i) {
      const double n = emb[i].norm();
      if (n > 0.0) {
        units_.row(static_cast<Eigen::Index>(i)) = (emb[i] / n).transpose();
      } else {
        units_.row(static_cast<Eigen::Index>(i)).setZero();
      }
    }
  }

  /// argmax_d cos(b - a + c, d), excluding the inputs when asked. Ties go to
  /// the lexicographically smallest word.
  std::string predict(const std::string& a, const std::string& b, const std::string& c,
                      bool exclude_inputs = true) const {
    const Vector query = emb_.at(b) - emb_.at(a) + emb_.at(c);
    const double qn = query.norm();
    if (qn == 0.0) throw NumericError(fmt::format("analogy {}:{}::{}:? has a zero query", a, b, c));
    const Vector scores = units_ * (query / qn);
    const auto& words = emb_.words();
    std::size_t best = words.size();
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (exclude_inputs && (words[i] == a || words[i] == b || words[i] == c)) continue;
      if (emb_[i].norm() == 0.0) continue;
      const double s = scores[static_cast<Eigen::Index>(i)];
      if (best == words.size() || s > scores[static_cast<Eigen::Index>(best)] ||
          (s == scores[static_cast<Eigen::Index>(best)] && words[i] < words[best])) {
        best = i;
      }
    }
    if (best == words.size()) throw DataError("analogy: no candidate words");
    return words[best];
  }

 private:
  const EmbeddingSet& emb_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> units_;
};

inline std::string cosadd(const EmbeddingSet& emb, const std::string& a, const std::string& b,
                          const std::string& c, bool exclude_inputs = true) {
  return AnalogySolver(emb).predict(a, b, c, exclude_inputs);
}

struct AnalogyQuestion {
  std::string a, b, c, d;
  std::string section;
};

/// Google analogy format: `: section` headers followed by 4-word lines.
inline std::vector<AnalogyQuestion> load_analogies(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open analogy file: " + path);
  std::vector<AnalogyQuestion> questions;
  std::string section = "default";
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.starts_with(":")) {
      section = std::string(detail::trim(trimmed.substr(1)));
      continue;
    }
    detail::split_whitespace(trimmed, fields);
    if (fields.size() != 4) throw ParseError(path, line_no, "expected 4 words");
    questions.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2]),
                         std::string(fields[3]), section});
  }
  return questions;
}

struct AnalogyScore {
  std::string section;
  std::size_t correct = 0;
  std::size_t covered = 0;
  std::size_t total = 0;

  double accuracy() const {
    return covered == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(covered);
  }
  double coverage() const {
    return total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total);
  }
};

struct AnalogyReport {
  AnalogyScore overall;
  std::vector<AnalogyScore> sections;  // in first-appearance order
};

/// CosAdd accuracy over the questions whose four words are all in the vocabulary.
inline AnalogyReport analogy_accuracy(const EmbeddingSet& emb,
                                      const std::vector<AnalogyQuestion>& questions,
                                      unsigned threads = configured_threads()) {
  const AnalogySolver solver(emb);
  // 0 = not covered, 1 = wrong, 2 = right
  std::vector<char> outcome(questions.size(), 0);
  parallel_for(questions.size(), threads, [&](std::size_t i) {
    const auto& q = questions[i];
    if (!emb.contains(q.a) || !emb.contains(q.b) || !emb.contains(q.c) || !emb.contains(q.d)) return;
    outcome[i] = solver.predict(q.a, q.b, q.c) == q.d ? 2 : 1;
  });
  AnalogyReport report;
  report.overall.section = "all";
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    auto [it, inserted] = slot.emplace(questions[i].section, report.sections.size());
    if (inserted) report.sections.push_back({questions[i].section});
    for (AnalogyScore* s : {&report.overall, &report.sections[it->second]}) {
      ++s->total;
      if (outcome[i] > 0) ++s->covered;
      if (outcome[i] == 2) ++s->correct;
    }
  }
  return report;
}

struct Direction {
  std::string positive;
  std::string negative;

  std::string label() const { return positive + "-" + negative; }
};

struct DirectionRow {
  std::string word;
  std::vector<double> cosines;
};

/// One row per covered word: cos(word, pos - neg) for each direction.
inline std::vector<DirectionRow> direction_similarity_table(const EmbeddingSet& emb,
                                                            const std::vector<std::string>& words,
                                                            const std::vector<Direction>& directions) {
  std::vector<Vector> dirs;
  for (const auto& d : directions) {
    const Vector* p = emb.find(d.positive);
    const Vector* q = emb.find(d.negative);
    if (p == nullptr || q == nullptr) {
      throw NotFound(fmt::format("direction endpoint missing from embeddings: {}", d.label()));
    }
    dirs.push_back(*p - *q);
  }
  std::vector<DirectionRow> rows;
  for (const auto& w : words) {
    const Vector* v = emb.find(w);
    if (v == nullptr) {
      logger()->warn("direction table: '{}' not in embeddings, skipped", w);
      continue;
    }
    DirectionRow row{w, {}};
    for (const auto& d : dirs) row.cosines.push_back(cosine(*v, d));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Words separated by commas and/or whitespace; '#' starts a comment line.
inline std::vector<std::string> load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word list: " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).starts_with("#")) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    for (auto& w : detail::split_whitespace(line)) words.push_back(std::move(w));
  }
  return words;
}

}  // namespace lexidebias
