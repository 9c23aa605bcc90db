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
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "lexidebias/embedding_store.hpp"
#include "lexidebias/error.hpp"
#include "lexidebias/text.hpp"

namespace lexidebias {

using Tokens = std::vector<std::string>;

enum class GlossMode { all, dominant };

inline GlossMode parse_gloss_mode(std::string_view name) {
  if (name == "all") return GlossMode::all;
  if (name == "dominant") return GlossMode::dominant;
  throw ConfigError(fmt::format("unknown gloss mode '{}' (expected all|dominant)", name));
}

/// Headword -> glosses in sense-dominance order (first = most frequent sense).
class GlossDictionary {
 public:
  using Entries = std::map<std::string, std::vector<Tokens>>;

  void add_gloss(const std::string& headword, Tokens gloss) {
    if (gloss.empty()) throw DataError("empty gloss for '" + headword + "'");
    entries_[headword].push_back(std::move(gloss));
  }

  const Entries& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool contains(const std::string& word) const { return entries_.contains(word); }

  const std::vector<Tokens>& glosses(const std::string& word) const {
    auto it = entries_.find(word);
    if (it == entries_.end()) throw NotFound("headword '" + word + "' not in dictionary");
    return it->second;
  }

 private:
  Entries entries_;
};

/// Reads `headword<TAB>sense_rank<TAB>gloss text` rows. Glosses are lower-cased
/// and whitespace-tokenized, then ordered by rank (stable for equal ranks).
inline GlossDictionary load_dictionary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dictionary file: " + path);

  struct Row {
    long long rank;
    Tokens tokens;
  };
  std::map<std::string, std::vector<Row>> rows;
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    detail::split_tabs(line, fields);
    if (fields.size() != 3) {
      throw ParseError(path, line_no,
                       fmt::format("expected 3 tab-separated fields, got {}", fields.size()));
    }
    const std::string headword(detail::trim(fields[0]));
    if (headword.empty()) throw ParseError(path, line_no, "empty headword");
    long long rank = 0;
    if (!detail::parse_integer(fields[1], rank) || rank <= 0) {
      throw ParseError(path, line_no,
                       fmt::format("sense rank '{}' is not a positive integer", fields[1]));
    }
    Tokens tokens = detail::split_whitespace(detail::to_lower(fields[2]));
    if (tokens.empty()) {
      logger()->warn("{}:{}: empty gloss for '{}' skipped", path, line_no, headword);
      continue;
    }
    rows[headword].push_back({rank, std::move(tokens)});
  }

  GlossDictionary dict;
  for (auto& [headword, senses] : rows) {
    std::stable_sort(senses.begin(), senses.end(),
                     [](const Row& a, const Row& b) { return a.rank < b.rank; });
    for (auto& sense : senses) dict.add_gloss(headword, std::move(sense.tokens));
  }
  return dict;
}

inline Tokens select_gloss_tokens(const GlossDictionary& dict, const std::string& word,
                                  GlossMode mode) {
  const auto& glosses = dict.glosses(word);
  if (mode == GlossMode::dominant) return glosses.front();
  Tokens out;
  for (const auto& g : glosses) out.insert(out.end(), g.begin(), g.end());
  return out;
}

/// Unigram counts over every gloss token in the dictionary.
class FrequencyTable {
 public:
  void add(const std::string& token, std::uint64_t count = 1) {
    counts_[token] += count;
    total_ += count;
  }

  std::uint64_t count(const std::string& token) const {
    auto it = counts_.find(token);
    return it == counts_.end() ? 0 : it->second;
  }
  std::uint64_t total() const noexcept { return total_; }
  const std::unordered_map<std::string, std::uint64_t>& counts() const noexcept {
    return counts_;
  }

  double probability(const std::string& token) const {
    return total_ == 0 ? 0.0 : static_cast<double>(count(token)) / static_cast<double>(total_);
  }

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

inline FrequencyTable unigram_probabilities(const GlossDictionary& dict) {
  if (dict.empty()) throw DataError("cannot compute unigram statistics of an empty dictionary");
  FrequencyTable table;
  for (const auto& [headword, glosses] : dict.entries()) {
    for (const auto& gloss : glosses) {
      for (const auto& token : gloss) table.add(token);
    }
  }
  return table;
}

/// Gloss tokens with out-of-vocabulary tokens removed.
inline Tokens in_vocabulary_tokens(const Tokens& tokens, const EmbeddingSet& emb) {
  Tokens kept;
  for (const auto& t : tokens) {
    if (emb.contains(t)) kept.push_back(t);
  }
  return kept;
}

struct TrainSplit {
  std::vector<std::string> train_words;
  std::vector<std::string> dev_words;
  std::uint64_t seed = 0;
};

/// Headwords that are in the embedding vocabulary and whose selected gloss
/// keeps at least one in-vocabulary token. Sorted by headword.
inline std::vector<std::string> usable_headwords(const EmbeddingSet& emb,
                                                 const GlossDictionary& dict, GlossMode mode) {
  std::vector<std::string> usable;
  for (const auto& [headword, glosses] : dict.entries()) {
    if (!emb.contains(headword)) continue;
    if (in_vocabulary_tokens(select_gloss_tokens(dict, headword, mode), emb).empty()) continue;
    usable.push_back(headword);
  }
  return usable;
}

inline TrainSplit build_training_set(const EmbeddingSet& emb, const GlossDictionary& dict,
                                     GlossMode mode, std::size_t dev_size, std::uint64_t seed) {
  std::vector<std::string> usable = usable_headwords(emb, dict, mode);
  if (dev_size >= usable.size()) {
    throw DataError(fmt::format("dev size {} must be smaller than the {} usable headwords",
                                dev_size, usable.size()));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(usable.begin(), usable.end(), rng);
  TrainSplit split;
  split.seed = seed;
  split.dev_words.assign(usable.begin(), usable.begin() + static_cast<std::ptrdiff_t>(dev_size));
  split.train_words.assign(usable.begin() + static_cast<std::ptrdiff_t>(dev_size), usable.end());
  return split;
}

}  // namespace lexidebias
