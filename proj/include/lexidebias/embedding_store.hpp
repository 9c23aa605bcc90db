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

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "lexidebias/error.hpp"
#include "lexidebias/geometry.hpp"
#include "lexidebias/text.hpp"

namespace lexidebias {

enum class EmbeddingFormat { word2vec_text, glove_text };

/// Vocabulary-indexed table of dense word vectors. Insertion order is the
/// vocabulary order and is preserved by save/load.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  explicit EmbeddingSet(Eigen::Index dim) : dim_(dim) {
    if (dim <= 0) throw DataError("embedding dimension must be positive");
  }

  Eigen::Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::vector<Vector>& vectors() const noexcept { return vectors_; }

  /// Appends `word`. Returns false (and stores nothing) if it is already present.
  bool add(std::string word, Vector vec) {
    if (vec.size() != dim_) {
      throw DataError(fmt::format("vector for '{}' has {} components, expected {}", word,
                                  vec.size(), dim_));
    }
    if (!vec.allFinite()) throw DataError(fmt::format("vector for '{}' is not finite", word));
    if (index_.contains(word)) return false;
    index_.emplace(word, words_.size());
    words_.push_back(std::move(word));
    vectors_.push_back(std::move(vec));
    return true;
  }

  bool contains(std::string_view word) const { return index_.contains(std::string(word)); }

  /// Stored vector, or nullptr when the word is absent.
  const Vector* find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? nullptr : &vectors_[it->second];
  }

  const Vector& at(std::string_view word) const {
    const Vector* v = find(word);
    if (v == nullptr) throw NotFound(fmt::format("word '{}' not in embeddings", word));
    return *v;
  }

  const Vector& operator[](std::size_t i) const { return vectors_[i]; }

 private:
  Eigen::Index dim_ = 0;
  std::vector<std::string> words_;
  std::vector<Vector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline EmbeddingFormat parse_embedding_format(std::string_view name) {
  if (name == "word2vec" || name == "word2vec_text") return EmbeddingFormat::word2vec_text;
  if (name == "glove" || name == "glove_text") return EmbeddingFormat::glove_text;
  throw ConfigError(fmt::format("unknown embedding format '{}'", name));
}

inline EmbeddingSet load_embeddings(const std::string& path, EmbeddingFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path);

  EmbeddingSet set;
  bool have_set = false;
  long long declared_rows = -1;
  long long rows = 0;
  std::size_t line_no = 0;
  std::string line;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    detail::split_whitespace(line, fields);
    if (fields.empty()) continue;

    if (format == EmbeddingFormat::word2vec_text && declared_rows < 0) {
      long long dim = 0;
      if (fields.size() != 2 || !detail::parse_integer(fields[0], declared_rows) ||
          !detail::parse_integer(fields[1], dim) || declared_rows < 0 || dim <= 0) {
        throw ParseError(path, line_no, "expected word2vec header '<vocab_size> <dim>'");
      }
      set = EmbeddingSet(dim);
      have_set = true;
      continue;
    }
    if (fields.size() < 2) throw ParseError(path, line_no, "row has no vector components");
    const auto dim = static_cast<Eigen::Index>(fields.size() - 1);
    if (!have_set) {
      set = EmbeddingSet(dim);
      have_set = true;
    } else if (dim != set.dim()) {
      throw ParseError(path, line_no,
                       fmt::format("row has {} components, expected {}", dim, set.dim()));
    }
    Vector vec(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (!detail::parse_double(fields[static_cast<std::size_t>(i) + 1], vec[i]) ||
          !std::isfinite(vec[i])) {
        throw ParseError(path, line_no,
                         fmt::format("non-numeric component '{}'", fields[i + 1]));
      }
    }
    ++rows;
    std::string word(fields[0]);
    if (!set.add(word, std::move(vec))) {
      logger()->warn("{}:{}: duplicate word '{}' ignored (first occurrence kept)", path,
                     line_no, word);
    }
  }
  if (rows == 0) throw DataError("embeddings file has no vectors: " + path);
  if (declared_rows >= 0 && declared_rows != rows) {
    throw ParseError(path, 1,
                     fmt::format("header declares {} rows but file has {}", declared_rows, rows));
  }
  return set;
}

inline void save_embeddings(const EmbeddingSet& set, const std::string& path,
                            EmbeddingFormat format) {
  if (set.empty()) throw DataError("refusing to save an empty vocabulary");
  std::FILE* out = std::fopen(path.c_str(), "wb");
  if (out == nullptr) throw DataError("cannot open for writing: " + path);
  fmt::memory_buffer buf;
  if (format == EmbeddingFormat::word2vec_text) {
    fmt::format_to(std::back_inserter(buf), "{} {}\n", set.size(), set.dim());
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    buf.append(set.words()[i]);
    for (double x : set[i]) fmt::format_to(std::back_inserter(buf), " {:.6f}", x);
    buf.push_back('\n');
  }
  const bool ok = std::fwrite(buf.data(), 1, buf.size(), out) == buf.size();
  if (std::fclose(out) != 0 || !ok) throw DataError("write failed: " + path);
}

}  // namespace lexidebias
