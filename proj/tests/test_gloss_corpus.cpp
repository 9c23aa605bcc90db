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

#include <random>
#include <set>

#include <gtest/gtest.h>

#include "lexidebias/gloss_corpus.hpp"
#include "support/test_util.hpp"

namespace lexidebias {
namespace {

using testing::TempDir;
using testing::write_file;

GlossDictionary dog_dictionary(TempDir& dir) {
  return load_dictionary(
      write_file(dir.file("d.tsv"), "dog\t2\tTo follow\ndog\t1\ta Domestic  animal\ncat\t1\ta pet\n"));
}

TEST(LoadDictionary, GroupsAndSortsByRank) {
  TempDir dir;
  const auto dict = dog_dictionary(dir);
  ASSERT_EQ(dict.size(), 2u);
  const auto& glosses = dict.glosses("dog");
  ASSERT_EQ(glosses.size(), 2u);
  EXPECT_EQ(glosses[0], (Tokens{"a", "domestic", "animal"}));
  EXPECT_EQ(glosses[1], (Tokens{"to", "follow"}));
}

TEST(LoadDictionary, Errors) {
  TempDir dir;
  try {
    load_dictionary(write_file(dir.file("a.tsv"), "dog\t1\tok\ncat\t1\n"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_dictionary(write_file(dir.file("b.tsv"), "dog\tfirst\tan animal\n")), ParseError);
  EXPECT_THROW(load_dictionary(write_file(dir.file("c.tsv"), "dog\t0\tan animal\n")), ParseError);
  EXPECT_THROW(load_dictionary(dir.file("missing.tsv")), DataError);
}

TEST(LoadDictionary, EmptyGlossSkippedWithWarning) {
  TempDir dir;
  testing::LogCapture log;
  const auto dict = load_dictionary(write_file(dir.file("d.tsv"), "dog\t1\t  \ncat\t1\ta pet\n"));
  EXPECT_FALSE(dict.contains("dog"));
  EXPECT_TRUE(dict.contains("cat"));
  EXPECT_TRUE(log.contains("empty gloss"));
}

TEST(SelectGlossTokens, Modes) {
  TempDir dir;
  const auto dict = dog_dictionary(dir);
  EXPECT_EQ(select_gloss_tokens(dict, "dog", GlossMode::all),
            (Tokens{"a", "domestic", "animal", "to", "follow"}));
  EXPECT_EQ(select_gloss_tokens(dict, "dog", GlossMode::dominant),
            (Tokens{"a", "domestic", "animal"}));
  EXPECT_EQ(select_gloss_tokens(dict, "cat", GlossMode::all),
            select_gloss_tokens(dict, "cat", GlossMode::dominant));
  EXPECT_THROW(select_gloss_tokens(dict, "emu", GlossMode::all), NotFound);
}

TEST(UnigramProbabilities, Counts) {
  GlossDictionary dict;
  dict.add_gloss("x", {"a", "a"});
  dict.add_gloss("y", {"b"});
  const auto freq = unigram_probabilities(dict);
  EXPECT_EQ(freq.total(), 3u);
  EXPECT_DOUBLE_EQ(freq.probability("a"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(freq.probability("b"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(freq.probability("zzz"), 0.0);
  EXPECT_THROW(unigram_probabilities(GlossDictionary{}), DataError);
}

TEST(UnigramProbabilities, SumToOneOnRandomDictionaries) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> token(0, 40), len(1, 8), glosses(1, 3);
  for (int trial = 0; trial < 50; ++trial) {
    GlossDictionary dict;
    for (int h = 0; h < 20; ++h) {
      for (int g = glosses(rng); g > 0; --g) {
        Tokens t;
        for (int k = len(rng); k > 0; --k) t.push_back("t" + std::to_string(token(rng)));
        dict.add_gloss("h" + std::to_string(h), t);
      }
    }
    const auto freq = unigram_probabilities(dict);
    double sum = 0.0;
    std::uint64_t direct = 0;
    for (const auto& [tok, count] : freq.counts()) sum += freq.probability(tok);
    for (const auto& [h, gs] : dict.entries()) {
      for (const auto& g : gs) direct += g.size();
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(freq.total(), direct);
  }
}

struct SplitFixture {
  EmbeddingSet emb{2};
  GlossDictionary dict;

  explicit SplitFixture(int headwords) {
    for (int i = 0; i < headwords; ++i) {
      const std::string w = "h" + std::to_string(i);
      emb.add(w, Vector::Constant(2, i + 1.0));
      dict.add_gloss(w, {"h" + std::to_string((i + 1) % headwords), "oov_token"});
    }
  }
};

TEST(BuildTrainingSet, SizesAndDisjointness) {
  SplitFixture f(5000);
  const auto split = build_training_set(f.emb, f.dict, GlossMode::all, 1000, 3);
  EXPECT_EQ(split.train_words.size(), 4000u);
  EXPECT_EQ(split.dev_words.size(), 1000u);
  std::set<std::string> all(split.train_words.begin(), split.train_words.end());
  for (const auto& w : split.dev_words) EXPECT_TRUE(all.insert(w).second);
  EXPECT_EQ(all.size(), 5000u);
}

TEST(BuildTrainingSet, FullyOovGlossAndUnknownHeadwordExcluded) {
  SplitFixture f(10);
  f.dict.add_gloss("h3", {"more"});  // second sense; dominant stays usable
  GlossDictionary d2 = f.dict;
  d2.add_gloss("ghost", {"h1"});     // headword without an embedding
  EmbeddingSet emb = f.emb;
  emb.add("orphan", Vector::Ones(2));
  d2.add_gloss("orphan", {"nothing", "known"});
  const auto split = build_training_set(emb, d2, GlossMode::all, 2, 9);
  std::set<std::string> all(split.train_words.begin(), split.train_words.end());
  all.insert(split.dev_words.begin(), split.dev_words.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_FALSE(all.contains("orphan"));
  EXPECT_FALSE(all.contains("ghost"));
  for (const auto& w : all) {
    EXPECT_FALSE(in_vocabulary_tokens(select_gloss_tokens(d2, w, GlossMode::all), emb).empty());
  }
}

TEST(BuildTrainingSet, DeterministicAndValidated) {
  SplitFixture f(50);
  const auto a = build_training_set(f.emb, f.dict, GlossMode::dominant, 10, 42);
  const auto b = build_training_set(f.emb, f.dict, GlossMode::dominant, 10, 42);
  const auto c = build_training_set(f.emb, f.dict, GlossMode::dominant, 10, 43);
  EXPECT_EQ(a.train_words, b.train_words);
  EXPECT_EQ(a.dev_words, b.dev_words);
  EXPECT_NE(a.dev_words, c.dev_words);
  EXPECT_THROW(build_training_set(f.emb, f.dict, GlossMode::all, 50, 1), DataError);
}

}  // namespace
}  // namespace lexidebias
