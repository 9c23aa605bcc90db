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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "lexidebias/bias_eval.hpp"
#include "lexidebias/debias_model.hpp"
#include "lexidebias/embedding_store.hpp"
#include "lexidebias/error.hpp"
#include "lexidebias/gloss_corpus.hpp"
#include "lexidebias/semantic_eval.hpp"
#include "lexidebias/sif_encoder.hpp"
#include "lexidebias/training.hpp"

namespace lexidebias::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

/// Everything a run needs. Populated from a flat key=value config file
/// (`--config`) with command-line flags taking precedence.
struct RunConfig {
  std::string embeddings;
  std::string format = "word2vec";
  std::string dictionary;
  std::string gloss_mode = "all";
  std::string checkpoint;
  std::string out;
  std::string compare;
  std::string weat_spec;
  std::string graph;
  std::string seeds_file;
  std::string sembias;
  std::vector<std::string> similarity;
  std::vector<std::string> analogy;
  std::string words;
  std::string directions = "he:she";
  std::string he = "he";
  std::string she = "she";
  std::uint64_t seed = 0;
  int trials = 20;
  int dim = 0;  // 0 = keep input dimension
  int dev_size = 1000;
  Hyperparams hyper;
  SifConfig sif;
  std::string weight_mode = "sif";
  PermutationOptions permutation;
  PropagationOptions propagation;
};

namespace detail {

// Runs a pipeline stage, prefixing error messages with the stage name.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError(fmt::format("[{}] {}", name, e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("[{}] {}", name, e.what()));
  } catch (const DataError& e) {
    throw DataError(fmt::format("[{}] {}", name, e.what()));
  }
}

inline void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(fmt::format("{} is required", flag));
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError(fmt::format("{} path does not exist: {}", flag, path));
  }
}

inline std::filesystem::path output_dir(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("--out is required");
  std::filesystem::path dir(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(fmt::format("cannot create output directory {}: {}", cfg.out, ec.message()));
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw DataError("write failed: " + path.string());
}

inline std::string loss_csv(const TrainResult& r) {
  std::string csv = "epoch,train_loss,dev_loss\n";
  csv += fmt::format("0,{:.17g},{:.17g}\n", r.initial_train_loss, r.initial_dev_loss);
  for (const auto& e : r.history) {
    csv += fmt::format("{},{:.17g},{:.17g}\n", e.epoch, e.train_loss, e.dev_loss);
  }
  return csv;
}

inline Hyperparams hyper_with_seed(const RunConfig& cfg) {
  Hyperparams h = cfg.hyper;
  h.seed = cfg.seed;
  h.validate();
  return h;
}

inline SifConfig sif_config(const RunConfig& cfg) {
  SifConfig s = cfg.sif;
  s.weight_mode = parse_weight_mode(cfg.weight_mode);
  s.validate();
  return s;
}

inline EmbeddingSet load_input_embeddings(const RunConfig& cfg) {
  require_file(cfg.embeddings, "--embeddings");
  const auto format = parse_embedding_format(cfg.format);
  return stage("load-embeddings", [&] { return load_embeddings(cfg.embeddings, format); });
}

inline Eigen::Index encoded_dim(const RunConfig& cfg, Eigen::Index n) {
  if (cfg.dim < 0) throw ConfigError("--dim must be non-negative");
  return cfg.dim == 0 ? n : static_cast<Eigen::Index>(cfg.dim);
}

struct PreparedData {
  EmbeddingSet emb;
  std::vector<TrainSample> train;
  std::vector<TrainSample> dev;
  DefinitionVectors definitions;
  std::vector<std::string> order;
};

// Dictionary -> unigram table -> train/dev split -> SIF definition vectors -> samples.
inline PreparedData prepare_training_data(const RunConfig& cfg) {
  require_file(cfg.dictionary, "--dictionary");
  const GlossMode mode = parse_gloss_mode(cfg.gloss_mode);
  const SifConfig sif = sif_config(cfg);
  if (cfg.dev_size < 1) throw ConfigError("--dev-size must be >= 1");
  PreparedData data{load_input_embeddings(cfg), {}, {}, {}, {}};
  const GlossDictionary dict = stage("load-dictionary", [&] { return load_dictionary(cfg.dictionary); });
  const TrainSplit split = stage("split", [&] {
    return build_training_set(data.emb, dict, mode, static_cast<std::size_t>(cfg.dev_size), cfg.seed);
  });
  data.order = split.train_words;
  data.order.insert(data.order.end(), split.dev_words.begin(), split.dev_words.end());
  data.definitions = stage("definitions", [&] {
    return build_definition_vectors(data.order, dict, data.emb, unigram_probabilities(dict), mode, sif);
  });
  stage("samples", [&] {
    for (const auto& w : split.train_words) {
      data.train.push_back(make_sample(w, data.emb.at(w), data.definitions.at(w)));
    }
    for (const auto& w : split.dev_words) {
      data.dev.push_back(make_sample(w, data.emb.at(w), data.definitions.at(w)));
    }
    return 0;
  });
  logger()->info("training words: {} train, {} dev", data.train.size(), data.dev.size());
  return data;
}

inline ModelParams initial_params(const RunConfig& cfg, Eigen::Index n) {
  if (cfg.checkpoint.empty()) return init_params(n, encoded_dim(cfg, n), cfg.seed);
  require_file(cfg.checkpoint, "--checkpoint");
  ModelParams p = stage("load-checkpoint", [&] { return load_checkpoint(cfg.checkpoint); });
  if (p.n != n) {
    throw DataError(fmt::format("checkpoint expects dim {}, embeddings have {}", p.n, n));
  }
  if (cfg.dim != 0 && p.m != cfg.dim) {
    throw ConfigError(fmt::format("checkpoint encodes to {} dims but --dim is {}", p.m, cfg.dim));
  }
  return p;
}

}  // namespace detail

/// Autoencoder pre-training. Writes pretrain.bin and pretrain_loss.csv under --out.
inline void cmd_pretrain(const RunConfig& cfg, std::ostream& log) {
  const Hyperparams hyper = detail::hyper_with_seed(cfg);
  const EmbeddingSet emb = detail::load_input_embeddings(cfg);
  const auto dir = detail::output_dir(cfg);
  std::mt19937_64 rng(cfg.seed);
  const TrainResult result = detail::stage("pretrain", [&] {
    return pretrain_autoencoder(emb, detail::encoded_dim(cfg, emb.dim()), hyper, rng);
  });
  detail::stage("write", [&] {
    save_checkpoint(result.params, (dir / "pretrain.bin").string());
    detail::write_text(dir / "pretrain_loss.csv", detail::loss_csv(result));
    return 0;
  });
  fmt::print(log, "pretrain: best epoch {} dev J_c {:.6g} (initial {:.6g})\n", result.best_epoch,
             result.best_dev_loss, result.initial_dev_loss);
}

/// Full debiasing pipeline. Writes debiased.txt (word2vec text), model.bin,
/// loss.csv and definitions.tsv under --out.
inline void cmd_debias(const RunConfig& cfg, std::ostream& log) {
  const Hyperparams hyper = detail::hyper_with_seed(cfg);
  const auto dir = detail::output_dir(cfg);
  const detail::PreparedData data = detail::prepare_training_data(cfg);
  const ModelParams init = detail::initial_params(cfg, data.emb.dim());
  const TrainResult result =
      detail::stage("train", [&] { return train(data.train, data.dev, hyper, init); });
  const EmbeddingSet debiased =
      detail::stage("encode", [&] { return debias_vocabulary(result.params, data.emb); });
  detail::stage("write", [&] {
    save_embeddings(debiased, (dir / "debiased.txt").string(), EmbeddingFormat::word2vec_text);
    save_checkpoint(result.params, (dir / "model.bin").string());
    detail::write_text(dir / "loss.csv", detail::loss_csv(result));
    save_definition_vectors(data.definitions, data.order, (dir / "definitions.tsv").string());
    return 0;
  });
  fmt::print(log, "debias: best epoch {} dev loss {:.6g} (initial {:.6g}), {} words written\n",
             result.best_epoch, result.best_dev_loss, result.initial_dev_loss, debiased.size());
}

/// Monte-Carlo coefficient search. Writes hyperparams.cfg (loadable with
/// --config) and hypersearch_trials.csv under --out.
inline void cmd_hypersearch(const RunConfig& cfg, std::ostream& log) {
  const Hyperparams hyper = detail::hyper_with_seed(cfg);
  const auto dir = detail::output_dir(cfg);
  const detail::PreparedData data = detail::prepare_training_data(cfg);
  const ModelParams init = detail::initial_params(cfg, data.emb.dim());
  std::mt19937_64 rng(cfg.seed);
  const HyperSearchResult result = detail::stage(
      "hypersearch", [&] { return hyper_search(data.train, data.dev, hyper, init, cfg.trials, rng); });
  std::string trials = "trial,alpha,beta,gamma,dev_loss\n";
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    const auto& t = result.trials[i];
    trials += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", i, t.alpha, t.beta, t.gamma,
                          t.dev_loss);
  }
  const std::string fragment =
      fmt::format("# dev_loss={:.17g}\nalpha={:.17g}\nbeta={:.17g}\ngamma={:.17g}\n",
                  result.best_dev_loss, result.best.alpha, result.best.beta, result.best.gamma);
  detail::stage("write", [&] {
    detail::write_text(dir / "hyperparams.cfg", fragment);
    detail::write_text(dir / "hypersearch_trials.csv", trials);
    return 0;
  });
  fmt::print(log, "hypersearch: alpha={:.6g} beta={:.6g} gamma={:.6g} dev loss {:.6g}\n",
             result.best.alpha, result.best.beta, result.best.gamma, result.best_dev_loss);
}

namespace detail {

inline std::vector<Direction> parse_directions(const std::string& spec) {
  std::vector<Direction> dirs;
  std::string text = spec;
  std::replace(text.begin(), text.end(), ',', ' ');
  for (const auto& tok : lexidebias::detail::split_whitespace(text)) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
      throw ConfigError("directions must look like pos:neg[,pos:neg...], got '" + tok + "'");
    }
    dirs.push_back({tok.substr(0, colon), tok.substr(colon + 1)});
  }
  if (dirs.empty()) throw ConfigError("--directions is empty");
  return dirs;
}

inline std::string fixed(double v) { return fmt::format("{:.6f}", v); }

// Header "key" columns for one or two embedding sets.
inline std::string columns(const std::vector<std::string>& names, bool compare) {
  std::string out;
  for (const auto& n : names) {
    out += compare ? fmt::format(",{}_org", n) : "," + n;
  }
  if (compare) {
    for (const auto& n : names) out += fmt::format(",{}_deb", n);
  }
  return out;
}

}  // namespace detail

/// Runs one evaluation on --embeddings (and --compare, if given) and writes
/// CSV to `out`.
inline void cmd_eval(const RunConfig& cfg, const std::string& which, std::ostream& out) {
  static const std::vector<std::string> kKinds = {"weat",       "wat",     "sembias",
                                                  "similarity", "analogy", "directions"};
  if (std::find(kKinds.begin(), kKinds.end(), which) == kKinds.end()) {
    throw ConfigError("unknown evaluation '" + which + "'");
  }
  std::vector<EmbeddingSet> sets;
  sets.push_back(detail::load_input_embeddings(cfg));
  const bool compare = !cfg.compare.empty();
  if (compare) {
    detail::require_file(cfg.compare, "--compare");
    sets.push_back(detail::stage("load-compare", [&] {
      return load_embeddings(cfg.compare, parse_embedding_format(cfg.format));
    }));
  }
  using detail::fixed;

  if (which == "weat") {
    detail::require_file(cfg.weat_spec, "--weat-spec");
    const auto specs = detail::stage("load-weat", [&] { return load_weat_specs(cfg.weat_spec); });
    out << "test" << detail::columns({"statistic", "p_value", "effect_size"}, compare) << '\n';
    for (const auto& spec : specs) {
      std::vector<WeatResult> results;
      for (const auto& emb : sets) {
        results.push_back(detail::stage("weat", [&] { return run_weat(spec, emb, cfg.permutation); }));
      }
      out << spec.name;
      for (const auto& r : results) {
        out << ',' << fixed(r.statistic) << ',' << fixed(r.p_value) << ',' << fixed(r.effect_size);
      }
      out << '\n';
    }
  } else if (which == "wat") {
    detail::require_file(cfg.graph, "--graph");
    detail::require_file(cfg.seeds_file, "--seeds-file");
    const auto graph = detail::stage("load-graph", [&] {
      return load_association_graph(cfg.graph, cfg.seeds_file);
    });
    out << "test" << detail::columns({"pearson", "words"}, compare) << '\n';
    out << "wat";
    for (const auto& emb : sets) {
      const auto r = detail::stage("wat", [&] { return wat_correlation(graph, emb, cfg.propagation); });
      out << ',' << fixed(r.pearson) << ',' << r.words;
    }
    out << '\n';
  } else if (which == "sembias") {
    detail::require_file(cfg.sembias, "--sembias");
    const auto data = detail::stage("load-sembias", [&] { return load_sembias(cfg.sembias); });
    const bool has_subset = std::any_of(data.begin(), data.end(), [](const auto& i) { return i.subset; });
    out << "split" << detail::columns({"definition", "stereotype", "none"}, compare) << '\n';
    for (bool subset : {false, true}) {
      if (subset && !has_subset) continue;
      out << (subset ? "subset" : "all");
      for (const auto& emb : sets) {
        const auto r = detail::stage("sembias", [&] {
          return sembias_accuracy(data, emb, subset, cfg.he, cfg.she);
        });
        out << ',' << fixed(r.definition) << ',' << fixed(r.stereotype) << ',' << fixed(r.none);
      }
      out << '\n';
    }
  } else if (which == "similarity") {
    if (cfg.similarity.empty()) throw ConfigError("--similarity is required");
    out << "dataset" << detail::columns({"spearman", "coverage"}, compare) << '\n';
    for (const auto& path : cfg.similarity) {
      detail::require_file(path, "--similarity");
      const auto pairs = detail::stage("load-similarity", [&] { return load_similarity_pairs(path); });
      out << std::filesystem::path(path).stem().string();
      for (const auto& emb : sets) {
        const auto r = detail::stage("similarity", [&] { return similarity_benchmark(emb, pairs); });
        out << ',' << fixed(r.spearman) << ',' << fixed(r.coverage);
      }
      out << '\n';
    }
  } else if (which == "analogy") {
    if (cfg.analogy.empty()) throw ConfigError("--analogy is required");
    out << "section" << detail::columns({"accuracy", "coverage"}, compare) << '\n';
    for (const auto& path : cfg.analogy) {
      detail::require_file(path, "--analogy");
      const auto questions = detail::stage("load-analogy", [&] { return load_analogies(path); });
      std::vector<AnalogyReport> reports;
      for (const auto& emb : sets) {
        reports.push_back(detail::stage("analogy", [&] { return analogy_accuracy(emb, questions); }));
      }
      const std::string stem = std::filesystem::path(path).stem().string();
      for (std::size_t s = 0; s <= reports.front().sections.size(); ++s) {
        const bool overall = s == reports.front().sections.size();
        out << stem << '/' << (overall ? std::string("all") : reports.front().sections[s].section);
        for (const auto& r : reports) {
          const AnalogyScore& score = overall ? r.overall : r.sections[s];
          out << ',' << fixed(score.accuracy()) << ',' << fixed(score.coverage());
        }
        out << '\n';
      }
    }
  } else {
    detail::require_file(cfg.words, "--words");
    const auto words = detail::stage("load-words", [&] { return load_word_list(cfg.words); });
    const auto dirs = detail::parse_directions(cfg.directions);
    std::vector<std::string> labels;
    for (const auto& d : dirs) labels.push_back(d.label());
    std::vector<std::vector<DirectionRow>> tables;
    for (const auto& emb : sets) {
      tables.push_back(detail::stage("directions", [&] {
        return direction_similarity_table(emb, words, dirs);
      }));
    }
    out << "word" << detail::columns(labels, compare) << '\n';
    std::unordered_map<std::string, const DirectionRow*> second;
    if (compare) {
      for (const auto& row : tables[1]) second.emplace(row.word, &row);
    }
    for (const auto& row : tables[0]) {
      const DirectionRow* other = nullptr;
      if (compare) {
        auto it = second.find(row.word);
        if (it == second.end()) continue;
        other = it->second;
      }
      out << row.word;
      for (double c : row.cosines) out << ',' << fixed(c);
      if (other != nullptr) {
        for (double c : other->cosines) out << ',' << fixed(c);
      }
      out << '\n';
    }
  }
}

/// Parses arguments and dispatches to a subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Dictionary-guided debiasing of pre-trained word embeddings", "lexidebias"};
  app.set_config("--config", "", "Flat key=value run configuration");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  std::string which;
  auto& h = cfg.hyper;
  app.add_option("--embeddings", cfg.embeddings, "Pre-trained embeddings file");
  app.add_option("--format", cfg.format, "Embedding file format")->check(CLI::IsMember({"word2vec", "glove"}));
  app.add_option("--dictionary", cfg.dictionary, "Gloss TSV (headword, sense rank, gloss)");
  app.add_option("--gloss-mode", cfg.gloss_mode, "Which glosses define a word")->check(CLI::IsMember({"all", "dominant"}));
  app.add_option("--checkpoint", cfg.checkpoint, "Model checkpoint to start from");
  app.add_option("--out", cfg.out, "Output directory (training) or CSV file (eval)");
  app.add_option("--seed", cfg.seed, "Seed for every random choice");
  app.add_option("--compare", cfg.compare, "Second embeddings file for paired Org/Deb columns");
  app.add_option("--weat-spec", cfg.weat_spec, "WEAT spec JSON (object or array)");
  app.add_option("--graph", cfg.graph, "Association graph edge TSV");
  app.add_option("--seeds-file", cfg.seeds_file, "Masculine/feminine seed pairs TSV");
  app.add_option("--sembias", cfg.sembias, "SemBias TSV");
  app.add_option("--similarity", cfg.similarity, "Word similarity TSV (repeatable)");
  app.add_option("--analogy", cfg.analogy, "Google-format analogy file (repeatable)");
  app.add_option("--words", cfg.words, "Word list for the direction table");
  app.add_option("--directions", cfg.directions, "Directions as pos:neg[,pos:neg...]");
  app.add_option("--he", cfg.he, "Masculine pole of the SemBias direction");
  app.add_option("--she", cfg.she, "Feminine pole of the SemBias direction");
  app.add_option("--trials", cfg.trials, "Hyper-parameter search trials");
  app.add_option("--dim", cfg.dim, "Encoded dimension (0 keeps the input dimension)");
  app.add_option("--dev-size", cfg.dev_size, "Held-out dev words");
  app.add_option("--alpha", h.alpha, "Reconstruction loss weight");
  app.add_option("--beta", h.beta, "Dictionary agreement loss weight");
  app.add_option("--gamma", h.gamma, "Bias orthogonality loss weight");
  app.add_option("--lr", h.learning_rate, "Adam learning rate");
  app.add_option("--dropout", h.dropout, "Dropout probability");
  app.add_option("--batch-size", h.batch_size, "Training mini-batch size");
  app.add_option("--pretrain-batch-size", h.pretrain_batch_size, "Pre-training mini-batch size");
  app.add_option("--pretrain-words", h.pretrain_words, "Words drawn for pre-training");
  app.add_option("--epochs", h.epochs, "Maximum training epochs");
  app.add_option("--patience", h.patience, "Early-stopping patience in epochs");
  app.add_option("--sif-a", cfg.sif.smoothing, "SIF smoothing constant");
  app.add_option("--weight-mode", cfg.weight_mode, "Gloss token weighting")->check(CLI::IsMember({"sif", "inverse_prob"}));
  app.add_option("--pc-iterations", cfg.sif.pc_iterations, "Power iterations for the principal component");
  app.add_option("--mc-samples", cfg.permutation.mc_samples, "Monte-Carlo permutations");
  app.add_option("--max-exhaustive", cfg.permutation.max_exhaustive, "Largest exhaustive permutation count");
  app.add_option("--lambda", cfg.propagation.lambda, "WAT propagation factor");

  auto* pretrain = app.add_subcommand("pretrain", "Pre-train the encoder and reconstruction decoder");
  auto* debias = app.add_subcommand("debias", "Train the debiasing encoder and write debiased embeddings");
  auto* eval = app.add_subcommand("eval", "Evaluate embeddings");
  eval->add_option("which", which, "weat|wat|sembias|similarity|analogy|directions")->required();
  auto* hypersearch = app.add_subcommand("hypersearch", "Monte-Carlo search of the loss weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  cfg.permutation.seed = cfg.seed;
  try {
    if (pretrain->parsed()) {
      cmd_pretrain(cfg, err);
    } else if (debias->parsed()) {
      cmd_debias(cfg, err);
    } else if (hypersearch->parsed()) {
      cmd_hypersearch(cfg, err);
    } else if (eval->parsed()) {
      if (cfg.out.empty()) {
        cmd_eval(cfg, which, out);
      } else {
        std::ofstream file(cfg.out);
        if (!file) throw DataError("cannot open for writing: " + cfg.out);
        cmd_eval(cfg, which, file);
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}

}  // namespace lexidebias::cli
