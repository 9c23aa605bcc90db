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
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "lexidebias/debias_model.hpp"
#include "lexidebias/embedding_store.hpp"
#include "lexidebias/error.hpp"

namespace lexidebias {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct TrainResult {
  ModelParams params;                // best-dev snapshot (epoch 0 = the initial parameters)
  std::vector<EpochRecord> history;  // epochs actually run, starting at 1
  double initial_train_loss = 0.0;
  double initial_dev_loss = 0.0;
  double best_dev_loss = 0.0;
  int best_epoch = 0;
};

/// Mean total loss with dropout disabled.
inline double mean_loss(const ModelParams& params, std::span<const TrainSample> samples,
                        const Hyperparams& hyper) {
  if (samples.empty()) throw DataError("mean_loss: no samples");
  double sum = 0.0;
  for (const auto& s : samples) sum += total_loss(params, s, hyper);
  return sum / static_cast<double>(samples.size());
}

namespace detail {

inline void check_finite_loss(double loss, int epoch, const char* phase) {
  if (!std::isfinite(loss)) {
    throw NumericError(fmt::format("{} loss became {} at epoch {}", phase, loss, epoch));
  }
}

// Shuffled mini-batch Adam with best-dev snapshot selection and early stopping.
template <typename Rng>
TrainResult fit(std::span<const TrainSample> train, std::span<const TrainSample> dev,
                const Hyperparams& hyper, int batch_size, const ModelParams& init, Rng& rng) {
  if (train.empty() || dev.empty()) throw DataError("training needs non-empty train and dev sets");
  TrainResult result;
  result.params = init;
  result.initial_train_loss = mean_loss(init, train, hyper);
  result.initial_dev_loss = mean_loss(init, dev, hyper);
  check_finite_loss(result.initial_dev_loss, 0, "dev");
  result.best_dev_loss = result.initial_dev_loss;

  ModelParams params = init;
  AdamState adam(params);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainSample> batch;
  int since_best = 0;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train[order[i]]);
      BatchGradient g = gradients(params, std::span<const TrainSample>(batch), hyper, rng);
      check_finite_loss(g.loss, epoch, "train");
      train_sum += g.loss * static_cast<double>(batch.size());
      adam_step(adam, params, g.grad, hyper.learning_rate);
    }
    EpochRecord record{epoch, train_sum / static_cast<double>(train.size()),
                       mean_loss(params, dev, hyper)};
    check_finite_loss(record.dev_loss, epoch, "dev");
    result.history.push_back(record);
    logger()->debug("epoch {}: train {:.6g} dev {:.6g}", epoch, record.train_loss, record.dev_loss);
    if (record.dev_loss < result.best_dev_loss) {
      result.best_dev_loss = record.dev_loss;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= hyper.patience) {
      break;
    }
  }
  return result;
}

}  // namespace detail

/// Joint training of E, D_c and D_d on the weighted total loss.
inline TrainResult train(std::span<const TrainSample> samples, std::span<const TrainSample> dev,
                         const Hyperparams& hyper, const ModelParams& init) {
  hyper.validate();
  std::mt19937_64 rng(hyper.seed);
  return detail::fit(samples, dev, hyper, hyper.batch_size, init, rng);
}

/// Autoencoder pre-training of E and D_c on the reconstruction loss alone.
/// Draws `pretrain_words` words, holds out 10% as the selection set and
/// leaves D_d at its initialization.
template <typename Rng>
TrainResult pretrain_autoencoder(const EmbeddingSet& emb, Eigen::Index m, const Hyperparams& hyper,
                                 Rng& rng) {
  hyper.validate();
  const auto count = static_cast<std::size_t>(hyper.pretrain_words);
  if (emb.size() < count) {
    throw DataError(fmt::format("pre-training needs {} words but the vocabulary has {}", count,
                                emb.size()));
  }
  std::vector<std::size_t> order(emb.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(count);

  const std::size_t dev_count = std::max<std::size_t>(1, count / 10);
  std::vector<TrainSample> samples;
  samples.reserve(count);
  const Vector zero = Vector::Zero(emb.dim());
  for (std::size_t i : order) samples.push_back({emb.words()[i], emb[i], zero, zero});
  const std::span<const TrainSample> all(samples);

  Hyperparams recon = hyper;
  recon.alpha = 1.0;
  recon.beta = 0.0;
  recon.gamma = 0.0;
  const ModelParams init = init_params(emb.dim(), m, hyper.seed);
  return detail::fit(all.subspan(dev_count), all.first(dev_count), recon,
                     hyper.pretrain_batch_size, init, rng);
}

struct HyperTrial {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double dev_loss = 0.0;
};

struct HyperSearchResult {
  Hyperparams best;
  double best_dev_loss = 0.0;
  std::vector<HyperTrial> trials;
};

/// Monte-Carlo search over (alpha, beta, gamma). Each trial draws beta and
/// gamma log-uniformly from [1e-5, 1], pairs them with alpha = 1, normalizes
/// to unit sum, trains min(epochs, 3) epochs from `init` and scores the dev
/// total loss. Ties keep the earlier trial.
template <typename Rng>
HyperSearchResult hyper_search(std::span<const TrainSample> train_set,
                               std::span<const TrainSample> dev, const Hyperparams& base,
                               const ModelParams& init, int trials, Rng& rng) {
  if (trials < 1) throw ConfigError("hyper_search needs at least one trial");
  base.validate();
  std::uniform_real_distribution<double> log_coef(std::log(1e-5), 0.0);
  HyperSearchResult result;
  for (int t = 0; t < trials; ++t) {
    const double b = std::exp(log_coef(rng));
    const double g = std::exp(log_coef(rng));
    const double sum = 1.0 + b + g;
    Hyperparams h = base;
    h.beta = b / sum;
    h.gamma = g / sum;
    h.alpha = 1.0 - h.beta - h.gamma;
    h.epochs = std::min(base.epochs, 3);
    const TrainResult run = train(train_set, dev, h, init);
    result.trials.push_back({h.alpha, h.beta, h.gamma, run.best_dev_loss});
    if (t == 0 || run.best_dev_loss < result.best_dev_loss) {
      result.best_dev_loss = run.best_dev_loss;
      result.best = base;
      result.best.alpha = h.alpha;
      result.best.beta = h.beta;
      result.best.gamma = h.gamma;
    }
  }
  return result;
}

/// Worker count: LEXIDEBIAS_THREADS if set (>= 1), else hardware concurrency.
inline unsigned configured_threads() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LEXIDEBIAS_THREADS")) {
    unsigned cap = 0;
    if (detail::parse_integer(std::string_view(env), cap) && cap >= 1) return std::min(cap, hw);
  }
  return hw;
}

/// Runs `fn(i)` for i in [0, count) over up to `threads` workers in contiguous chunks.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = t * chunk; i < std::min(count, (t + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Encodes every vocabulary word (evaluation mode). Output order equals input order.
inline EmbeddingSet debias_vocabulary(const ModelParams& params, const EmbeddingSet& emb,
                                      unsigned threads = configured_threads()) {
  if (emb.dim() != params.n) {
    throw DataError(fmt::format("embeddings have dim {}, model expects {}", emb.dim(), params.n));
  }
  std::vector<Vector> encoded(emb.size());
  parallel_for(emb.size(), threads, [&](std::size_t i) { encoded[i] = encode(params, emb[i]); });
  EmbeddingSet out(params.m);
  for (std::size_t i = 0; i < emb.size(); ++i) out.add(emb.words()[i], std::move(encoded[i]));
  return out;
}

}  // namespace lexidebias
