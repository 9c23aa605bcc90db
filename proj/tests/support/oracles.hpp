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
#include <bit>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "lexidebias/bias_eval.hpp"
#include "lexidebias/embedding_store.hpp"

namespace lexidebias::testing {

/// Independent reference implementations used as test oracles.

inline double cosine_oracle(const Vector& a, const Vector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

inline double association_oracle(const Vector& t, const std::vector<std::string>& a,
                                 const std::vector<std::string>& b, const EmbeddingSet& emb) {
  double sa = 0.0, sb = 0.0;
  for (const auto& w : a) sa += cosine_oracle(t, emb.at(w));
  for (const auto& w : b) sb += cosine_oracle(t, emb.at(w));
  return sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
}

/// Spec over distinct random vocabulary words.
inline WeatSpec random_spec(const EmbeddingSet& emb, std::size_t half, std::size_t attrs,
                            std::mt19937_64& rng) {
  std::vector<std::string> pool = emb.words();
  std::shuffle(pool.begin(), pool.end(), rng);
  WeatSpec s;
  s.name = "random";
  auto take = [&, next = std::size_t{0}](std::size_t count) mutable {
    std::vector<std::string> out(pool.begin() + static_cast<std::ptrdiff_t>(next),
                                 pool.begin() + static_cast<std::ptrdiff_t>(next + count));
    next += count;
    return out;
  };
  s.x = take(half);
  s.y = take(half);
  s.a = take(attrs);
  s.b = take(attrs);
  return s;
}

/// Enumerates every equal-size split of X u Y as a bitmask.
inline double brute_force_pvalue(const WeatSpec& s, const EmbeddingSet& emb) {
  std::vector<double> k;
  for (const auto* set : {&s.x, &s.y}) {
    for (const auto& w : *set) k.push_back(association_oracle(emb.at(w), s.a, s.b, emb));
  }
  auto stat = [&](unsigned mask) {
    double v = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) v += (mask >> i & 1u) ? k[i] : -k[i];
    return v;
  };
  const unsigned observed_mask = (1u << s.x.size()) - 1u;
  const double observed = stat(observed_mask);
  std::size_t greater = 0, total = 0;
  for (unsigned mask = 0; mask < (1u << k.size()); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != s.x.size()) continue;
    ++total;
    if (stat(mask) > observed) ++greater;
  }
  return static_cast<double>(greater) / static_cast<double>(total);
}

inline double effect_size_oracle(const WeatSpec& s, const EmbeddingSet& emb) {
  std::vector<double> kx, ky, all;
  for (const auto& w : s.x) kx.push_back(association_oracle(emb.at(w), s.a, s.b, emb));
  for (const auto& w : s.y) ky.push_back(association_oracle(emb.at(w), s.a, s.b, emb));
  all = kx;
  all.insert(all.end(), ky.begin(), ky.end());
  auto mean = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };
  const double m = mean(all);
  double ss = 0.0;
  for (double x : all) ss += (x - m) * (x - m);
  return (mean(kx) - mean(ky)) / std::sqrt(ss / static_cast<double>(all.size()));
}

/// Textbook product-moment formula.
inline double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Average rank of each element by counting smaller and equal values.
inline std::vector<double> average_ranks_oracle(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) {
      less += x < v[i];
      equal += x == v[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

/// Nodes n0..n{count-1}, random positive weights, seeds (n0, n1) and (n2, n3).
inline AssociationGraph random_graph(std::size_t count, double density, std::mt19937_64& rng) {
  AssociationGraph g;
  for (std::size_t i = 0; i < count; ++i) g.add_node("n" + std::to_string(i));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      if (u(rng) < density) g.add_edge("n" + std::to_string(i), "n" + std::to_string(j), 0.1 + u(rng));
    }
  }
  g.add_seed("n0", "n1");
  g.add_seed("n2", "n3");
  return g;
}

inline Matrix normalized_adjacency(const AssociationGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Matrix w = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (const auto& [j, weight] : g.adjacency()[i]) {
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = weight;
    }
  }
  const Vector d = w.rowwise().sum();
  Vector inv = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) inv[i] = d[i] > 0 ? 1.0 / std::sqrt(d[i]) : 0.0;
  return inv.asDiagonal() * w * inv.asDiagonal();
}

/// (1 - lambda) (I - lambda S)^{-1} Y by dense LU.
inline Matrix propagation_oracle(const AssociationGraph& g, double lambda) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Matrix y = Matrix::Zero(n, 2);
  for (const auto& p : g.seeds()) {
    y(static_cast<Eigen::Index>(g.index(p.masculine)), 0) = 1.0;
    y(static_cast<Eigen::Index>(g.index(p.feminine)), 1) = 1.0;
  }
  const Matrix a = Matrix::Identity(n, n) - lambda * normalized_adjacency(g);
  return (1.0 - lambda) * a.partialPivLu().solve(y);
}

}  // namespace lexidebias::testing
