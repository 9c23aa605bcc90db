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
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <span>
#include <string>

#include <fmt/format.h>

#include "lexidebias/error.hpp"
#include "lexidebias/geometry.hpp"

namespace lexidebias {

/// Encoder E (enc_*), reconstruction decoder D_c (rec_*) and definition
/// decoder D_d (def_*). Each is a single tanh layer. Gradients and Adam
/// moments reuse this layout.
struct ModelParams {
  Eigen::Index n = 0;  // input (pre-trained) dimension
  Eigen::Index m = 0;  // encoded dimension
  Matrix enc_w;        // m x n
  Vector enc_b;        // m
  Matrix rec_w;        // n x m
  Vector rec_b;        // n
  Matrix def_w;        // n x m
  Vector def_b;        // n

  static ModelParams zeros(Eigen::Index n, Eigen::Index m) {
    ModelParams p;
    p.n = n;
    p.m = m;
    p.enc_w = Matrix::Zero(m, n);
    p.enc_b = Vector::Zero(m);
    p.rec_w = Matrix::Zero(n, m);
    p.rec_b = Vector::Zero(n);
    p.def_w = Matrix::Zero(n, m);
    p.def_b = Vector::Zero(n);
    return p;
  }

  bool same_shape(const ModelParams& o) const { return n == o.n && m == o.m; }

  bool all_finite() const {
    return enc_w.allFinite() && enc_b.allFinite() && rec_w.allFinite() && rec_b.allFinite() &&
           def_w.allFinite() && def_b.allFinite();
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.same_shape(b) && a.enc_w == b.enc_w && a.enc_b == b.enc_b && a.rec_w == b.rec_w &&
           a.rec_b == b.rec_b && a.def_w == b.def_w && a.def_b == b.def_b;
  }
};

/// Applies `f` to corresponding tensors of every argument, in checkpoint order.
template <typename F, typename... P>
void zip_tensors(F&& f, P&... params) {
  f(params.enc_w...);
  f(params.enc_b...);
  f(params.rec_w...);
  f(params.rec_b...);
  f(params.def_w...);
  f(params.def_b...);
}

/// Weights and biases of E, D_c and D_d.
constexpr long long count_parameters(long long n, long long m) {
  return (m * n + m) + 2 * (n * m + n);
}

/// Glorot-uniform weights, zero biases.
inline ModelParams init_params(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw ConfigError("model dimensions must be positive");
  if (m > n) throw ConfigError(fmt::format("encoded dimension {} exceeds input dimension {}", m, n));
  ModelParams p = ModelParams::zeros(n, m);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Matrix& w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
  };
  fill(p.enc_w);
  fill(p.rec_w);
  fill(p.def_w);
  return p;
}

struct Hyperparams {
  double alpha = 0.99998;
  double beta = 0.00001;
  double gamma = 0.00001;
  double learning_rate = 0.0002;
  double dropout = 0.05;
  int batch_size = 4;
  int pretrain_batch_size = 512;
  int pretrain_words = 5000;
  int epochs = 8;
  int patience = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
      throw ConfigError("loss coefficients must be non-negative");
    }
    if (std::abs(alpha + beta + gamma - 1.0) > 1e-9) {
      throw ConfigError(fmt::format("loss coefficients must sum to 1 (got {:.12g})",
                                    alpha + beta + gamma));
    }
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (batch_size < 1 || pretrain_batch_size < 1) throw ConfigError("batch sizes must be >= 1");
    if (pretrain_words < 2) throw ConfigError("pretrain_words must be >= 2");
    if (epochs < 0 || patience < 1) throw ConfigError("epochs must be >= 0 and patience >= 1");
  }
};

/// One training triple (w, s(w), phi(w, s(w))).
struct TrainSample {
  std::string word;
  Vector w;
  Vector s;
  Vector phi;
};

inline TrainSample make_sample(std::string word, Vector w, Vector s) {
  if (w.size() != s.size()) throw DataError("word and definition vectors differ in length");
  if (s.norm() == 0.0) throw NumericError("definition vector of '" + word + "' is zero");
  Vector phi = vector_rejection(w, s);
  return {std::move(word), std::move(w), std::move(s), std::move(phi)};
}

/// Inverted-dropout scale factors (0 or 1/(1-p)). Empty vectors mean no dropout.
struct DropoutMasks {
  Vector word_input;
  Vector word_hidden;
  Vector reject_input;
  Vector reject_hidden;
};

template <typename Rng>
Vector draw_mask(Eigen::Index size, double p, Rng& rng) {
  if (p <= 0.0) return {};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  Vector mask(size);
  for (Eigen::Index i = 0; i < size; ++i) mask[i] = u(rng) < p ? 0.0 : keep_scale;
  return mask;
}

template <typename Rng>
DropoutMasks draw_masks(Eigen::Index n, Eigen::Index m, double p, Rng& rng) {
  DropoutMasks masks;
  masks.word_input = draw_mask(n, p, rng);
  masks.word_hidden = draw_mask(m, p, rng);
  masks.reject_input = draw_mask(n, p, rng);
  masks.reject_hidden = draw_mask(m, p, rng);
  return masks;
}

namespace detail {

inline Vector masked(const Vector& v, const Vector& mask) {
  return mask.size() == 0 ? v : Vector(v.cwiseProduct(mask));
}

inline void check_input(const ModelParams& params, const Vector& w, const char* what) {
  if (w.size() != params.n) {
    throw DataError(fmt::format("{}: input has {} components, model expects {}", what, w.size(),
                                params.n));
  }
}

}  // namespace detail

/// tanh(W_e drop(w) + b_e), followed by dropout on the output when masks are given.
inline Vector encode(const ModelParams& params, const Vector& w, const Vector& input_mask = {},
                     const Vector& hidden_mask = {}) {
  detail::check_input(params, w, "encode");
  Vector h = (params.enc_w * detail::masked(w, input_mask) + params.enc_b).array().tanh().matrix();
  return detail::masked(h, hidden_mask);
}

inline Vector decode_c(const ModelParams& params, const Vector& e) {
  if (e.size() != params.m) throw DataError("decode_c: code has wrong length");
  return (params.rec_w * e + params.rec_b).array().tanh().matrix();
}

inline Vector decode_d(const ModelParams& params, const Vector& e) {
  if (e.size() != params.m) throw DataError("decode_d: code has wrong length");
  return (params.def_w * e + params.def_b).array().tanh().matrix();
}

/// Forward pass over one sample, keeping the intermediates backprop needs.
struct ForwardPass {
  Vector word_in, word_hidden, word_code;
  Vector reject_in, reject_hidden, reject_code;
  Vector reconstruction, definition;
  double inner = 0.0;
  double jc = 0.0, jd = 0.0, ja = 0.0;

  double total(const Hyperparams& h) const { return h.alpha * jc + h.beta * jd + h.gamma * ja; }
};

inline ForwardPass forward(const ModelParams& params, const TrainSample& sample,
                           const DropoutMasks& masks = {}) {
  detail::check_input(params, sample.w, "forward");
  ForwardPass f;
  f.word_in = detail::masked(sample.w, masks.word_input);
  f.word_hidden = (params.enc_w * f.word_in + params.enc_b).array().tanh().matrix();
  f.word_code = detail::masked(f.word_hidden, masks.word_hidden);
  f.reject_in = detail::masked(sample.phi, masks.reject_input);
  f.reject_hidden = (params.enc_w * f.reject_in + params.enc_b).array().tanh().matrix();
  f.reject_code = detail::masked(f.reject_hidden, masks.reject_hidden);
  f.reconstruction = decode_c(params, f.word_code);
  f.definition = decode_d(params, f.word_code);
  f.jc = (sample.w - f.reconstruction).squaredNorm();
  f.jd = (sample.s - f.definition).squaredNorm();
  f.inner = f.reject_code.dot(f.word_code);
  f.ja = f.inner * f.inner;
  return f;
}

/// ||w - D_c(E(w))||^2, evaluation mode.
inline double loss_jc(const ModelParams& params, const TrainSample& sample) {
  return forward(params, sample).jc;
}

/// ||s - D_d(E(w))||^2, evaluation mode.
inline double loss_jd(const ModelParams& params, const TrainSample& sample) {
  return forward(params, sample).jd;
}

/// (E(phi)^T E(w))^2, evaluation mode.
inline double loss_ja(const ModelParams& params, const TrainSample& sample) {
  return forward(params, sample).ja;
}

inline double total_loss(const ModelParams& params, const TrainSample& sample,
                         const Hyperparams& hyper) {
  return forward(params, sample).total(hyper);
}

/// Accumulates d(total)/d(params) for one forward pass into `grad`, scaled by `weight`.
inline void backward(const ModelParams& params, const TrainSample& sample, const ForwardPass& f,
                     const DropoutMasks& masks, const Hyperparams& hyper, double weight,
                     ModelParams& grad) {
  Vector d_word_code = Vector::Zero(params.m);

  const Vector d_rec_pre = (-2.0 * hyper.alpha * weight) *
                           (sample.w - f.reconstruction)
                               .cwiseProduct((1.0 - f.reconstruction.array().square()).matrix());
  grad.rec_w.noalias() += d_rec_pre * f.word_code.transpose();
  grad.rec_b += d_rec_pre;
  d_word_code.noalias() += params.rec_w.transpose() * d_rec_pre;

  const Vector d_def_pre = (-2.0 * hyper.beta * weight) *
                           (sample.s - f.definition)
                               .cwiseProduct((1.0 - f.definition.array().square()).matrix());
  grad.def_w.noalias() += d_def_pre * f.word_code.transpose();
  grad.def_b += d_def_pre;
  d_word_code.noalias() += params.def_w.transpose() * d_def_pre;

  const double d_inner = 2.0 * hyper.gamma * weight * f.inner;
  d_word_code += d_inner * f.reject_code;
  const Vector d_reject_code = d_inner * f.word_code;

  auto encoder_backward = [&](const Vector& d_code, const Vector& hidden_mask,
                              const Vector& hidden, const Vector& input) {
    const Vector d_hidden = detail::masked(d_code, hidden_mask);
    const Vector d_pre = d_hidden.cwiseProduct((1.0 - hidden.array().square()).matrix());
    grad.enc_w.noalias() += d_pre * input.transpose();
    grad.enc_b += d_pre;
  };
  encoder_backward(d_word_code, masks.word_hidden, f.word_hidden, f.word_in);
  if (d_inner != 0.0) {
    encoder_backward(d_reject_code, masks.reject_hidden, f.reject_hidden, f.reject_in);
  }
}

struct BatchGradient {
  ModelParams grad;
  double loss = 0.0;  // mean total loss under the same masks
};

/// Exact gradient of the mean total loss over `batch`. Masks are drawn once
/// per sample (when dropout > 0) and shared between value and gradient.
template <typename Rng>
BatchGradient gradients(const ModelParams& params, std::span<const TrainSample> batch,
                        const Hyperparams& hyper, Rng& rng, bool training = true) {
  if (batch.empty()) throw DataError("gradients: empty batch");
  BatchGradient out{ModelParams::zeros(params.n, params.m), 0.0};
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const auto& sample : batch) {
    const DropoutMasks masks = training && hyper.dropout > 0.0
                                   ? draw_masks(params.n, params.m, hyper.dropout, rng)
                                   : DropoutMasks{};
    const ForwardPass f = forward(params, sample, masks);
    out.loss += weight * f.total(hyper);
    backward(params, sample, f, masks, hyper, weight, out.grad);
  }
  return out;
}

struct AdamState {
  ModelParams first;
  ModelParams second;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(const ModelParams& shape)
      : first(ModelParams::zeros(shape.n, shape.m)),
        second(ModelParams::zeros(shape.n, shape.m)) {}
};

/// Bias-corrected Adam update.
inline void adam_step(AdamState& state, ModelParams& params, const ModelParams& grads,
                      double learning_rate) {
  if (!params.same_shape(grads) || !params.same_shape(state.first)) {
    throw DataError("adam_step: shape mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;
  zip_tensors(
      [&](auto& p, auto& g, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        p.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      },
      params, grads, state.first, state.second);
}

// Checkpoint layout (all little-endian):
//   8-byte magic "LXDBMDL\0", uint32 version, uint64 n, uint64 m,
//   then enc_w, enc_b, rec_w, rec_b, def_w, def_b as row-major float64.
inline constexpr std::array<char, 8> kCheckpointMagic = {'L', 'X', 'D', 'B', 'M', 'D', 'L', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw DataError("truncated checkpoint: " + path);
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.n));
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.m));
  zip_tensors(
      [&](const auto& t) {
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
          for (Eigen::Index j = 0; j < t.cols(); ++j) detail::write_le<double>(out, t(i, j));
        }
      },
      params);
  if (!out) throw DataError("write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw DataError("not a model checkpoint: " + path);
  }
  const auto version = detail::read_le<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw DataError(fmt::format("unsupported checkpoint version {} in {}", version, path));
  }
  const auto n = detail::read_le<std::uint64_t>(in, path);
  const auto m = detail::read_le<std::uint64_t>(in, path);
  if (n == 0 || m == 0 || m > n || n > (1u << 20)) {
    throw DataError(fmt::format("invalid checkpoint shape n={} m={} in {}", n, m, path));
  }
  ModelParams params =
      ModelParams::zeros(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  zip_tensors(
      [&](auto& t) {
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
          for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = detail::read_le<double>(in, path);
        }
      },
      params);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes after checkpoint payload: " + path);
  }
  if (!params.all_finite()) throw NumericError("checkpoint contains non-finite values: " + path);
  return params;
}

}  // namespace lexidebias
