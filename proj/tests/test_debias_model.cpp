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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lexidebias/debias_model.hpp"
#include "support/grad_check.hpp"
#include "support/test_util.hpp"

namespace lexidebias {
namespace {

Hyperparams weights(double a, double b, double g) {
  Hyperparams h;
  h.alpha = a;
  h.beta = b;
  h.gamma = g;
  h.dropout = 0.0;
  return h;
}

// tanh(W x + b) evaluated with explicit loops.
std::vector<double> layer_oracle(const Matrix& w, const Vector& b, const Vector& x) {
  std::vector<double> out(static_cast<std::size_t>(w.rows()));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    double acc = b[i];
    for (Eigen::Index j = 0; j < w.cols(); ++j) acc += w(i, j) * x[j];
    out[static_cast<std::size_t>(i)] = std::tanh(acc);
  }
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

TEST(InitParams, DeterministicBoundedZeroBias) {
  const ModelParams a = init_params(4, 3, 7);
  const ModelParams b = init_params(4, 3, 7);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == init_params(4, 3, 8));
  EXPECT_TRUE(a.enc_b.isZero(0.0) && a.rec_b.isZero(0.0) && a.def_b.isZero(0.0));
  const double bound = std::sqrt(6.0 / 7.0);
  for (const Matrix* w : {&a.enc_w, &a.rec_w, &a.def_w}) {
    EXPECT_LE(w->cwiseAbs().maxCoeff(), bound);
  }
  EXPECT_EQ(a.enc_w.rows(), 3);
  EXPECT_EQ(a.enc_w.cols(), 4);
  EXPECT_THROW(init_params(3, 4, 1), ConfigError);
}

TEST(CountParameters, Examples) {
  static_assert(count_parameters(300, 300) == 270900);
  EXPECT_EQ(count_parameters(1, 1), 6);
  EXPECT_EQ(count_parameters(10, 8), 8 * 10 + 8 + 2 * (10 * 8 + 10));
  const ModelParams p = init_params(10, 8, 0);
  long long total = 0;
  zip_tensors([&](const auto& t) { total += t.size(); }, p);
  EXPECT_EQ(total, count_parameters(10, 8));
}

TEST(Encode, ZeroParamsGiveZero) {
  const ModelParams p = ModelParams::zeros(5, 3);
  EXPECT_TRUE(encode(p, Vector::Ones(5)).isZero(0.0));
  EXPECT_TRUE(decode_c(p, Vector::Ones(3)).isZero(0.0));
  EXPECT_TRUE(decode_d(p, Vector::Ones(3)).isZero(0.0));
  EXPECT_THROW(encode(p, Vector::Ones(4)), DataError);
  EXPECT_THROW(decode_c(p, Vector::Ones(5)), DataError);
}

TEST(Encode, MatchesDirectEvaluationAndRange) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    ModelParams p = init_params(7, 5, static_cast<std::uint64_t>(trial));
    p.enc_b = testing::random_vector(5, rng);
    p.rec_b = testing::random_vector(7, rng);
    p.def_b = testing::random_vector(7, rng);
    const Vector w = testing::random_vector(7, rng, 3.0);
    const Vector e = encode(p, w);
    const Vector e_oracle = to_vector(layer_oracle(p.enc_w, p.enc_b, w));
    EXPECT_LE((e - e_oracle).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(e.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_LE((decode_c(p, e) - to_vector(layer_oracle(p.rec_w, p.rec_b, e))).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((decode_d(p, e) - to_vector(layer_oracle(p.def_w, p.def_b, e))).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(decode_c(p, e).cwiseAbs().maxCoeff(), 1.0);
    EXPECT_LT(decode_d(p, e).cwiseAbs().maxCoeff(), 1.0);
  }
}

// A 3 -> 2 model with D_c(E(w)) = w, D_d(E(w)) = s and E(phi) orthogonal to E(w).
struct ZeroLossFixture {
  ModelParams params = ModelParams::zeros(3, 2);
  TrainSample sample;

  ZeroLossFixture() {
    Vector w(3), s(3);
    w << 0.5, 0.5, 0.0;
    s << 0.3, -0.2, 0.1;
    sample = {"x", w, s, Vector()};
    sample.s = s;
    // phi must be computed from the actual s; choose s along e1 for a clean construction.
    sample.s = Vector::Unit(3, 0) * 0.4;
    sample.phi = vector_rejection(w, sample.s);  // (0, 0.5, 0)
    params.enc_w << 1, 0, 0,   // picks the s component: 0.5 for w, 0 for phi
        -1, 1, 0;               // 0 for w, 0.5 for phi
    params.rec_b = w.array().atanh().matrix();
    params.def_b = sample.s.array().atanh().matrix();
  }
};

TEST(Losses, ConstructedZeros) {
  ZeroLossFixture f;
  EXPECT_NEAR(loss_jc(f.params, f.sample), 0.0, 1e-30);
  EXPECT_NEAR(loss_jd(f.params, f.sample), 0.0, 1e-30);
  EXPECT_GT(encode(f.params, f.sample.phi).norm(), 0.4);
  EXPECT_EQ(loss_ja(f.params, f.sample), 0.0);
}

TEST(Losses, MatchHandComputedChain) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    ModelParams p = init_params(3, 2, static_cast<std::uint64_t>(trial));
    p.enc_b = testing::random_vector(2, rng, 0.5);
    p.rec_b = testing::random_vector(3, rng, 0.5);
    p.def_b = testing::random_vector(3, rng, 0.5);
    const TrainSample s =
        make_sample("t", testing::random_vector(3, rng), testing::random_vector(3, rng));
    const auto e = layer_oracle(p.enc_w, p.enc_b, s.w);
    const auto ep = layer_oracle(p.enc_w, p.enc_b, s.phi);
    const auto rc = layer_oracle(p.rec_w, p.rec_b, to_vector(e));
    const auto rd = layer_oracle(p.def_w, p.def_b, to_vector(e));
    double jc = 0, jd = 0, inner = 0;
    for (int i = 0; i < 3; ++i) {
      jc += (s.w[i] - rc[i]) * (s.w[i] - rc[i]);
      jd += (s.s[i] - rd[i]) * (s.s[i] - rd[i]);
    }
    for (int i = 0; i < 2; ++i) inner += e[i] * ep[i];
    EXPECT_NEAR(loss_jc(p, s), jc, 1e-10);
    EXPECT_NEAR(loss_jd(p, s), jd, 1e-10);
    EXPECT_NEAR(loss_ja(p, s), inner * inner, 1e-10);
    EXPECT_GE(loss_jc(p, s), 0.0);
    EXPECT_GE(loss_jd(p, s), 0.0);
    EXPECT_GE(loss_ja(p, s), 0.0);

    for (const auto& h : {weights(1, 0, 0), weights(0.99998, 1e-5, 1e-5), weights(0.2, 0.3, 0.5)}) {
      EXPECT_NEAR(total_loss(p, s, h),
                  h.alpha * loss_jc(p, s) + h.beta * loss_jd(p, s) + h.gamma * loss_ja(p, s), 1e-12);
    }
    EXPECT_EQ(total_loss(p, s, weights(1, 0, 0)), loss_jc(p, s));
  }
}

TEST(Hyperparams, Validation) {
  Hyperparams defaults;
  EXPECT_DOUBLE_EQ(defaults.alpha, 0.99998);
  EXPECT_DOUBLE_EQ(defaults.beta, 0.00001);
  EXPECT_DOUBLE_EQ(defaults.gamma, 0.00001);
  EXPECT_DOUBLE_EQ(defaults.learning_rate, 0.0002);
  EXPECT_DOUBLE_EQ(defaults.dropout, 0.05);
  EXPECT_EQ(defaults.batch_size, 4);
  EXPECT_EQ(defaults.pretrain_batch_size, 512);
  EXPECT_EQ(defaults.pretrain_words, 5000);
  EXPECT_NO_THROW(defaults.validate());
  EXPECT_THROW(weights(0.5, 0.5, 0.5).validate(), ConfigError);
  EXPECT_THROW(weights(1.5, -0.5, 0.0).validate(), ConfigError);
  Hyperparams bad = defaults;
  bad.dropout = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Gradients, ZeroLossGivesZeroGradient) {
  ZeroLossFixture f;
  std::mt19937_64 rng(0);
  const auto g = gradients(f.params, std::span<const TrainSample>(&f.sample, 1),
                           weights(0.4, 0.3, 0.3), rng);
  EXPECT_NEAR(g.loss, 0.0, 1e-30);
  zip_tensors([](const auto& t) { EXPECT_LE(t.cwiseAbs().maxCoeff(), 1e-15); }, g.grad);
}

TEST(Gradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (const auto& h : {weights(0.99998, 1e-5, 1e-5), weights(1.0 / 3, 1.0 / 3, 1.0 / 3),
                        weights(0, 0, 1), weights(0, 1, 0)}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index n = 2 + trial % 9;
      const Eigen::Index m = 1 + trial % static_cast<int>(n);
      auto [params, batch] = testing::random_model_and_batch(n, m, 3, rng);
      const double err = testing::max_gradient_error(params, batch, h, 1e-5);
      EXPECT_LE(err, 1e-5) << "n=" << n << " m=" << m << " gamma=" << h.gamma;
    }
  }
}

TEST(Gradients, OrthogonalityLossIgnoresDecoders) {
  std::mt19937_64 rng(4);
  auto [params, batch] = testing::random_model_and_batch(6, 4, 4, rng);
  const auto g = gradients(params, std::span<const TrainSample>(batch), weights(0, 0, 1), rng);
  EXPECT_TRUE(g.grad.rec_w.isZero(0.0) && g.grad.rec_b.isZero(0.0));
  EXPECT_TRUE(g.grad.def_w.isZero(0.0) && g.grad.def_b.isZero(0.0));
  EXPECT_GT(g.grad.enc_w.norm(), 0.0);
}

TEST(Gradients, DropoutMasksSharedBetweenValueAndGradient) {
  std::mt19937_64 rng(5);
  auto [params, batch] = testing::random_model_and_batch(6, 4, 1, rng);
  Hyperparams h = weights(0.5, 0.25, 0.25);
  h.dropout = 0.3;
  std::mt19937_64 a(17), b(17);
  const auto g = gradients(params, std::span<const TrainSample>(batch), h, a);
  const DropoutMasks masks = draw_masks(6, 4, h.dropout, b);
  EXPECT_DOUBLE_EQ(g.loss, forward(params, batch[0], masks).total(h));
}

// Inverted dropout: the mean train-mode pre-activation equals the eval-mode one.
TEST(Dropout, ExpectationMatchesEvalMode) {
  std::mt19937_64 rng(6);
  const ModelParams p = init_params(8, 6, 1);
  const Vector w = testing::random_vector(8, rng);
  const Vector eval = p.enc_w * w;
  Vector sum = Vector::Zero(6);
  constexpr int kMasks = 20000;
  for (int i = 0; i < kMasks; ++i) sum += p.enc_w * w.cwiseProduct(draw_mask(8, 0.05, rng));
  const Vector mean = sum / kMasks;
  EXPECT_LE((mean - eval).norm(), 0.02 * eval.norm());
  const Vector mask = draw_mask(1000, 0.05, rng);
  for (double x : mask) EXPECT_TRUE(x == 0.0 || std::abs(x - 1.0 / 0.95) < 1e-15);
  EXPECT_EQ(draw_mask(10, 0.0, rng).size(), 0);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ModelParams p = init_params(5, 4, 2);
  const ModelParams before = p;
  AdamState state(p);
  adam_step(state, p, ModelParams::zeros(5, 4), 2e-4);
  EXPECT_TRUE(p == before);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::mt19937_64 rng(8);
  ModelParams p = init_params(5, 4, 2);
  const ModelParams before = p;
  ModelParams g = ModelParams::zeros(5, 4);
  zip_tensors([&](auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      t.data()[i] = (i % 2 ? -1.0 : 1.0) * (0.01 + std::abs(testing::random_vector(1, rng)[0]));
    }
  }, g);
  AdamState state(p);
  const double lr = 2e-4;
  adam_step(state, p, g, lr);
  zip_tensors([&](const auto& after, const auto& prior, const auto& grad) {
    for (Eigen::Index i = 0; i < after.size(); ++i) {
      const double delta = after.data()[i] - prior.data()[i];
      EXPECT_NEAR(delta, -lr * (grad.data()[i] > 0 ? 1.0 : -1.0), 0.01 * lr);
    }
  }, p, before, g);
}

TEST(Adam, Deterministic) {
  auto run = [] {
    std::mt19937_64 rng(9);
    auto [params, batch] = testing::random_model_and_batch(6, 4, 8, rng);
    Hyperparams h;
    AdamState state(params);
    for (int i = 0; i < 25; ++i) {
      auto g = gradients(params, std::span<const TrainSample>(batch), h, rng);
      adam_step(state, params, g.grad, h.learning_rate);
    }
    return params;
  };
  EXPECT_TRUE(run() == run());
}

TEST(Checkpoint, RoundTripAndValidation) {
  testing::TempDir dir;
  const ModelParams p = init_params(6, 4, 3);
  save_checkpoint(p, dir.file("m.bin"));
  EXPECT_TRUE(load_checkpoint(dir.file("m.bin")) == p);
  const std::string bytes = testing::read_file(dir.file("m.bin"));
  EXPECT_EQ(bytes.size(), 8u + 4 + 8 + 8 + 8u * static_cast<std::size_t>(count_parameters(6, 4)));
  EXPECT_EQ(bytes.substr(0, 7), "LXDBMDL");
  EXPECT_THROW(load_checkpoint(testing::write_file(dir.file("t.bin"), bytes.substr(0, bytes.size() - 3))),
               DataError);
  EXPECT_THROW(load_checkpoint(testing::write_file(dir.file("x.bin"), bytes + "x")), DataError);
  std::string bad = bytes;
  bad[0] = 'Q';
  EXPECT_THROW(load_checkpoint(testing::write_file(dir.file("b.bin"), bad)), DataError);
  std::string version = bytes;
  version[8] = 9;
  EXPECT_THROW(load_checkpoint(testing::write_file(dir.file("v.bin"), version)), DataError);
}

}  // namespace
}  // namespace lexidebias
