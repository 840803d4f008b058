#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "forcecast/errors.hpp"
#include "forcecast/nn/layers.hpp"
#include "gradcheck.hpp"

namespace forcecast::nn {
namespace {

using forcecast::testing::random_tensor;
using TensorD = Tensor<double>;
using TensorF = Tensor<float>;

// ---- autodiff basics ----

TEST(Autodiff, SumGivesOnes) {
  TensorD w({2, 3}, {1, -2, 3, 4, 5, -6}, true);
  sum(w).backward();
  for (const double g : w.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Autodiff, HalfSquaredNormGivesValue) {
  TensorD w({4}, {0.5, -1.5, 2.0, 3.0}, true);
  scale(sum(square(w)), 0.5).backward();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(w.grad()[i], w.data()[i]);
}

TEST(Autodiff, SharedSubgraphAccumulates) {
  TensorD w({1}, {3.0}, true);
  const TensorD y = mul(w, w);
  sum(add(y, y)).backward();  // 2 w^2
  EXPECT_DOUBLE_EQ(w.grad()[0], 12.0);
}

TEST(Autodiff, NonScalarBackwardRejected) {
  TensorD w({2}, {1, 2}, true);
  EXPECT_THROW(w.backward(), ShapeError);
}

TEST(Autodiff, NoGradGuardSkipsRecording) {
  TensorD w({2}, {1, 2}, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    EXPECT_TRUE(mul(w, w).node()->parents.empty());
  }
  EXPECT_TRUE(grad_enabled());
}

TEST(Autodiff, ShapeErrors) {
  EXPECT_THROW(TensorD({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(add(TensorD::zeros({2, 3}), TensorD::zeros({2})), ShapeError);
  EXPECT_THROW(matmul(TensorD::zeros({2, 3}), TensorD::zeros({2, 3})), ShapeError);
}

// ---- gradient checks: every layer, 20 random instances each ----

TEST(GradientCheck, EveryLayerWithinTolerance) {
  for (const auto& check : forcecast::testing::layer_checks()) {
    double worst = 0;
    std::size_t kinks = 0, checked = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) worst = std::max(worst, check.run(seed, kinks, checked));
    EXPECT_LT(worst, 1e-4) << check.name;
    EXPECT_LT(static_cast<double>(kinks), 0.05 * static_cast<double>(checked)) << check.name;
  }
}

// ---- ops against direct oracles ----

TEST(Conv2d, MatchesDirectConvolutionOn5x5) {
  std::mt19937_64 rng(51);
  const TensorD x = random_tensor(rng, {1, 2, 5, 5}, 1.0, false);
  const TensorD w = random_tensor(rng, {3, 2, 3, 3}, 1.0, false);
  const TensorD b = random_tensor(rng, {3}, 1.0, false);
  const TensorD y = conv2d(x, w, b, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 3, 5, 5}));
  for (int o = 0; o < 3; ++o) {
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 5; ++c) {
        double acc = b.data()[o];
        for (int i = 0; i < 2; ++i) {
          for (int kr = 0; kr < 3; ++kr) {
            for (int kc = 0; kc < 3; ++kc) {
              const int rr = r + kr - 1, cc = c + kc - 1;
              if (rr < 0 || rr >= 5 || cc < 0 || cc >= 5) continue;
              acc += x.data()[(i * 5 + rr) * 5 + cc] * w.data()[((o * 2 + i) * 3 + kr) * 3 + kc];
            }
          }
        }
        EXPECT_NEAR(y.data()[(o * 5 + r) * 5 + c], acc, 1e-12);
      }
    }
  }
}

TEST(Softmax, RowsSumToOne) {
  std::mt19937_64 rng(52);
  const TensorF x = TensorF({3, 7}, std::vector<float>(21, 0.0f));
  std::normal_distribution<float> n(0, 5);
  TensorF y = x;
  for (auto& v : y.data()) v = n(rng);
  const TensorF s = softmax(y);
  for (int r = 0; r < 3; ++r) {
    float total = 0;
    for (int c = 0; c < 7; ++c) total += s.data()[r * 7 + c];
    EXPECT_NEAR(total, 1.0f, 1e-6);
  }
}

TEST(Attention, OneHotScoresSelectToken) {
  // Single head, dim 2. Query/key weights make token 0 score far above token 1
  // for every query; identity value/output maps return token 0 itself.
  ParamRegistry<double> reg;
  InitRng init(1);
  MultiHeadAttention<double> mha(reg, "mha", 2, 1, init);
  for (auto& item : reg.items()) std::fill(item.tensor.data().begin(), item.tensor.data().end(), 0.0);
  mha.query.bias.data() = {1.0, 0.0};
  mha.key.weight.data() = {50.0, 0.0, 0.0, 0.0};  // key = (50 x0, 0)
  mha.value.weight.data() = {1, 0, 0, 1};
  mha.output.weight.data() = {1, 0, 0, 1};
  const TensorD x({1, 2, 2}, {1.0, 0.3, -1.0, 0.7});
  TensorD weights;
  const TensorD y = mha.forward(x, &weights);
  for (int t = 0; t < 2; ++t) {
    EXPECT_NEAR(y.data()[t * 2 + 0], 1.0, 1e-9);
    EXPECT_NEAR(y.data()[t * 2 + 1], 0.3, 1e-9);
  }
  ASSERT_EQ(weights.shape(), (Shape{1, 2, 2}));
  for (int r = 0; r < 2; ++r) EXPECT_NEAR(weights.data()[r * 2] + weights.data()[r * 2 + 1], 1.0, 1e-12);
}

TEST(PatchEmbed, TokenCountAndDivisibility) {
  ParamRegistry<float> reg;
  InitRng init(2);
  PatchEmbed<float> pe(reg, "pe", 3, 16, 8, init);
  EXPECT_EQ(pe.forward(TensorF::zeros({1, 3, 256, 256})).shape(), (Shape{1, 256, 8}));
  EXPECT_THROW(pe.forward(TensorF::zeros({1, 3, 250, 256})), ShapeError);
}

double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

TEST(LstmCell, MatchesGateEquations) {
  std::mt19937_64 rng(53);
  ParamRegistry<double> reg;
  InitRng init(3);
  LstmCell<double> cell(reg, "cell", 3, 2, init);
  forcecast::testing::randomize(reg, rng);
  const TensorD x = random_tensor(rng, {1, 3}, 1.0, false);
  const TensorD h = random_tensor(rng, {1, 2}, 1.0, false);
  const TensorD c = random_tensor(rng, {1, 2}, 1.0, false);
  const auto [h2, c2] = cell.step(x, h, c);
  // Packed columns: i, f, g, o blocks of width 2.
  auto pre = [&](int col) {
    double v = cell.bias.data()[col];
    for (int k = 0; k < 3; ++k) v += x.data()[k] * cell.w_ih.data()[k * 8 + col];
    for (int k = 0; k < 2; ++k) v += h.data()[k] * cell.w_hh.data()[k * 8 + col];
    return v;
  };
  for (int u = 0; u < 2; ++u) {
    const double i = sigm(pre(u)), f = sigm(pre(2 + u)), g = std::tanh(pre(4 + u)), o = sigm(pre(6 + u));
    const double cn = f * c.data()[u] + i * g;
    EXPECT_NEAR(c2.data()[u], cn, 1e-12);
    EXPECT_NEAR(h2.data()[u], o * std::tanh(cn), 1e-12);
  }
}

TEST(Lstm, ZeroSequenceWithZeroGatesGivesZeroState) {
  ParamRegistry<float> reg;
  InitRng init(4);
  Lstm<float> lstm(reg, "lstm", 4, 3, 2, init);
  for (auto& item : reg.items()) std::fill(item.tensor.data().begin(), item.tensor.data().end(), 0.0f);
  const TensorF y = lstm.forward(TensorF::zeros({2, 10, 4}));
  for (const float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(BatchNorm, TrainUsesBatchStatsEvalUsesBuffers) {
  ParamRegistry<float> reg;
  BatchNorm<float> bn(reg, "bn", 2);
  const TensorF x({4, 2}, {1, 10, 2, 20, 3, 30, 4, 40});
  const TensorF y = bn.forward(x, true);
  float m0 = 0;
  for (int r = 0; r < 4; ++r) m0 += y.data()[r * 2];
  EXPECT_NEAR(m0, 0.0f, 1e-5);
  EXPECT_NEAR(bn.running_mean.data()[0], 0.25f, 1e-6);  // momentum 0.1 from 0 toward 2.5
  const TensorF same({3, 2}, {5, 5, 5, 5, 5, 5});
  const TensorF e = bn.forward(same, false);
  EXPECT_EQ(e.data()[0], e.data()[2]);
  EXPECT_EQ(e.data()[1], e.data()[5]);
}

TEST(ResidualBlock, ZeroResidualBranchLeavesShortcut) {
  ParamRegistry<double> reg;
  InitRng init(5);
  ResidualBlock<double> block(reg, "res", 3, 3, 1, init);
  ASSERT_FALSE(block.has_projection);
  std::fill(block.conv2.weight.data().begin(), block.conv2.weight.data().end(), 0.0);
  std::mt19937_64 rng(54);
  TensorD x = random_tensor(rng, {2, 3, 4, 4}, 1.0, false);
  const TensorD y = block.forward(x, false);
  // BN in eval mode with fresh buffers is the identity; relu(0 + x) remains.
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y.data()[i], std::max(0.0, x.data()[i]), 1e-4);
}

TEST(MlpDecoder, ParameterCountClosedForm) {
  ParamRegistry<float> reg;
  InitRng init(6);
  const int in = 128 + 54;
  MlpDecoder<float> dec(reg, "dec", in, {84, 180, 50, 3}, init);
  const std::size_t dense = (in * 84 + 84) + (84 * 180 + 180) + (180 * 50 + 50) + (50 * 3 + 3);
  const std::size_t bn_affine = 2 * (84 + 180 + 50);
  EXPECT_EQ(reg.trainable_count(), dense + bn_affine);
  EXPECT_THROW(dec.forward(TensorF::zeros({2, in + 1}), false), ShapeError);
}

TEST(MlpDecoder, ZeroInputZeroBiasGivesZero) {
  ParamRegistry<float> reg;
  InitRng init(7);
  MlpDecoder<float> dec(reg, "dec", 10, {8, 3}, init);
  for (auto& item : reg.items()) {
    if (item.kind == ParamKind::kBias) std::fill(item.tensor.data().begin(), item.tensor.data().end(), 0.0f);
  }
  const TensorF y = dec.forward(TensorF::zeros({4, 10}), false);
  for (const float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(ParamRegistry, DuplicateNamesRejected) {
  ParamRegistry<float> reg;
  reg.add("w", {2}, ParamKind::kWeight, {1, 2});
  EXPECT_THROW(reg.add("w", {2}, ParamKind::kWeight, {1, 2}), ConfigError);
}

TEST(InitRng, Deterministic) {
  InitRng a(9), b(9);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.normal(), b.normal());
    const double t = a.truncated_normal(0.02);
    EXPECT_EQ(t, b.truncated_normal(0.02));
    EXPECT_LE(std::abs(t), 0.04);
  }
}

}  // namespace
}  // namespace forcecast::nn
