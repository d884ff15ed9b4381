#include "aeslab/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"

namespace aeslab {
namespace {

ParamList scalar_param(double v) { return {{"theta", Tensor::parameter(1, 1, {v})}}; }

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Rng rng(1);
  ParamList p = {{"w", testing::random_parameter(rng, 3, 3)}};
  const auto before = std::vector<double>(p[0].tensor.values().begin(), p[0].tensor.values().end());
  AdamState s;
  for (int k = 0; k < 5; ++k) adam_step(s, p, {std::vector<double>(9, 0.0)});
  EXPECT_EQ(std::vector<double>(p[0].tensor.values().begin(), p[0].tensor.values().end()), before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // t=1, g=1: m_hat = 1, v_hat = 1, step = 0.1 / (1 + 1e-8).
  ParamList p = scalar_param(0.0);
  AdamState s;
  s.lr = 0.1;
  adam_step(s, p, {{1.0}});
  EXPECT_NEAR(p[0].tensor.values()[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(s.t, 1);
}

TEST(Adam, ConvergesOnQuadratic) {
  ParamList p = scalar_param(5.0);
  AdamState s;
  s.lr = 0.1;
  for (int k = 0; k < 200; ++k) {
    const double th = p[0].tensor.values()[0];
    adam_step(s, p, {{2.0 * th}});
  }
  EXPECT_LT(std::abs(p[0].tensor.values()[0]), 1e-2);
}

TEST(Adam, ShapeMismatchIsContractError) {
  ParamList p = scalar_param(1.0);
  AdamState s;
  EXPECT_THROW(adam_step(s, p, {{1.0, 2.0}}), ContractError);
  EXPECT_THROW(adam_step(s, p, {}), ContractError);
}

TEST(Rmsprop, ZeroGradientLeavesParametersUnchanged) {
  ParamList p = scalar_param(4.0);
  RmspropState s;
  rmsprop_step(s, p, {{0.0}});
  EXPECT_DOUBLE_EQ(p[0].tensor.values()[0], 4.0);
}

TEST(Rmsprop, FirstStepMatchesHandEvaluation) {
  ParamList p = scalar_param(0.0);
  RmspropState s;
  s.lr = 0.01;
  s.beta = 0.9;
  rmsprop_step(s, p, {{2.0}});
  EXPECT_NEAR(s.eg2[0][0], 0.4, 1e-15);
  EXPECT_NEAR(p[0].tensor.values()[0], -0.01 * 2.0 / std::sqrt(0.4 + 1e-8), 1e-15);
}

TEST(Rmsprop, ConvergesOnShiftedQuadratic) {
  ParamList p = scalar_param(0.0);
  RmspropState s;
  s.lr = 0.01;
  for (int k = 0; k < 500; ++k) {
    const double th = p[0].tensor.values()[0];
    rmsprop_step(s, p, {{2.0 * (th - 3.0)}});
  }
  EXPECT_LT(std::abs(p[0].tensor.values()[0] - 3.0), 1e-2);
}

TEST(L2Penalty, Values) {
  ParamList p = {{"w", Tensor::parameter(1, 2, {3, 4})}};
  EXPECT_DOUBLE_EQ(l2_penalty(p, 0.0).item(), 0.0);
  EXPECT_DOUBLE_EQ(l2_penalty(p, 1.0).item(), 25.0);
  EXPECT_THROW(l2_penalty(p, -1.0), ContractError);

  Rng rng(5);
  ParamList q = {{"a", testing::random_parameter(rng, 4, 3)}, {"b", testing::random_parameter(rng, 1, 7)}};
  double sq = 0;
  for (const auto& x : q)
    for (double v : x.tensor.values()) sq += v * v;
  EXPECT_NEAR(l2_penalty(q, 1e-4).item(), 1e-4 * sq, 1e-12);
}

TEST(L2Penalty, GradientIsTwoLambdaW) {
  Rng rng(9);
  ParamList q = {{"a", testing::random_parameter(rng, 2, 3)}};
  const auto r = testing::gradcheck(q, [&] { return l2_penalty(q, 0.3); });
  EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(Clip, BelowThresholdIsIdentity) {
  GradList g = {{3.0, 0.0}};
  EXPECT_DOUBLE_EQ(clip_gradients(g, 5.0), 3.0);
  EXPECT_EQ(g[0], (std::vector<double>{3.0, 0.0}));
}

TEST(Clip, HalvesNormTen) {
  GradList g = {{6.0, 8.0}};
  EXPECT_DOUBLE_EQ(clip_gradients(g, 5.0), 10.0);
  EXPECT_NEAR(g[0][0], 3.0, 1e-15);
  EXPECT_NEAR(g[0][1], 4.0, 1e-15);
}

TEST(Clip, PostClipNormBoundedAndIdempotent) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    GradList g(3);
    for (auto& v : g) {
      v.resize(1 + rng.below(6));
      for (double& x : v) x = rng.uniform(-10, 10);
    }
    const double max_norm = rng.uniform(0.1, 20);
    clip_gradients(g, max_norm);
    EXPECT_LE(global_norm(g), max_norm + 1e-9);
    const GradList once = g;
    clip_gradients(g, max_norm);
    for (std::size_t k = 0; k < g.size(); ++k)
      for (std::size_t i = 0; i < g[k].size(); ++i) EXPECT_NEAR(g[k][i], once[k][i], 1e-12);
  }
  GradList g = {{1.0}};
  EXPECT_THROW(clip_gradients(g, 0.0), ContractError);
}

TEST(Ema, FixedPointAndHalfDecay) {
  ParamList p = scalar_param(2.0);
  EmaState s = EmaState::track(p, 0.9);
  ema_update(s, p);
  EXPECT_DOUBLE_EQ(s.shadow[0][0], 2.0);

  EmaState z;
  z.decay = 0.5;
  z.shadow = {{0.0}};
  ema_update(z, p);
  EXPECT_DOUBLE_EQ(z.shadow[0][0], 1.0);
}

TEST(Ema, ClosedFormFromZero) {
  ParamList p = scalar_param(1.7);
  EmaState s;
  s.decay = 0.9999;
  s.shadow = {{0.0}};
  for (int k = 1; k <= 50; ++k) {
    ema_update(s, p);
    EXPECT_NEAR(s.shadow[0][0], 1.7 * (1.0 - std::pow(0.9999, k)), 1e-12);
  }
}

TEST(Ema, WarmupRampIsCappedByDecay) {
  EXPECT_DOUBLE_EQ(ema_warmup_decay(0.9999, 0), 0.1);
  EXPECT_DOUBLE_EQ(ema_warmup_decay(0.9999, 90), 0.91);
  EXPECT_DOUBLE_EQ(ema_warmup_decay(0.5, 1000), 0.5);
  ParamList p = scalar_param(1.0);
  EmaState s;
  EXPECT_THROW(ema_update(s, p, 1.0), ContractError);
}

TEST(Optimizers, AllLeaveParametersUnderZeroGradient) {
  Rng rng(23);
  ParamList p = {{"w", testing::random_parameter(rng, 2, 2)}};
  const std::vector<double> before(p[0].tensor.values().begin(), p[0].tensor.values().end());
  AdamState a;
  RmspropState r;
  const GradList zero = {std::vector<double>(4, 0.0)};
  adam_step(a, p, zero);
  rmsprop_step(r, p, zero);
  EXPECT_EQ(std::vector<double>(p[0].tensor.values().begin(), p[0].tensor.values().end()), before);
}

}  // namespace
}  // namespace aeslab
