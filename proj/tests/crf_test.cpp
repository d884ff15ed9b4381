#include "aeslab/crf.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "crf_oracle.hpp"
#include "gradcheck.hpp"

namespace aeslab {
namespace {

using testing::random_constant;

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

TEST(Unary, ZeroWeightsAndShape) {
  Rng rng(1);
  CrfParams p = CrfParams::init(rng, 4);
  for (double& w : p.emission.data()) w = 0.0;
  const Tensor u = unary_scores(random_constant(rng, 5, 4), p);
  EXPECT_EQ(u.shape(), (Shape{5, 2}));
  for (double v : u.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(unary_scores(Tensor::zeros(0, 4), p), ContractError);
  EXPECT_EQ(p.transition.shape(), (Shape{2, 2}));
}

TEST(LogPartition, SmallCases) {
  Rng rng(2);
  const Tensor u1 = random_constant(rng, 1, 2);
  EXPECT_NEAR(log_partition(u1, Tensor::zeros(2, 2)).item(), std::log(std::exp(u1(0, 0)) + std::exp(u1(0, 1))), 1e-14);
  EXPECT_NEAR(log_partition(Tensor::zeros(3, 2), Tensor::zeros(2, 2)).item(), std::log(8.0), 1e-14);
  EXPECT_THROW(log_partition(Tensor::zeros(0, 2), Tensor::zeros(2, 2)), ContractError);
  EXPECT_THROW(log_partition(Tensor::zeros(2, 2), Tensor::zeros(3, 3)), DimensionError);
}

TEST(CrfOracle, AgreesWithEnumerationUpToLengthFive) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const std::size_t T = 1 + rng.below(5), L = 2;
    const Tensor u = random_constant(rng, T, L, -3, 3);
    const Tensor a = random_constant(rng, L, L, -3, 3);
    const auto table = testing::enumerate_paths(vals(u), vals(a), T, L);
    const double logz = testing::brute_log_partition(table);
    EXPECT_NEAR(log_partition(u, a).item(), logz, 1e-10);
    double mass = 0;
    for (std::size_t k = 0; k < table.paths.size(); ++k) {
      const double nll = crf_nll(u, a, table.paths[k]).item();
      EXPECT_NEAR(nll, logz - table.scores[k], 1e-10);
      EXPECT_GE(nll, 0.0);
      EXPECT_NEAR(path_score(u, a, table.paths[k]).item(), table.scores[k], 1e-12);
      mass += std::exp(-nll);
    }
    EXPECT_NEAR(mass, 1.0, 1e-9);
    const auto best = testing::brute_argmax(table);
    const auto v = viterbi_decode(u, a);
    EXPECT_EQ(v.labels, table.paths[best]);
    EXPECT_NEAR(v.score, table.scores[best], 1e-12);
  }
}

TEST(Viterbi, ExamplesAndTieBreak) {
  const auto v = viterbi_decode(Tensor::from(1, 2, {0.0, 1.0}), Tensor::zeros(2, 2));
  EXPECT_EQ(v.io(), (IOSequence{IoLabel::I}));
  const auto z = viterbi_decode(Tensor::zeros(6, 2), Tensor::zeros(2, 2));
  EXPECT_EQ(z.io(), IOSequence(6, IoLabel::O));
  // Integer-valued scores make ties frequent.
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(5000 + seed);
    const std::size_t T = 1 + rng.below(6);
    std::vector<double> uv(T * 2), av(4);
    for (double& x : uv) x = static_cast<double>(rng.below(3));
    for (double& x : av) x = static_cast<double>(rng.below(3)) - 1.0;
    const auto table = testing::enumerate_paths(uv, av, T, 2);
    const auto got = viterbi_decode(Tensor::from(T, 2, uv), Tensor::from(2, 2, av));
    EXPECT_EQ(got.labels, table.paths[testing::brute_argmax(table)]) << "seed " << seed;
  }
}

TEST(Viterbi, ShiftInvariance) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor u = random_constant(rng, 5, 2, -2, 2);
    const Tensor a = random_constant(rng, 2, 2, -2, 2);
    const double c = rng.uniform(-4, 4);
    const Tensor shifted = add_scalar(u, c);
    EXPECT_EQ(viterbi_decode(u, a).labels, viterbi_decode(shifted, a).labels);
    EXPECT_NEAR(log_partition(shifted, a).item(), log_partition(u, a).item() + 5 * c, 1e-10);
    const std::vector<std::size_t> y = {0, 1, 1, 0, 1};
    EXPECT_NEAR(crf_nll(shifted, a, y).item(), crf_nll(u, a, y).item(), 1e-10);
  }
}

TEST(CrfNll, DegenerateSingleLabel) {
  Rng rng(4);
  const Tensor u = random_constant(rng, 4, 1);
  EXPECT_NEAR(crf_nll(u, Tensor::filled(1, 1, 0.7), std::vector<std::size_t>(4, 0)).item(), 0.0, 1e-12);
}

TEST(CrfNll, LengthMismatchIsContractError) {
  EXPECT_THROW(crf_nll(Tensor::zeros(3, 2), Tensor::zeros(2, 2), IOSequence(2, IoLabel::O)), ContractError);
}

TEST(CrfNll, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(700 + seed);
    const std::size_t T = 1 + rng.below(6);
    Tensor feats = testing::random_parameter(rng, T, 3);
    CrfParams p = CrfParams::init(rng, 3);
    for (double& x : p.transition.data()) x = rng.uniform(-1, 1);
    IOSequence gold(T);
    for (auto& l : gold) l = rng.below(2) ? IoLabel::I : IoLabel::O;
    ParamList params = {{"features", feats}};
    p.collect(params, "crf");
    const auto res = testing::gradcheck(params, [&] { return crf_nll(unary_scores(feats, p), p.transition, gold); });
    EXPECT_LE(res.max_rel_error, 1e-4) << res.worst_param;
  }
}

TEST(CrfNll, DecreasesMonotonicallyUnderGradientDescent) {
  Rng rng(9);
  CrfParams p = CrfParams::init(rng, 3);
  const Tensor feats = random_constant(rng, 6, 3);
  using enum IoLabel;
  const IOSequence gold = {O, I, I, O, I, I};
  ParamList params;
  p.collect(params, "crf");
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 50; ++step) {
    Graph g;
    Tensor loss;
    {
      GraphScope s(g);
      loss = crf_nll(unary_scores(feats, p), p.transition, gold);
    }
    EXPECT_LT(loss.item(), prev) << "step " << step;
    prev = loss.item();
    zero_grads(params);
    backward(g, loss);
    for (auto& np : params) {
      auto d = np.tensor.data();
      const auto gr = np.tensor.grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= 0.1 * gr[i];
    }
  }
  EXPECT_EQ(viterbi_decode(unary_scores(feats, p), p.transition).io(), gold);
}

}  // namespace
}  // namespace aeslab
