#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.h"
#include "tramp/errors.h"
#include "tramp/scoring.h"

using namespace tramp;

TEST(Head, ZeroWeightsGiveOutputBias) {
  ParamStore ps(1);
  init_head_params(ps, {8, 6, 4});
  for (auto n : {"head.fc3.w"}) {
    for (auto& v : ps.get(n).mutable_values()) v = 0.0;
  }
  ps.get("head.fc3.b").mutable_values()[0] = 0.75;
  auto y = mlp_head(DiffTensor::full({1, 8}, 3.0), ps);
  EXPECT_EQ(y.shape(), (Shape{1, 1}));
  EXPECT_EQ(y.item(), 0.75);
}

TEST(Head, GradientMatchesFiniteDifferences) {
  ParamStore ps(2);
  init_head_params(ps, {8, 6, 4});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> x(8);
  for (auto& v : x) v = g(rng);
  const auto in = DiffTensor::constant({1, 8}, x);
  auto rep = grad_check([&](ParamStore& p) { return mlp_head(in, p); }, ps);
  EXPECT_LT(rep.max_rel_error, 1e-6);
}

TEST(Head, WrongInputWidthIsShapeError) {
  ParamStore ps(4);
  init_head_params(ps, {8, 6, 4});
  EXPECT_THROW(mlp_head(DiffTensor::zeros({1, 7}), ps), ShapeError);
}

TEST(Bmc, SingleSampleIsZero) {
  const std::vector<double> p = {3.7}, y = {-1.2};
  EXPECT_NEAR(bmc_loss_value(p, y), 0.0, 1e-12);
}

TEST(Bmc, TwoSampleClosedForm) {
  const std::vector<double> p = {0, 1}, y = {0, 1};
  const double expect = -std::log(1.0 / (1.0 + std::exp(-0.5)));
  EXPECT_NEAR(bmc_loss_value(p, y), expect, 1e-14);
  EXPECT_NEAR(expect, 0.4741, 5e-5);
}

TEST(Bmc, MatchesOracleOnRandomBatches) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> bsz(1, 16);
  std::normal_distribution<double> g(0, 2);
  std::uniform_real_distribution<double> sig(0.2, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int b = bsz(rng);
    std::vector<double> p(b), y(b);
    for (int i = 0; i < b; ++i) {
      p[i] = g(rng);
      y[i] = std::round(g(rng));  // ties on purpose
    }
    BmcConfig cfg{sig(rng)};
    EXPECT_NEAR(bmc_loss_value(p, y, cfg), oracle::bmc(p, y, cfg.tau()), 1e-10);
  }
}

TEST(Bmc, PermutationInvariant) {
  std::vector<double> p = {0.1, 2.0, -1.0, 3.3, 0.5}, y = {0, 1, 2, 3, 4};
  const double a = bmc_loss_value(p, y);
  std::vector<std::size_t> idx = {3, 0, 4, 1, 2};
  std::vector<double> pp, yy;
  for (auto i : idx) {
    pp.push_back(p[i]);
    yy.push_back(y[i]);
  }
  EXPECT_EQ(bmc_loss_value(pp, yy), a);
}

TEST(Bmc, GradientMatchesFiniteDifferences) {
  ParamStore ps;
  ps.add_values("p", {4}, {0.3, -1.0, 2.2, 0.9});
  const std::vector<double> y = {0, 1, 1, 3};
  auto rep = grad_check([&](ParamStore& s) { return bmc_loss(s.get("p"), y); }, ps);
  EXPECT_LT(rep.max_rel_error, 1e-7);
}

TEST(Bmc, SizeMismatchAndBadTemperature) {
  const std::vector<double> y = {1, 2};
  EXPECT_THROW(bmc_loss(DiffTensor::zeros({3}), y), ShapeError);
  EXPECT_THROW(bmc_loss(DiffTensor::zeros({2}), y, BmcConfig{0.0}), ConfigError);
}

TEST(Spearman, MonotoneAndReversed) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> b = {10, 20, 25, 100, 1000};
  std::vector<double> r(b.rbegin(), b.rend());
  EXPECT_NEAR(spearman(a, b), 1.0, 1e-15);
  EXPECT_NEAR(spearman(a, r), -1.0, 1e-15);
}

TEST(Spearman, RankDifferenceCase) {
  const std::vector<double> a = {1, 2, 3, 4}, b = {1, 3, 2, 4};
  EXPECT_NEAR(spearman(a, b), 0.8, 1e-12);
}

TEST(Spearman, AverageRanksForTies) {
  const std::vector<double> v = {5, 1, 5, 3, 5};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
}

TEST(Spearman, MatchesOracleWithTies) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> len(2, 30), val(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = val(rng);
      b[i] = val(rng) + 0.5 * i;
    }
    if (std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; })) continue;
    EXPECT_NEAR(spearman(a, b), oracle::spearman(a, b), 1e-12);
  }
}

TEST(Spearman, DegenerateInputsThrow) {
  const std::vector<double> one = {1}, c = {2, 2, 2}, v = {1, 2, 3}, two = {1, 2};
  EXPECT_THROW(spearman(one, one), CorrelationError);
  EXPECT_THROW(spearman(c, v), CorrelationError);
  EXPECT_THROW(spearman(v, c), CorrelationError);
  EXPECT_THROW(spearman(v, two), CorrelationError);
}
