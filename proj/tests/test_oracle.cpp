#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "liftwave/errors.hpp"
#include "liftwave/nn.hpp"
#include "liftwave/oracle.hpp"
#include "test_util.hpp"

using namespace liftwave;
using namespace lwtest;

TEST(Oracle, SigmaDoublesPerLevel) {
  EXPECT_EQ(oracle_sigma(1), 1.0);
  EXPECT_EQ(oracle_sigma(2), 2.0);
  EXPECT_EQ(oracle_sigma(5), 16.0);
  EXPECT_THROW(oracle_sigma(0), InputError);
}

TEST(Oracle, BankLayout) {
  const OracleBank b = make_oracle_bank(5, 2);
  EXPECT_EQ(b.channels(), 5);
  EXPECT_EQ(b.radius, 6);
  ASSERT_EQ(b.orientations.size(), 4u);
  EXPECT_DOUBLE_EQ(b.orientations[0], 0.0);
  EXPECT_DOUBLE_EQ(b.orientations[1], std::numbers::pi / 4);
  EXPECT_DOUBLE_EQ(b.orientations[3], 3 * std::numbers::pi / 4);
  EXPECT_EQ(make_oracle_bank(1, 1).channels(), 1);
}

TEST(Oracle, KernelsAreGaussianAndZeroMeanDerivatives) {
  const Tensor k = make_oracle_bank(4, 1).kernels();
  const int n = k.dim(2);
  const std::size_t per = static_cast<std::size_t>(n) * n;
  double g = 0;
  for (std::size_t i = 0; i < per; ++i) g += k[i];
  EXPECT_NEAR(g, 1.0, 1e-12);
  for (int c = 1; c < 4; ++c) {
    double s = 0;
    for (std::size_t i = 0; i < per; ++i) s += k[c * per + i];
    EXPECT_NEAR(s, 0.0, 1e-12);
  }
}

TEST(Oracle, SeparableResponsesEqualExplicitKernels) {
  std::mt19937_64 rng(1);
  for (int level : {1, 2}) {
    const OracleBank b = make_oracle_bank(5, level);
    const Tensor x = random_plane(20, 27, rng, 30.0);
    Tensor direct = conv2d(x, b.kernels());
    for (double& v : direct.values()) v = std::abs(v);
    EXPECT_LT(max_abs_diff(direct, oracle_responses(x, b)), 1e-10);
  }
}

TEST(Oracle, OrientedGratingSelectsMatchingChannel) {
  const int channels = 5;  // derivative angles 0, pi/4, pi/2, 3pi/4
  const OracleBank b = make_oracle_bank(channels, 1);
  for (int k = 0; k < 4; ++k) {
    const double theta = k * std::numbers::pi / 4;
    Tensor x(1, 48, 48);
    for (int y = 0; y < 48; ++y)
      for (int c = 0; c < 48; ++c) x.at(0, y, c) = 40 * std::sin(0.6 * (std::cos(theta) * c + std::sin(theta) * y));
    const Tensor r = average_pool(oracle_responses(x, b), 48, 48, 1, 1);
    int best = 1;
    for (int c = 2; c < channels; ++c)
      if (r.at(c, 0, 0) > r.at(best, 0, 0) + 1e-9) best = c;
    EXPECT_EQ(best - 1, k) << "theta " << theta;
  }
}

TEST(Oracle, OpacitiesAreNormalizedOnSubbandGrid) {
  std::mt19937_64 rng(2);
  const Tensor x = random_plane(33, 20, rng, 50.0);
  for (int level : {1, 2, 3}) {
    const Tensor o = oracle_opacities(x, level, make_oracle_bank(5, level));
    const int f = 1 << level;
    EXPECT_EQ(o.height(), (33 + f - 1) / f);
    EXPECT_EQ(o.width(), (20 + f - 1) / f);
    for (int y = 0; y < o.height(); ++y)
      for (int c = 0; c < o.width(); ++c) {
        double s = 0;
        for (int ch = 0; ch < 5; ++ch) {
          EXPECT_GE(o.at(ch, y, c), 0.0);
          s += o.at(ch, y, c);
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
  }
}

TEST(Oracle, ConstantImageFavoursGaussianChannel) {
  const Tensor o = oracle_opacities(Tensor(1, 16, 16, 10.0), 1, make_oracle_bank(5, 1));
  const double expect = 10.01 / (10.01 + 4 * 0.01);
  for (int y = 0; y < o.height(); ++y)
    for (int c = 0; c < o.width(); ++c) EXPECT_NEAR(o.at(0, y, c), expect, 1e-9);
}

TEST(AveragePool, HandExampleWithPartialBlocks) {
  Tensor t(1, 3, 3);
  for (int i = 0; i < 9; ++i) t[static_cast<std::size_t>(i)] = i;
  const Tensor p = average_pool(t, 2, 2, 2, 2);
  EXPECT_DOUBLE_EQ(p.at(0, 0, 0), (0 + 1 + 3 + 4) / 4.0);
  EXPECT_DOUBLE_EQ(p.at(0, 0, 1), (2 + 5) / 2.0);
  EXPECT_DOUBLE_EQ(p.at(0, 1, 0), (6 + 7) / 2.0);
  EXPECT_DOUBLE_EQ(p.at(0, 1, 1), 8.0);
  EXPECT_THROW(average_pool(t, 0, 1, 1, 1), InputError);
}
