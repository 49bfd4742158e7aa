#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "liftwave/errors.hpp"
#include "liftwave/metrics.hpp"
#include "test_util.hpp"

using namespace liftwave;
using namespace lwtest;

namespace {

Tensor random_image(int h, int w, std::mt19937_64& rng) {
  Tensor t(1, h, w);
  std::uniform_real_distribution<double> u(0, 255);
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Reference BD-rate: normal-equation cubic fit in raw quality and dense
// Simpson integration of the fitted polynomials.
std::array<double, 4> fit_cubic(const RDCurve& c) {
  double a[4][5] = {};
  for (const RDPoint& p : c.points) {
    double pw[7];
    pw[0] = 1;
    for (int k = 1; k < 7; ++k) pw[k] = pw[k - 1] * p.quality;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) a[i][j] += pw[i + j];
      a[i][4] += pw[i] * std::log10(p.rate);
    }
  }
  for (int i = 0; i < 4; ++i) {
    int piv = i;
    for (int r = i + 1; r < 4; ++r)
      if (std::abs(a[r][i]) > std::abs(a[piv][i])) piv = r;
    std::swap(a[i], a[piv]);
    for (int r = 0; r < 4; ++r) {
      if (r == i) continue;
      const double f = a[r][i] / a[i][i];
      for (int k = i; k < 5; ++k) a[r][k] -= f * a[i][k];
    }
  }
  return {a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]};
}

double reference_bd(const RDCurve& anchor, const RDCurve& test) {
  const auto pa = fit_cubic(anchor), pt = fit_cubic(test);
  double lo = -1e300, hi = 1e300;
  for (const RDCurve* c : {&anchor, &test}) {
    double mn = 1e300, mx = -1e300;
    for (const RDPoint& p : c->points) {
      mn = std::min(mn, p.quality);
      mx = std::max(mx, p.quality);
    }
    lo = std::max(lo, mn);
    hi = std::min(hi, mx);
  }
  auto ev = [](const std::array<double, 4>& p, double q) { return p[0] + q * (p[1] + q * (p[2] + q * p[3])); };
  const int n = 200000;
  const double h = (hi - lo) / n;
  double s = 0;
  for (int i = 0; i <= n; ++i) {
    const double q = lo + i * h;
    const double wgt = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    s += wgt * (ev(pt, q) - ev(pa, q));
  }
  const double mean = s * h / 3 / (hi - lo);
  return (std::pow(10.0, mean) - 1.0) * 100.0;
}

RDCurve psnr_curve(std::vector<std::pair<double, double>> pts) {
  RDCurve c{"psnr", {}};
  for (auto [r, q] : pts) c.points.push_back({r, q});
  return c;
}

}  // namespace

TEST(Psnr, UniformUnitErrorAndIdentity) {
  Tensor a(1, 8, 8, 100.0), b(1, 8, 8, 101.0);
  EXPECT_NEAR(psnr(a, b), 48.1308036086791, 1e-9);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_GT(psnr(a, a), 0);
  EXPECT_THROW(psnr(a, Tensor(1, 8, 7)), InputError);
}

TEST(Psnr, MatchesTwoPassReference) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_image(13, 17, rng), b = random_image(13, 17, rng);
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    const double ref = 10 * std::log10(255.0 * 255.0 / (s / static_cast<double>(a.size())));
    EXPECT_NEAR(psnr(a, b), ref, 1e-9);
  }
}

TEST(Ssim, SelfSymmetryAndRange) {
  std::mt19937_64 rng(2);
  const Tensor a = random_image(32, 40, rng), b = random_image(32, 40, rng);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_LE(ssim(a, b), 1.0);
  EXPECT_GE(ssim(a, b), -1.0);
  EXPECT_THROW(ssim(Tensor(1, 10, 40), Tensor(1, 10, 40)), InputError);
}

TEST(Ssim, FlatGrayAgainstTextureIsLow) {
  std::mt19937_64 rng(3);
  const Tensor tex = oriented_texture(64, 0.4, 0.8, rng, 20.0);
  EXPECT_LT(ssim(tex, Tensor(1, 64, 64, 128.0)), 0.5);
}

TEST(Ssim, DegradesWithNoise) {
  std::mt19937_64 rng(4);
  const Tensor a = oriented_texture(48, 1.0, 0.5, rng, 5.0);
  double prev = 1.0;
  for (double sigma : {2.0, 8.0, 32.0}) {
    Tensor b = a;
    std::normal_distribution<double> n(0, sigma);
    for (double& v : b.values()) v += n(rng);
    const double s = ssim(a, b);
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(MsSsim, SelfIsOneAndSizeLimit) {
  std::mt19937_64 rng(5);
  const Tensor a = random_image(176, 180, rng);
  EXPECT_NEAR(ms_ssim(a, a), 1.0, 1e-12);
  Tensor b = a;
  for (double& v : b.values()) v = 255 - v;
  const double m = ms_ssim(a, b);
  EXPECT_GE(m, 0.0);
  EXPECT_LT(m, 1.0);
  EXPECT_THROW(ms_ssim(Tensor(1, 175, 200), Tensor(1, 175, 200)), InputError);
}

TEST(BdRate, IdentityIsZero) {
  const RDCurve c = psnr_curve({{0.1, 25}, {0.3, 29}, {0.6, 32}, {1.0, 35}, {1.5, 37}});
  EXPECT_NEAR(bd_rate(c, c), 0.0, 1e-12);
}

TEST(BdRate, UniformScalingGivesThatPercentage) {
  const RDCurve a = psnr_curve({{0.1, 25}, {0.3, 29}, {0.6, 32}, {1.0, 35}, {1.5, 37}});
  RDCurve b = a;
  for (RDPoint& p : b.points) p.rate *= 0.9;
  EXPECT_NEAR(bd_rate(a, b), -10.0, 0.01);
  for (RDPoint& p : b.points) p.rate *= 1.25 / 0.9;
  EXPECT_NEAR(bd_rate(a, b), 25.0, 0.01);
}

TEST(BdRate, ReciprocityProperty) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  for (int trial = 0; trial < 50; ++trial) {
    RDCurve a{"psnr", {}}, b{"psnr", {}};
    for (int i = 0; i < 6; ++i) {
      const double r = 0.1 * std::pow(1.6, i);
      a.points.push_back({r, 24 + 4.5 * std::log2(r / 0.1) + u(rng)});
      b.points.push_back({r * (1 + u(rng)), 24.3 + 4.4 * std::log2(r / 0.1) + u(rng)});
    }
    const double ab = bd_rate(a, b), ba = bd_rate(b, a);
    EXPECT_NEAR((1 + ab / 100) * (1 + ba / 100), 1.0, 0.005) << ab << " " << ba;
  }
}

TEST(BdRate, MatchesDenseIntegrationReference) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> jitter(0.8, 1.2), slope(2.0, 6.0);
  for (int trial = 0; trial < 30; ++trial) {
    RDCurve a{"psnr", {}}, b{"psnr", {}};
    // piecewise-linear quality in log rate with random slopes
    double qa = 22, qb = 21.5, ra = 0.1, rb = 0.09;
    for (int i = 0; i < 5 + trial % 3; ++i) {
      a.points.push_back({ra, qa});
      b.points.push_back({rb, qb});
      ra *= 1.5 * jitter(rng);
      rb *= 1.5 * jitter(rng);
      qa += slope(rng);
      qb += slope(rng);
    }
    EXPECT_NEAR(bd_rate(a, b), reference_bd(a, b), 0.05) << "trial " << trial;
  }
}

TEST(BdRate, Errors) {
  const RDCurve a = psnr_curve({{0.1, 25}, {0.3, 29}, {0.6, 32}, {1.0, 35}});
  EXPECT_THROW(bd_rate(a, psnr_curve({{0.1, 25}, {0.3, 29}, {0.6, 32}})), InputError);
  EXPECT_THROW(bd_rate(a, psnr_curve({{0.1, 40}, {0.3, 41}, {0.6, 42}, {1.0, 43}})), InputError);
}

TEST(RDCurve, CheckFlagsViolations) {
  EXPECT_EQ(psnr_curve({{0.1, 25}, {0.2, 26}}).check(), "");
  EXPECT_NE(psnr_curve({{0.2, 25}, {0.1, 26}}).check(), "");
  EXPECT_NE(psnr_curve({{0.1, 25}, {0.2, 24}}).check(), "");
  EXPECT_EQ(psnr_curve({{0.1, 25}, {0.2, 25 - 1e-7}}).check(), "");
}

TEST(RDCurve, CsvRoundTrip) {
  const std::string path = (std::filesystem::temp_directory_path() / "lw_rd_roundtrip.csv").string();
  const RDCurve p = psnr_curve({{0.1, 25.123456789}, {0.5, 31.5}});
  RDCurve s{"ssim", {{0.1, 0.8}, {0.5, 0.95}}};
  write_rd_csv(path, {p, s});
  const auto m = read_rd_csv(path);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_NEAR(m.at("psnr").points[0].quality, 25.123456789, 1e-8);
  EXPECT_EQ(m.at("ssim").points.size(), 2u);
  std::remove(path.c_str());
  EXPECT_THROW(read_rd_csv("/nonexistent.csv"), IoError);
}
