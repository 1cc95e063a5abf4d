#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dynlab/logderiv_toolkit.hpp"
#include "oracles.hpp"

using namespace dynlab;

namespace {

// Largest sum 1/|z - z_k| over rings of points just outside each disk and a coarse
// lattice, skipping excluded points. Independent of verify_exclusion.
double worst_outside(const ExclusionDiskSet& s, const std::vector<cplx>& zeros) {
  std::vector<cplx> pts;
  for (const auto& d : s.disks)
    for (int k = 0; k < 360; ++k)
      for (double f : {1.0 + 1e-9, 1.01, 1.2}) pts.push_back(d.center + std::polar(d.radius * f, 2 * oracle::kPi * k / 360));
  for (int i = -60; i <= 60; ++i)
    for (int j = -60; j <= 60; ++j) pts.push_back(cplx(i * 0.1, j * 0.1));
  double worst = 0.0;
  for (cplx p : pts) {
    bool inside = false;
    for (const auto& d : s.disks) inside |= std::abs(p - d.center) <= d.radius;
    if (inside) continue;
    double sum = 0.0;
    for (cplx z : zeros) sum += 1.0 / std::abs(p - z);
    worst = std::max(worst, sum);
  }
  return worst;
}

}  // namespace

TEST(Shell, ClosedForm) {
  EXPECT_NEAR(r_shell(100.0, 6.0, std::exp(2.0)), 250.0, 1e-12);
  EXPECT_NEAR(r_shell(50.0, 1.0, 50.0 / oracle::kPi), 50.0 * (1 + 1 / std::pow(std::log(50.0 / oracle::kPi), 2)), 1e-12);
  // (log(50/pi))^2 = 7.6586, so R_4(50) = 76.117
  EXPECT_NEAR(r_shell(50.0, 4.0, 50.0 / oracle::kPi), 76.117, 5e-4);
  try {
    r_shell(10.0, 6.0, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateT);
  }
}

TEST(Goldberg, ExpAtTwiceTheRadiusGivesSixteenOverPi) {
  // |f'/f| = 1 and T(s) = s/pi, so with s = 2|z| the bound is 16/pi for every z
  for (double r : {3.0, 10.0, 40.0})
    for (double th : {0.0, 1.0, 2.5}) {
      auto c = goldberg_check(FunctionSpec::scaled_exp(1.0), std::polar(r, th), 2 * r, {});
      EXPECT_NEAR(c.bound, 16.0 / oracle::kPi, 1e-6);
      EXPECT_NEAR(c.actual, 1.0, 1e-12);
      EXPECT_TRUE(c.holds);
    }
}

TEST(Goldberg, ShiftedSinHoldsAwayFromZeros) {
  auto f = FunctionSpec::sine().with_shift(1.0);
  double s = 12.0;
  std::vector<cplx> zeros;
  for (int k = -4; k <= 4; ++k)
    if (std::abs(k * oracle::kPi - 1.0) < s) zeros.push_back(k * oracle::kPi - 1.0);
  for (cplx z : {cplx(0.5, 0.5), cplx(3.0, -1.0), cplx(-6.0, 2.0), cplx(1.14, 0.0)}) {
    auto c = goldberg_check(f, z, s, zeros);
    // direct |cot(z + 1)|
    EXPECT_NEAR(c.actual, std::abs(std::cos(z + 1.0) / std::sin(z + 1.0)), 1e-9 * c.actual);
    EXPECT_TRUE(c.holds) << z;
  }
  EXPECT_THROW(goldberg_check(f, cplx(5, 0), 4.0, zeros), Error);
}

TEST(Exclusion, SingleZero) {
  std::vector<cplx> z{cplx(1.0, -2.0)};
  auto s = fuchs_macintyre_disks(z, 2.0, ExclusionMode::QuadraticSum);
  ASSERT_EQ(s.disks.size(), 1u);
  EXPECT_NEAR(s.bound, 1.0, 1e-15);
  EXPECT_GE(s.disks[0].radius, 1.0 - 1e-12);  // 1/|z - z0| <= 1 forces radius >= 1
  EXPECT_LE(s.budget_used, 16.0);
  EXPECT_LE(worst_outside(s, z), s.bound * (1 + 1e-9));
}

TEST(Exclusion, CoincidentZeros) {
  std::vector<cplx> z(5, cplx(0.5, 0.5));
  for (auto mode : {ExclusionMode::QuadraticSum, ExclusionMode::LinearSum}) {
    auto s = fuchs_macintyre_disks(z, 1.0, mode);
    EXPECT_EQ(s.disks.size(), 1u);
    EXPECT_GE(s.disks[0].radius, 5.0 / s.bound * (1 - 1e-12));
    EXPECT_LE(worst_outside(s, z), s.bound * (1 + 1e-9));
  }
}

TEST(Exclusion, TwentyRandomZerosBothModes) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-4.0, 4.0);
  std::vector<cplx> z;
  for (int i = 0; i < 20; ++i) z.emplace_back(U(rng), U(rng));
  for (auto mode : {ExclusionMode::QuadraticSum, ExclusionMode::LinearSum})
    for (double H : {0.5, 2.0}) {
      auto s = fuchs_macintyre_disks(z, H, mode);
      EXPECT_LE(s.disks.size(), 20u);
      EXPECT_LE(s.budget_used, s.budget * (1 + 1e-12));
      double expect = mode == ExclusionMode::QuadraticSum ? 40.0 / H : 20.0 * (1 + std::log(20.0)) / H;
      EXPECT_NEAR(s.bound, expect, 1e-12);
      EXPECT_LE(worst_outside(s, z), s.bound * (1 + 1e-9));
      auto v = verify_exclusion(s, z, 5000, 9);
      EXPECT_TRUE(v.holds);
      EXPECT_GT(v.samples_checked, 0u);
    }
}

TEST(Exclusion, ClusterCountMatchesTheDiskContents) {
  // six points whose minimal enclosing circle (radius 1.45) is wider than rho
  std::vector<cplx> z{{-0.425158, -1.11679}, {-1.29823, -0.0799413}, {1.43754, -0.725636},
                      {-0.983069, 0.276982}, {1.55635, 0.334239},    {0.729405, 0.23386}};
  const double rho = 1.08362;
  auto [count, center] = detail::max_cover(z, rho);
  int inside = 0;
  for (cplx p : z) inside += std::abs(p - center) <= rho * (1 + 1e-9);
  EXPECT_EQ(count, inside);
  EXPECT_EQ(count, 4);
  auto s = fuchs_macintyre_disks(z, 1.23478, ExclusionMode::LinearSum);
  EXPECT_LE(s.budget_used, s.budget);
}

TEST(Exclusion, RejectsBadInput) {
  EXPECT_THROW(fuchs_macintyre_disks({}, 1.0, ExclusionMode::LinearSum), Error);
  EXPECT_THROW(fuchs_macintyre_disks({cplx(0, 0)}, 0.0, ExclusionMode::LinearSum), Error);
}

TEST(GoodRadius, ExpThresholdFromClosedForm) {
  // T = r/pi, so T(R6)/T(r) = 1 + 6/log(r/pi)^2 <= e  iff  r >= pi exp(sqrt(6/(e-1)))
  const double threshold = oracle::kPi * std::exp(std::sqrt(6.0 / (std::exp(1.0) - 1.0)));
  std::vector<double> grid;
  for (double r = 10; r <= 1000; r *= 1.25) grid.push_back(r);
  auto scan = good_radius_scan(FunctionSpec::scaled_exp(1.0), grid);
  ASSERT_EQ(scan.radii.size(), grid.size());
  for (const auto& g : scan.radii) {
    EXPECT_EQ(g.good, g.r >= threshold) << g.r;
    EXPECT_NEAR(g.T_r, g.r / oracle::kPi, 1e-6 * g.r);
    if (g.good) {
      EXPECT_TRUE(g.max_modulus_bound) << g.r;
    }
  }
  EXPECT_GT(scan.exceptional_log_measure_estimate, 0.0);
}

TEST(GoodRadius, SyntheticJumpMarksRadiiBelowIt) {
  auto T = [](double r) { return r < 500 ? r : 100 * r; };
  std::vector<double> grid;
  for (double r = 100; r <= 2000; r *= 1.1) grid.push_back(r);
  auto scan = good_radius_scan(T, grid);
  for (const auto& g : scan.radii) {
    double R6 = g.r * (1 + 6 / std::pow(std::log(T(g.r)), 2));
    bool expect = T(R6) <= std::exp(1.0) * T(g.r);
    EXPECT_EQ(g.good, expect) << g.r;
    if (g.r < 500 && R6 >= 500) {
      EXPECT_FALSE(g.good);
    }
  }
  EXPECT_FALSE(scan.all_good());
}

TEST(Koebe, IdentityIsExact) {
  UnivalentMap m{[](cplx z) { return z; }, [](cplx) { return cplx(1, 0); }, cplx(0, 0), 1.0};
  auto rep = koebe_check(m, 0.5);
  EXPECT_NEAR(rep.ratio_min, 1.0, 1e-12);
  EXPECT_NEAR(rep.ratio_max, 1.0, 1e-12);
  EXPECT_NEAR(rep.deriv_min, 1.0, 1e-12);
  EXPECT_TRUE(rep.ok());
}

TEST(Koebe, KoebeFunctionAttainsTheLowerBound) {
  // k(z) = z/(1-z)^2: |k(z)|/|z| = 1/(1+lambda)^2 at z = -lambda
  UnivalentMap m{[](cplx z) { return z / ((1.0 - z) * (1.0 - z)); },
                 [](cplx z) { return (1.0 + z) / std::pow(1.0 - z, 3); }, cplx(0, 0), 1.0};
  auto rep = koebe_check(m, 0.5);
  EXPECT_NEAR(rep.ratio_lo, 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(rep.ratio_min, 4.0 / 9.0, 1e-12);
  EXPECT_NEAR(rep.deriv_min, rep.deriv_lo, 1e-12);
  EXPECT_TRUE(rep.distortion_ok);
  EXPECT_TRUE(rep.derivative_ok);
}

TEST(Koebe, NonInjectiveMapIsRejected) {
  UnivalentMap m{[](cplx z) { return z * z; }, [](cplx z) { return 2.0 * z; }, cplx(0, 0), 1.0};
  EXPECT_THROW(koebe_check(m, 0.5), Error);
}
