#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dynlab/modulus_analysis.hpp"
#include "oracles.hpp"

using namespace dynlab;

namespace {
const FunctionSpec kExp = FunctionSpec::scaled_exp(1.0);
const FunctionSpec kSin = FunctionSpec::sine();
const FunctionSpec kCubic = FunctionSpec::polynomial({-1.0, 0.0, 0.0, 1.0});

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidArgument;
}
}  // namespace

TEST(MaxModulus, ClosedForms) {
  for (double r : {1.0, 10.0, 50.0}) {
    auto m = max_modulus(kExp, r);
    EXPECT_NEAR(m.log_value, r, 1e-9 * r);
    EXPECT_NEAR(min_modulus(kExp, r).log_value, -r, 1e-9 * r);
  }
  EXPECT_NEAR(max_modulus(kExp, 10.0).value(), 22026.465794806718, 1e-9 * 22026.47);
  for (double r : {1.0, 2.0, 5.0}) EXPECT_NEAR(max_modulus(kSin, r).value(), std::sinh(r), 1e-9 * std::sinh(r));
  EXPECT_NEAR(min_modulus(kCubic, 2.0).value(), 7.0, 1e-9 * 7);
}

TEST(MaxModulus, LogDomainBeyondDoubleRange) {
  auto m = max_modulus(kExp, 1000.0);
  EXPECT_TRUE(m.log_domain);
  EXPECT_NEAR(m.log_value, 1000.0, 1e-9 * 1000);
}

TEST(MinModulus, ZeroOnCircle) { EXPECT_LT(min_modulus(kSin, kPi).value(), 1e-9); }

TEST(MaxModulus, TaylorExpMatchesDenseSweep) {
  std::vector<cplx> c(40);
  double fact = 1.0;
  for (int k = 0; k < 40; ++k) {
    c[k] = 1.0 / fact;
    fact *= (k + 1);
  }
  auto t = FunctionSpec::taylor_series(c, 5.0);
  double dense = 0.0;
  for (int i = 0; i < 100000; ++i) {
    cplx z = std::polar(5.0, 2 * oracle::kPi * i / 100000.0);
    cplx v(0, 0);
    for (int k = 39; k >= 0; --k) v = v * z + c[k];
    dense = std::max(dense, std::abs(v));
  }
  EXPECT_NEAR(max_modulus(t, 5.0).value(), dense, 1e-9 * dense);
}

TEST(MaxModulus, RejectsBadArguments) {
  EXPECT_EQ(kind_of([] { max_modulus(kExp, 0.0); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { max_modulus(kExp, 1.0, 8); }), ErrorKind::InvalidArgument);
}

TEST(Characteristic, ExpAgainstIndependentQuadrature) {
  for (double r : {1.0, 10.0, 50.0}) {
    double q = oracle::circle_mean([&](double th) { return std::max(0.0, r * std::cos(th)); },
                                   {oracle::kPi / 2, 3 * oracle::kPi / 2});
    EXPECT_NEAR(characteristic_T(kExp, r), q, 1e-6 * q);
    EXPECT_NEAR(q, r / oracle::kPi, 1e-12 * r);
  }
}

TEST(Characteristic, PolynomialCases) {
  EXPECT_NEAR(characteristic_T(FunctionSpec::polynomial({0.0, 0.0, 0.0, 1.0}), std::exp(1.0)), 3.0, 1e-9);
  EXPECT_NEAR(characteristic_T(FunctionSpec::polynomial({0.0, 0.1}), 1.0), 0.0, 1e-15);
}

TEST(Characteristic, SinAgainstIndependentQuadrature) {
  double r = 7.0;
  auto lg = [&](double th) { return std::log(std::abs(std::sin(std::polar(r, th)))); };
  // split the integral where log|sin| crosses 0 (the kinks of log+)
  std::vector<double> kinks;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double a = 2 * oracle::kPi * i / n, b = 2 * oracle::kPi * (i + 1) / n;
    if ((lg(a) > 0) != (lg(b) > 0)) kinks.push_back(oracle::bisect(lg, a, b));
  }
  ASSERT_EQ(kinks.size(), 4u);
  double q = oracle::circle_mean([&](double th) { return std::max(0.0, lg(th)); }, kinks, 64);
  EXPECT_NEAR(q, 3.7816349433670804, 1e-12);  // 30-digit reference
  EXPECT_NEAR(characteristic_T(kSin, r), q, 1e-8 * q);
}

TEST(CountZeros, Families) {
  EXPECT_EQ(count_zeros(kSin, 10.0), 7);
  EXPECT_EQ(count_zeros(kExp, 100.0), 0);
  EXPECT_EQ(count_zeros(kCubic, 2.0), 3);
  EXPECT_EQ(count_zeros(kCubic, 0.5), 0);
  for (double r : {4.0, 20.0, 33.3}) EXPECT_EQ(count_zeros(kSin, r), 2 * static_cast<int>(std::floor(r / kPi)) + 1);
}

TEST(CountZeros, ZeroOnContour) { EXPECT_EQ(kind_of([] { count_zeros(kSin, kPi); }), ErrorKind::ZeroOnContour); }

TEST(IntegratedCounting, SinMatchesDirectSum) {
  double r = 10.0;
  double direct = std::log(r);
  for (int k = 1; k <= 3; ++k) direct += 2 * std::log(r / (k * oracle::kPi));
  EXPECT_NEAR(integrated_counting(kSin, r), direct, 1e-12);
}

TEST(Nevanlinna, ExpIdentity) {
  auto c = nevanlinna_identity_check(kExp, 20.0);
  EXPECT_NEAR(c.N, 0.0, 1e-15);
  EXPECT_NEAR(c.m_inv, 20.0 / oracle::kPi, 1e-6);
  EXPECT_NEAR(c.residual, 0.0, 1e-6);
  EXPECT_TRUE(c.identity_ok);
  EXPECT_TRUE(c.sandwich.holds());
}

TEST(Nevanlinna, ShiftedSin) {
  auto c = nevanlinna_identity_check(kSin.with_shift(1.0), 10.0);
  EXPECT_LT(c.residual, 1.0);
  EXPECT_TRUE(c.sandwich.holds());
}

TEST(Nevanlinna, ZeroAtOriginCannotBeNormalized) {
  EXPECT_EQ(kind_of([] { nevanlinna_identity_check(FunctionSpec::polynomial({0.0, 0.0, 0.0, 1.0}), 2.0); }),
            ErrorKind::NormalizationError);
}

TEST(GrowthSandwich, RandomizedConfigurations) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(2.0, 40.0), K(1.2, 4.0);
  std::vector<FunctionSpec> fs{kExp, FunctionSpec::cosine(), FunctionSpec::polynomial({1.0, 2.0, 0.0, 1.0})};
  for (const auto& f : fs)
    for (int i = 0; i < 20; ++i) {
      double r = U(rng), R = K(rng) * r;
      auto s = check_growth_sandwich(r, characteristic_T(f, r), max_modulus(f, r).log_value, R, characteristic_T(f, R));
      EXPECT_TRUE(s.holds()) << f.name() << " r=" << r << " R=" << R;
    }
}

TEST(GrowthSandwich, DetectsViolations) {
  EXPECT_FALSE(check_growth_sandwich(10, 5.0, 4.0, 20, 10).lower);
  EXPECT_FALSE(check_growth_sandwich(10, 1.0, 100.0, 20, 2.0).upper);
}

TEST(Hadamard, ConvexityOfLogM) {
  std::vector<RadiusProfile> ps;
  for (double r = 2; r < 200; r *= 1.3) ps.push_back(radius_profile(kSin, r));
  EXPECT_TRUE(hadamard_convex(ps));
  std::vector<RadiusProfile> bad = ps;
  bad[3].log_M += 5.0;
  EXPECT_FALSE(hadamard_convex(bad));
}

TEST(RadiusProfile, FieldsAgreeWithDirectCalls) {
  auto p = radius_profile(kSin, 10.0);
  EXPECT_TRUE(p.ok);
  EXPECT_EQ(p.n0, 7);
  EXPECT_NEAR(p.log_M, std::log(std::sinh(10.0)), 1e-9);
  EXPECT_NEAR(p.T, characteristic_T(kSin, 10.0), 1e-12);
}
