#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace torskew;

namespace {

double skewed_integral(const SkewModel& m, std::size_t n) {
  return fixtures::grid_integral(m.dim(), n, [&](const std::vector<double>& t) { return m.density(AngleVector(t)); });
}

}  // namespace

TEST(SkewValidate, SumConstraint) {
  const auto v = validate(2, {0.6, 0.5}, SineSkew{});
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(v->constraint, "sum |lambda_j| <= 1");
  EXPECT_NEAR(v->value, 1.1, 1e-15);
  EXPECT_FALSE(validate(2, {0.5, -0.5}, SineSkew{}).has_value());
  EXPECT_FALSE(validate(2, {0.9, 0.9}, ProductSkew{}).has_value());
  EXPECT_TRUE(validate(2, {1.1, 0.0}, ProductSkew{}).has_value());
  EXPECT_TRUE(validate(3, {0.1, 0.1, 0.1}, PowerSkew{2}).has_value());
  EXPECT_TRUE(validate(2, {0.1, 0.1}, PowerSkew{0}).has_value());
  EXPECT_TRUE(validate(2, {0.1}, SineSkew{}).has_value());
}

TEST(SkewModel, ConstructionEnforcesConstraint) {
  EXPECT_THROW(SkewModel(BaseDensity(fixtures::sine()), AngleVector{0.0, 0.0}, {0.6, 0.5}), ConstraintError);
  EXPECT_THROW(SkewModel(BaseDensity(fixtures::sine()), AngleVector{0.0}, {0.1, 0.1}), DomainError);
}

TEST(SineSkew, FactorIsOddAroundOne) {
  const SkewModel m(BaseDensity(fixtures::cosine()), AngleVector{0.3, -1.0}, {0.4, -0.5});
  RngStream rng(4, 4);
  for (int k = 0; k < 100; ++k) {
    const double a = rng.angle(), b = rng.angle();
    const AngleVector p{0.3 + a, -1.0 + b}, q{0.3 - a, -1.0 - b};
    EXPECT_NEAR(m.skew_factor(p) + m.skew_factor(q), 2.0, 1e-12);
    EXPECT_GE(m.skew_factor(p), 0.0);
  }
}

TEST(SineSkew, NeedsNoNormalizer) {
  const SkewModel m(BaseDensity(fixtures::mvsine3()), AngleVector{1.0, 2.0, -3.0}, {0.3, -0.3, 0.4});
  EXPECT_EQ(m.log_mechanism_constant(), 0.0);
  EXPECT_NEAR(skewed_integral(m, 48), 1.0, 1e-9);
}

TEST(ProductSkew, NormalizedByQuadrature) {
  const SkewModel m(BaseDensity(fixtures::cosine()), AngleVector{0.0, 0.0}, {0.8, 0.7}, ProductSkew{});
  EXPECT_NE(m.log_mechanism_constant(), 0.0);
  EXPECT_NEAR(skewed_integral(m, 160), 1.0, 1e-9);
  const SkewModel z(BaseDensity(fixtures::cosine()), AngleVector{0.0, 0.0}, {0.0, 0.0}, ProductSkew{});
  EXPECT_EQ(z.log_mechanism_constant(), 0.0);
}

TEST(PowerSkew, FirstPowerEqualsSineSkew) {
  const BaseDensity b(fixtures::sine());
  const SkewModel sine(b, AngleVector{0.2, 0.1}, {0.3, 0.4}, SineSkew{});
  const SkewModel power(b, AngleVector{0.2, 0.1}, {0.3, 0.4}, PowerSkew{1});
  RngStream rng(8, 8);
  for (int k = 0; k < 50; ++k) {
    const AngleVector p{rng.angle(), rng.angle()};
    EXPECT_NEAR(power.log_density(p), sine.log_density(p), 1e-9);
  }
}

TEST(PowerSkew, HigherPowerIntegratesToOne) {
  const SkewModel m(BaseDensity(fixtures::cosine()), AngleVector{0.0, 0.0}, {0.5, -0.4}, PowerSkew{3});
  EXPECT_NEAR(skewed_integral(m, 160), 1.0, 1e-9);
}

TEST(SkewModel, ZeroFactorGivesMinusInfinity) {
  const SkewModel m(BaseDensity(ProductVonMises{{1.0}}), AngleVector{0.0}, {1.0});
  EXPECT_EQ(m.log_density(AngleVector{-kPi / 2.0}), -std::numeric_limits<double>::infinity());
}

TEST(Sampling, MomentsMatchQuadrature) {
  const SkewModel m(BaseDensity(Sine{2.0, 1.0, 0.5}), AngleVector{0.5, -1.0}, {0.4, -0.3});
  const std::size_t n = 40000;
  const auto draws = sample(m, n, 123);
  ASSERT_EQ(draws.size(), n);
  for (std::size_t j = 0; j < 2; ++j) {
    for (int which = 0; which < 2; ++which) {
      auto g = [&](const AngleVector& t) {
        const double r = t[j] - m.mu()[j];
        return which == 0 ? std::sin(r) : std::cos(r);
      };
      const double e1 = fixtures::grid_integral(2, 128, [&](const std::vector<double>& t) {
        const AngleVector a(t);
        return g(a) * m.density(a);
      });
      const double e2 = fixtures::grid_integral(2, 128, [&](const std::vector<double>& t) {
        const AngleVector a(t);
        return g(a) * g(a) * m.density(a);
      });
      double mean = 0.0;
      for (const auto& x : draws) mean += g(x);
      mean /= static_cast<double>(n);
      const double se = std::sqrt((e2 - e1 * e1) / static_cast<double>(n));
      EXPECT_LT(std::abs(mean - e1), 4.0 * se) << "coordinate " << j << (which ? " cos" : " sin");
    }
  }
}

TEST(Sampling, IndependentOfThreadCount) {
  const SkewModel m(BaseDensity(fixtures::mvcos3()), AngleVector{0.0, 1.0, 2.0}, {0.2, 0.2, -0.2});
  SampleOptions one, many;
  one.exec.threads = 1;
  many.exec.threads = 4;
  const auto a = sample(m, 10000, 99, one);
  const auto b = sample(m, 10000, 99, many);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ(a[k], b[k]);
  const auto c = sample(m, 10000, 100, one);
  EXPECT_FALSE(a[0] == c[0] && a[1] == c[1]);
}

TEST(Sampling, UnderestimatedEnvelopeIsReported) {
  const SkewModel m(BaseDensity(ProductVonMises{{4.0, 4.0}}), AngleVector{0.0, 0.0}, {0.0, 0.0});
  SampleOptions o;
  o.envelope_safety = 0.2;
  EXPECT_THROW(sample(m, 1000, 1, o), EnvelopeError);
  EXPECT_THROW(sample(m, 0, 1), DomainError);
}

TEST(SkewModel, ZeroLambdaIsBaseDensity) {
  const BaseDensity b(fixtures::mvcos3());
  const SkewModel m(b, AngleVector{0.1, 0.2, 0.3}, {0.0, 0.0, 0.0});
  RngStream rng(6, 6);
  for (int k = 0; k < 20; ++k) {
    const AngleVector p{rng.angle(), rng.angle(), rng.angle()};
    EXPECT_DOUBLE_EQ(m.log_density(p), b.log_density(angle_diff(p, m.mu())));
  }
}

TEST(SkewModel, NegatedLambdaReflectsThroughMu) {
  const BaseDensity b(fixtures::sine());
  const AngleVector mu{0.7, -2.0};
  for (const Mechanism& mech : std::vector<Mechanism>{SineSkew{}, ProductSkew{}, PowerSkew{2}}) {
    const SkewModel pos(b, mu, {0.3, -0.4}, mech), neg(b, mu, {-0.3, 0.4}, mech);
    const TorusGrid g(2, 32);
    for (double a : g.axis())
      for (double c : g.axis()) {
        const AngleVector plus{mu[0] + a, mu[1] + c}, minus{mu[0] - a, mu[1] - c};
        EXPECT_NEAR(pos.log_density(plus), neg.log_density(minus), 1e-12) << mechanism_name(mech);
      }
  }
}

TEST(Sampling, UniformBaseHasSmallResultant) {
  const SkewModel m(BaseDensity(ProductVonMises{{0.0, 0.0}}), AngleVector{0.0, 0.0}, {0.0, 0.0});
  const std::size_t n = 50000;
  const auto draws = sample(m, n, 31);
  for (std::size_t j = 0; j < 2; ++j) {
    double s = 0.0, c = 0.0;
    for (const auto& x : draws) {
      s += std::sin(x[j]);
      c += std::cos(x[j]);
    }
    EXPECT_LT(std::hypot(s, c) / static_cast<double>(n), 3.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST(Sampling, LocationEquivariant) {
  const BaseDensity b(fixtures::cosine());
  const SkewModel centred(b, AngleVector{0.0, 0.0}, {0.3, -0.2});
  const SkewModel moved(b, AngleVector{2.0, -1.0}, {0.3, -0.2});
  const auto a = sample(centred, 5000, 12);
  const auto c = sample(moved, 5000, 12);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_LT(wrapped_distance(c[k][0], a[k][0] + 2.0), 1e-12);
    EXPECT_LT(wrapped_distance(c[k][1], a[k][1] - 1.0), 1e-12);
  }
}

TEST(Sampling, SkewedVonMisesMeanSine) {
  const SkewModel m(BaseDensity(ProductVonMises{{1.0}}), AngleVector{0.0}, {0.8});
  const std::size_t n = 100000;
  const auto draws = sample(m, n, 77);
  const double e1 = fixtures::grid_integral(1, 256, [&](const std::vector<double>& t) {
    return std::sin(t[0]) * m.density(AngleVector(t));
  });
  const double e2 = fixtures::grid_integral(1, 256, [&](const std::vector<double>& t) {
    return std::sin(t[0]) * std::sin(t[0]) * m.density(AngleVector(t));
  });
  double mean = 0.0;
  for (const auto& x : draws) mean += std::sin(x[0]);
  mean /= static_cast<double>(n);
  EXPECT_LT(std::abs(mean - e1), 4.0 * std::sqrt((e2 - e1 * e1) / static_cast<double>(n)));
}
