#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace torskew;

namespace {

Characterization run(const Family& f, Mechanism mech = SineSkew{}) {
  CharacterizeOptions o;
  o.mechanism = mech;
  return characterize(BaseDensity(f), 64, o);
}

}  // namespace

TEST(H0, SineWitnessAtQuarterPeriod) {
  // gamma = -kappa leaves exp(beta sin t1 sin t2); shifting both angles by pi/2 turns it into
  // exp(beta cos t1 cos t2).
  const BaseDensity b(fixtures::sine());
  const std::vector<double> gamma{-1.0, -1.0};
  const AngleVector theta{0.0, 0.0}, moved{kPi / 2.0, kPi / 2.0};
  EXPECT_NEAR(h0_log(b, gamma, theta), 0.0, 1e-15);
  EXPECT_NEAR(h0_log(b, gamma, moved), 0.9, 1e-15);
  const std::vector<double> alpha{1.0, 1.0};
  EXPECT_GE(check_line_invariance(b, gamma, alpha), 0.85);
}

TEST(H0, CosineInvariantAlongDiagonal) {
  const BaseDensity b(fixtures::cosine());
  const std::vector<double> gamma{-1.0, -1.0}, alpha{1.0, 1.0};
  EXPECT_LE(check_line_invariance(b, gamma, alpha), 1e-12);
  const std::vector<double> scaled{3.5, 3.5};
  EXPECT_LE(check_line_invariance(b, gamma, scaled), 1e-12);
  const std::vector<double> other{1.0, -1.0};
  EXPECT_GT(check_line_invariance(b, gamma, other), 0.1);
}

TEST(H0, ScanRejectsDegenerateInput) {
  const BaseDensity b(fixtures::cosine());
  const std::vector<double> gamma{-1.0, -1.0};
  EXPECT_THROW(check_line_invariance(b, gamma, std::vector<double>{1.0, 0.0}), DomainError);
  EXPECT_THROW(check_line_invariance(b, gamma, std::vector<double>{1.0, 1.0}, 8), DomainError);
  EXPECT_THROW(check_line_invariance(b, gamma, std::vector<double>{1.0, 1.0}, 64, 100), DomainError);
  EXPECT_EQ(invariance_t_values(std::vector<double>{0.5, 2.0}, 16).size(), 32u);
}

TEST(Characterize, ProductVonMisesSingular) {
  const auto c = run(fixtures::pvm2());
  ASSERT_EQ(verdict_name(c.verdict), "singular");
  const auto& s = std::get<Singular>(c.verdict);
  EXPECT_NEAR(s.certificate.gamma[0], -1.0, 1e-6);
  EXPECT_NEAR(s.certificate.gamma[1], -2.0, 1e-6);
  EXPECT_EQ(c.fim.null_basis.size(), 2u);
  EXPECT_EQ(verdict_name(run(fixtures::pvm3()).verdict), "singular");
}

TEST(Characterize, SineNonSingular) {
  const auto c = run(fixtures::sine());
  ASSERT_EQ(verdict_name(c.verdict), "nonsingular");
  EXPECT_GT(std::get<NonSingular>(c.verdict).min_eigenvalue, 1e-3);
}

TEST(Characterize, CosineNullVector) {
  const auto c = run(fixtures::cosine());
  ASSERT_EQ(verdict_name(c.verdict), "singular");
  const auto& s = std::get<Singular>(c.verdict);
  const double ref[4] = {0.5, 0.5, -0.5, -0.5};
  double dot = 0.0;
  for (int i = 0; i < 4; ++i) dot += ref[i] * s.null_vector[i];
  EXPECT_GT(dot, 1.0 - 1e-6);
  EXPECT_LT(s.certificate.max_invariance_deviation, 1e-6);
  EXPECT_LT(s.certificate.pointwise_residual, 1e-5);
}

TEST(Characterize, GammaIsScaleInvariant) {
  // kappa and beta scaled together: alpha stays on the diagonal and gamma = -kappa.
  const auto c = run(Cosine{2.5, 2.5, 1.25});
  ASSERT_EQ(verdict_name(c.verdict), "singular");
  const auto& s = std::get<Singular>(c.verdict);
  EXPECT_NEAR(s.certificate.gamma[0], -2.5, 1e-6);
  EXPECT_NEAR(s.certificate.alpha[0] / s.certificate.alpha[1], 1.0, 1e-6);
}

TEST(Characterize, MultivariateFamilies) {
  EXPECT_EQ(verdict_name(run(fixtures::mvsine3()).verdict), "nonsingular");
  const auto c = run(fixtures::mvcos3());
  ASSERT_EQ(verdict_name(c.verdict), "singular");
  const auto& a = std::get<Singular>(c.verdict).certificate.alpha;
  EXPECT_NEAR(a[1] / a[0], 1.0, 1e-6);
  EXPECT_NEAR(a[2] / a[0], 1.0, 1e-6);
}

TEST(Characterize, WrappedCauchyNonSingular) {
  for (const auto& f : {fixtures::bwc_a(), fixtures::bwc_b(), fixtures::bwc_c()}) {
    EXPECT_EQ(verdict_name(run(f).verdict), "nonsingular");
  }
}

TEST(Characterize, MechanismTransfer) {
  for (const auto& f : fixtures::all()) {
    EXPECT_EQ(verdict_name(run(f.family).verdict), verdict_name(run(f.family, ProductSkew{}).verdict)) << f.name;
  }
  const auto c = run(fixtures::cosine(), PowerSkew{3});
  ASSERT_EQ(verdict_name(c.verdict), "singular");
  const auto& cert = std::get<Singular>(c.verdict).certificate;
  EXPECT_NEAR(cert.raw_ratio[0], -1.0 / 3.0, 1e-6);
  EXPECT_NEAR(cert.gamma[0], -1.0, 1e-6);
  EXPECT_LT(cert.max_invariance_deviation, 1e-6);
}

TEST(Characterize, LooseToleranceYieldsInconsistentEvidence) {
  CharacterizeOptions o;
  o.eigen_tol = 0.5;
  const auto c = characterize(BaseDensity(fixtures::sine()), 64, o);
  EXPECT_EQ(verdict_name(c.verdict), "inconsistent");
  EXPECT_FALSE(std::get<InconsistentEvidence>(c.verdict).reason.empty());
  EXPECT_THROW(characterize(BaseDensity(fixtures::sine()), 32), DomainError);
}
