#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace torskew;

TEST(ConstraintMap, AlwaysFeasible) {
  RngStream rng(17, 0);
  for (int k = 0; k < 2000; ++k) {
    std::vector<double> u(3);
    for (double& x : u) x = 10.0 * rng.normal();
    double l1 = 0.0;
    for (double l : lambda_from_unconstrained(u)) l1 += std::abs(l);
    EXPECT_LE(l1, 1.0 + 1e-15);
  }
}

TEST(ConstraintMap, ReachesBoundaryAndInverts) {
  const std::vector<double> u{std::cos(0.3) * kPi / 2.0, std::sin(0.3) * kPi / 2.0};
  const auto lam = lambda_from_unconstrained(u);
  EXPECT_NEAR(std::abs(lam[0]) + std::abs(lam[1]), 1.0, 1e-15);
  for (const std::vector<double>& target :
       {std::vector<double>{0.3, -0.2}, {0.0, 0.0}, {1.0, 0.0}, {-0.5, 0.5}, {0.01, -0.7}}) {
    const auto back = lambda_from_unconstrained(unconstrained_from_lambda(target));
    EXPECT_NEAR(back[0], target[0], 1e-14);
    EXPECT_NEAR(back[1], target[1], 1e-14);
  }
  EXPECT_THROW(unconstrained_from_lambda(std::vector<double>{0.7, 0.7}), ConstraintError);
}

TEST(LogLikelihood, EqualsSumOfLogDensities) {
  const SkewModel m(BaseDensity(fixtures::mvcos3()), AngleVector{0.5, 0.0, -0.5}, {0.3, -0.2, 0.1});
  const auto data = sample(m, 500, 3);
  double ref = 0.0;
  for (const auto& x : data) ref += m.log_density(x);
  EXPECT_NEAR(log_likelihood(m, data), ref, 1e-9 * std::abs(ref));
}

TEST(Fit, RecoversSkewedVonMises) {
  const SkewModel truth(BaseDensity(ProductVonMises{{2.0}}), AngleVector{0.7}, {0.5});
  const auto data = sample(truth, 20000, 5);
  const SkewModel init(truth.base(), circular_mean(data), {0.0});
  const FitResult r = fit_mle(data, init);
  EXPECT_NEAR(r.lambda[0], 0.5, 0.05);
  EXPECT_LT(wrapped_distance(r.mu[0], 0.7), 0.05);
  EXPECT_GE(r.log_likelihood, r.init_log_likelihood);
  EXPECT_TRUE(r.converged);
}

TEST(Fit, RotationEquivariant) {
  const SkewModel truth(BaseDensity(fixtures::sine()), AngleVector{0.0, 0.0}, {0.3, 0.2});
  const auto data = sample(truth, 3000, 8);
  const std::vector<double> shift{1.1, -2.3};
  std::vector<AngleVector> moved;
  for (const auto& x : data) moved.push_back(AngleVector{x[0] + shift[0], x[1] + shift[1]});
  const FitResult a = fit_mle(data, SkewModel(truth.base(), circular_mean(data), {0.0, 0.0}));
  const FitResult b = fit_mle(moved, SkewModel(truth.base(), circular_mean(moved), {0.0, 0.0}));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LT(wrapped_distance(b.mu[i], a.mu[i] + shift[i]), 1e-3);
    EXPECT_NEAR(b.lambda[i], a.lambda[i], 1e-3);
  }
  EXPECT_NEAR(a.log_likelihood, b.log_likelihood, 1e-6 * std::abs(a.log_likelihood));
}

TEST(Fit, FreeConcentrations) {
  const SkewModel truth(BaseDensity(Sine{2.0, 1.0, 0.5}), AngleVector{0.0, 0.0}, {0.2, -0.2});
  const auto data = sample(truth, 5000, 21);
  FitOptions o;
  o.free_concentrations = true;
  const FitResult r = fit_mle(data, SkewModel(BaseDensity(Sine{1.0, 1.0, 0.0}), circular_mean(data), {0.0, 0.0}), o);
  ASSERT_TRUE(r.concentrations.has_value());
  const auto& s = std::get<Sine>(*r.concentrations);
  EXPECT_NEAR(s.kappa1, 2.0, 0.25);
  EXPECT_NEAR(s.kappa2, 1.0, 0.25);
  EXPECT_NEAR(s.beta, 0.5, 0.25);
}

TEST(Fit, DegenerateDataRejected) {
  const std::vector<AngleVector> data(50, AngleVector{0.3, 0.3});
  FitOptions o;
  o.free_concentrations = true;
  EXPECT_THROW(fit_mle(data, SkewModel(BaseDensity(fixtures::sine()), AngleVector{0.0, 0.0}, {0.0, 0.0}), o),
               DomainError);
}

TEST(Fit, BoundaryEstimateIsFeasible) {
  // All mass on one side of mu forces lambda to the boundary.
  std::vector<AngleVector> data;
  RngStream rng(2, 2);
  for (int k = 0; k < 400; ++k) data.push_back(AngleVector{0.3 + 2.5 * rng.uniform()});
  const FitResult r = fit_mle(data, SkewModel(BaseDensity(ProductVonMises{{0.2}}), AngleVector{0.0}, {0.0}));
  EXPECT_LE(std::abs(r.lambda[0]), 1.0);
  EXPECT_GT(r.lambda[0], 0.9);
}

TEST(Fit, MaximumBeatsTruth) {
  const SkewModel truth(BaseDensity(fixtures::cosine()), AngleVector{0.0, 0.0}, {0.0, 0.0});
  const auto data = sample(truth, 10000, 41);
  const FitResult r = fit_mle(data, SkewModel(truth.base(), circular_mean(data), {0.0, 0.0}));
  EXPECT_GE(r.log_likelihood, log_likelihood(truth, data));
  EXPECT_LT(std::abs(r.lambda[0]) + std::abs(r.lambda[1]), 0.5);
}

TEST(Fit, DegenerateDataWithFixedConcentrations) {
  const std::vector<AngleVector> data(50, AngleVector{0.3, 0.3});
  const FitResult r = fit_mle(data, SkewModel(BaseDensity(fixtures::sine()), AngleVector{0.0, 0.0}, {0.0, 0.0}));
  EXPECT_TRUE(r.converged);
  EXPECT_GE(r.log_likelihood, r.init_log_likelihood);
}

TEST(Fit, VonMisesSkewRecoveredAcrossReplications) {
  const SkewModel truth(BaseDensity(ProductVonMises{{1.0}}), AngleVector{0.0}, {0.5});
  std::size_t close = 0;
  const std::size_t reps = 200;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    const auto data = sample(truth, 10000, replication_seed(9, 0, rep));
    const FitResult r = fit_mle(data, SkewModel(truth.base(), circular_mean(data), {0.0}));
    close += std::abs(r.lambda[0] - 0.5) <= 0.1 ? 1 : 0;
  }
  EXPECT_GE(close, 190u);
}

TEST(RateExperiment, MomentEstimatorHasRootNRate) {
  // Uniform base on the circle: E[sin t] = lambda / 2.
  const SkewModel truth(BaseDensity(ProductVonMises{{0.0}}), AngleVector{0.0}, {0.0});
  auto moment = [](const std::vector<AngleVector>& data, const SkewModel& t) {
    double s = 0.0;
    for (const auto& x : data) s += std::sin(x[0]);
    return Estimate{t.mu().values(), {2.0 * s / static_cast<double>(data.size())}};
  };
  const RateTable t = rate_experiment(truth, {100, 400, 1600, 6400}, 200, 77, moment);
  EXPECT_GE(t.fitted_slope_lambda, -0.6);
  EXPECT_LE(t.fitted_slope_lambda, -0.4);
  for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LE(t.rows[i].rmse_lambda, 1.1 * t.rows[i - 1].rmse_lambda);
  EXPECT_EQ(t.rows.front().replications, 200u);
  EXPECT_EQ(t.seed, 77u);
}

TEST(RateExperiment, ValidatesDesign) {
  const SkewModel truth(BaseDensity(ProductVonMises{{1.0}}), AngleVector{0.0}, {0.0});
  auto est = [](const std::vector<AngleVector>&, const SkewModel& t) { return Estimate{t.mu().values(), t.lambda()}; };
  EXPECT_THROW(rate_experiment(truth, {100, 1000}, 200, 1, est), DomainError);
  EXPECT_THROW(rate_experiment(truth, {100, 100, 10000}, 200, 1, est), DomainError);
  EXPECT_THROW(rate_experiment(truth, {100, 200, 400}, 200, 1, est), DomainError);
  EXPECT_THROW(rate_experiment(truth, {100, 1000, 10000}, 50, 1, est), DomainError);
  auto failing = [](const std::vector<AngleVector>&, const SkewModel&) -> Estimate { throw AccuracyError("no"); };
  EXPECT_THROW(rate_experiment(truth, {10, 100, 1000}, 200, 1, failing), ExperimentError);
}

TEST(RateExperiment, SeedsAreDistinct) {
  EXPECT_NE(replication_seed(1, 0, 0), replication_seed(1, 0, 1));
  EXPECT_NE(replication_seed(1, 0, 0), replication_seed(1, 1, 0));
  EXPECT_NE(replication_seed(1, 0, 0), replication_seed(2, 0, 0));
  EXPECT_EQ(replication_seed(5, 2, 3), replication_seed(5, 2, 3));
  const std::vector<double> x{10.0, 100.0, 1000.0}, y{1.0, 0.1, 0.01};
  EXPECT_NEAR(log_log_slope(x, y), -1.0, 1e-14);
}
