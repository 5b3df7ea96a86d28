#pragma once

// Line-invariance characterization of Fisher information singularity.
//
// The score at lambda = 0 is linearly dependent iff some (alpha, beta) with all
// alpha_i != 0 satisfies sum alpha_i d_i f0 = f0 sum beta_i sin(theta_i); with
// gamma_i = beta_i / alpha_i this is equivalent to
//   h0(theta) = f0(theta) exp(sum gamma_i cos theta_i)
// being constant along every line theta + t alpha. The pipeline below finds
// (alpha, beta) as a numerical null vector of the FIM and then checks the
// invariance of h0 directly, so both sides of the equivalence are exercised.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "torskew/base_density.hpp"
#include "torskew/fisher.hpp"
#include "torskew/skew.hpp"
#include "torskew/torus.hpp"

namespace torskew {

/// log h0(theta) = log f0(theta) + sum_i gamma_i cos theta_i, with unnormalized f0.
inline double h0_log(const BaseDensity& base, std::span<const double> gamma, const AngleVector& theta) {
  if (gamma.size() != base.dim()) throw DomainError("h0_log: gamma must have length d");
  double v = base.log_unnormalized(theta);
  for (std::size_t i = 0; i < gamma.size(); ++i) v += gamma[i] * std::cos(theta[i]);
  return v;
}

struct InvarianceScan {
  double max_deviation = 0.0;
  double worst_t = 0.0;
  AngleVector worst_theta;
  std::size_t t_samples = 0;
  std::size_t theta_samples = 0;
};

/// Scan parameters t: j * 2pi / (T min|alpha_i|) for j = 1..T (one full period of
/// every coordinate line) and j * golden ratio for j = 1..T.
inline std::vector<double> invariance_t_values(std::span<const double> alpha, std::size_t t_count) {
  double amin = std::numeric_limits<double>::infinity();
  for (double a : alpha) amin = std::min(amin, std::abs(a));
  std::vector<double> ts;
  ts.reserve(2 * t_count);
  for (std::size_t j = 1; j <= t_count; ++j) ts.push_back(static_cast<double>(j) * kTwoPi / (static_cast<double>(t_count) * amin));
  for (std::size_t j = 1; j <= t_count; ++j) ts.push_back(static_cast<double>(j) * std::numbers::phi);
  return ts;
}

/// max over scanned (t, theta) of |log h0(theta + t alpha) - log h0(theta)|, with
/// base points theta from a rank-1 lattice.
inline InvarianceScan scan_line_invariance(const BaseDensity& base, std::span<const double> gamma,
                                           std::span<const double> alpha, std::size_t t_count = 64,
                                           std::size_t theta_count = 1021) {
  const std::size_t d = base.dim();
  if (alpha.size() != d || gamma.size() != d) throw DomainError("check_line_invariance: alpha and gamma must have length d");
  for (double a : alpha) {
    if (!(a != 0.0) || !std::isfinite(a)) throw DomainError("check_line_invariance: every alpha_i must be nonzero");
  }
  if (t_count < 16) throw DomainError("check_line_invariance: need at least 16 t values");
  if (theta_count < 256) throw DomainError("check_line_invariance: need at least 256 base points");

  const std::vector<double> ts = invariance_t_values(alpha, t_count);
  const std::vector<AngleVector> thetas = rank1_lattice(d, theta_count);
  InvarianceScan scan;
  scan.t_samples = ts.size();
  scan.theta_samples = thetas.size();
  scan.worst_theta = thetas.front();
  std::vector<double> moved(d);
  for (const AngleVector& theta : thetas) {
    const double ref = h0_log(base, gamma, theta);
    for (double t : ts) {
      for (std::size_t i = 0; i < d; ++i) moved[i] = theta[i] + t * alpha[i];
      const double dev = std::abs(h0_log(base, gamma, AngleVector(moved)) - ref);
      if (dev > scan.max_deviation) {
        scan.max_deviation = dev;
        scan.worst_t = t;
        scan.worst_theta = theta;
      }
    }
  }
  return scan;
}

inline double check_line_invariance(const BaseDensity& base, std::span<const double> gamma,
                                    std::span<const double> alpha, std::size_t t_count = 64,
                                    std::size_t theta_count = 1021) {
  return scan_line_invariance(base, gamma, alpha, t_count, theta_count).max_deviation;
}

struct Certificate {
  std::vector<double> alpha;
  std::vector<double> gamma;      // exponent used in h0
  std::vector<double> raw_ratio;  // beta_i / alpha_i read off the null vector
  double max_invariance_deviation = 0.0;
  std::size_t t_samples = 0;
  std::size_t theta_samples = 0;
  double pointwise_residual = 0.0;  // max |<v, S>| sqrt(f0) over the FIM grid
};

struct Singular {
  Certificate certificate;
  std::vector<double> null_vector;
};

struct NonSingular {
  double min_eigenvalue = 0.0;
  std::size_t grid_n = 0;
};

/// The eigenvalue route and the invariance route disagree.
struct InconsistentEvidence {
  std::size_t null_space_dim = 0;
  std::vector<double> best_alpha;
  double deviation = 0.0;
  std::string reason;
};

using CharacterizationVerdict = std::variant<Singular, NonSingular, InconsistentEvidence>;

inline std::string verdict_name(const CharacterizationVerdict& v) {
  if (std::holds_alternative<Singular>(v)) return "singular";
  if (std::holds_alternative<NonSingular>(v)) return "nonsingular";
  return "inconsistent";
}

struct CharacterizeOptions {
  double eigen_tol = kDefaultEigenTol;
  double invariance_tol = 1e-6;
  double pointwise_tol = 1e-5;
  Mechanism mechanism = SineSkew{};
  std::size_t t_count = 64;
  std::size_t theta_count = 1021;
  ExecPolicy exec{};
};

struct Characterization {
  CharacterizationVerdict verdict;
  FimReport fim;
};

/// FIM -> rank decision -> null vector (alpha, beta) -> gamma = m beta / alpha ->
/// invariance scan of h0. For the power mechanism the skew block of the score is
/// scaled by m, so beta / alpha from its null vector is gamma / m and is rescaled
/// back before building h0.
inline Characterization characterize(const BaseDensity& base, std::size_t grid_n, const CharacterizeOptions& opts = {}) {
  if (grid_n < 64) throw DomainError("characterize: grid_N must be at least 64");
  const std::size_t d = base.dim();
  const double scale = skew_score_scale(opts.mechanism);
  const AngleVector mu = AngleVector::zeros(d);
  FimOptions fim_opts;
  fim_opts.skew_scale = scale;
  fim_opts.exec = opts.exec;
  Characterization out{NonSingular{}, analyze_fim(base, mu, grid_n, opts.eigen_tol, fim_opts)};
  const FimReport& fim = out.fim;

  if (!fim.singular()) {
    out.verdict = NonSingular{fim.min_eigenvalue(), grid_n};
    return out;
  }

  const auto v = find_full_support_null_vector(fim.null_basis, d);
  if (!v) {
    std::vector<double> best(fim.null_basis.front().begin(), fim.null_basis.front().begin() + static_cast<std::ptrdiff_t>(d));
    out.verdict = InconsistentEvidence{fim.null_basis.size(), best, 0.0,
                                       "null space has no vector with all location coefficients nonzero"};
    return out;
  }
  std::vector<double> alpha(v->begin(), v->begin() + static_cast<std::ptrdiff_t>(d));
  std::vector<double> ratio(d), gamma(d);
  for (std::size_t i = 0; i < d; ++i) {
    ratio[i] = (*v)[d + i] / alpha[i];
    gamma[i] = scale * ratio[i];
  }

  const PointwiseCertificate pw = pointwise_certificate(base, mu, *v, grid_n, scale, opts.exec);
  const InvarianceScan scan = scan_line_invariance(base, gamma, alpha, opts.t_count, opts.theta_count);
  if (!(pw.max_weighted <= opts.pointwise_tol)) {
    out.verdict = InconsistentEvidence{fim.null_basis.size(), alpha, scan.max_deviation,
                                       "null vector does not annihilate the score pointwise (residual " +
                                           std::to_string(pw.max_weighted) + ")"};
    return out;
  }
  if (!(scan.max_deviation < opts.invariance_tol)) {
    out.verdict = InconsistentEvidence{fim.null_basis.size(), alpha, scan.max_deviation,
                                       "h0 is not invariant along alpha"};
    return out;
  }
  Certificate cert{alpha, gamma, ratio, scan.max_deviation, scan.t_samples, scan.theta_samples, pw.max_weighted};
  out.verdict = Singular{std::move(cert), *v};
  return out;
}

}  // namespace torskew
