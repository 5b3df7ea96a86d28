#pragma once

// Score at the vicinity of symmetry (lambda = 0), Fisher information by grid
// quadrature, and eigenvalue-based singularity diagnostics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "torskew/base_density.hpp"
#include "torskew/errors.hpp"
#include "torskew/torus.hpp"

namespace torskew {

/// Score of the skewed model at lambda = 0. `location` is -d/dtheta log f0(theta - mu)
/// (equivalently d/dmu), `skew` is sin(theta - mu) times the mechanism scale.
struct ScoreVector {
  std::vector<double> location;
  std::vector<double> skew;

  std::vector<double> concat() const {
    std::vector<double> out(location);
    out.insert(out.end(), skew.begin(), skew.end());
    return out;
  }
};

inline ScoreVector score_at_symmetry(const BaseDensity& base, const AngleVector& mu, const AngleVector& theta,
                                     double skew_scale = 1.0) {
  if (mu.dim() != base.dim() || theta.dim() != base.dim()) throw DomainError("score_at_symmetry: dimension mismatch");
  const AngleVector rel = angle_diff(theta, mu);
  std::vector<double> g = base.grad_log(rel);
  ScoreVector out;
  out.location.resize(base.dim());
  out.skew.resize(base.dim());
  for (std::size_t i = 0; i < base.dim(); ++i) {
    out.location[i] = -g[i];
    out.skew[i] = skew_scale * std::sin(rel[i]);
  }
  return out;
}

struct FimReport {
  Eigen::MatrixXd matrix;
  std::vector<double> eigenvalues;  // ascending
  std::size_t numerical_rank = 0;
  std::vector<std::vector<double>> null_basis;  // orthonormal
  std::size_t grid_n = 0;
  double tol_used = 0.0;
  std::optional<double> doubling_change;  // max |I(N) - I(2N)| entrywise, when requested

  double min_eigenvalue() const { return eigenvalues.empty() ? 0.0 : eigenvalues.front(); }
  double max_eigenvalue() const { return eigenvalues.empty() ? 0.0 : eigenvalues.back(); }
  bool singular() const { return numerical_rank < static_cast<std::size_t>(matrix.rows()); }
};

struct FimOptions {
  double skew_scale = 1.0;  // m for the power mechanism
  bool check_doubling = false;
  ExecPolicy exec{};
};

namespace detail {

inline Eigen::MatrixXd assemble_fim(const BaseDensity& base, const AngleVector& mu, std::size_t grid_n,
                                    double skew_scale, ExecPolicy exec) {
  const std::size_t d = base.dim();
  const std::size_t p = 2 * d;
  const TorusGrid grid(d, grid_n);
  const AxisTrig trig(grid, mu.coords());
  const double log_c = base.log_constant();
  const double w = grid.weight();
  using Acc = std::vector<CompensatedSum>;
  const Acc acc = base.visit([&](const auto& fam) {
    return grid.reduce<Acc>(
        exec, [&] { return Acc(p * (p + 1) / 2); },
        [&](Acc& a, std::span<const std::size_t> idx) {
          Scratch s{}, c{}, g{};
          std::array<double, 2 * kMaxDim> score{};
          trig.load(idx, s, c);
          const double f = w * std::exp(fam.log_unnormalized(s.data(), c.data()) + log_c);
          fam.grad_log(s.data(), c.data(), g.data());
          for (std::size_t i = 0; i < d; ++i) {
            score[i] = -g[i];
            score[d + i] = skew_scale * s[i];
          }
          std::size_t k = 0;
          for (std::size_t i = 0; i < p; ++i) {
            const double fi = f * score[i];
            for (std::size_t j = i; j < p; ++j) a[k++].add(fi * score[j]);
          }
        },
        [](Acc& a, const Acc& b) {
          for (std::size_t k = 0; k < a.size(); ++k) a[k].merge(b[k]);
        });
  });
  Eigen::MatrixXd m(p, p);
  std::size_t k = 0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      m(i, j) = acc[k].value();
      m(j, i) = m(i, j);
      ++k;
    }
  }
  return m;
}

}  // namespace detail

/// Fisher information E[S S'] at lambda = 0 by uniform-grid quadrature.
/// Only `matrix`, `grid_n` and (optionally) `doubling_change` are filled in.
inline FimReport fim_at_symmetry(const BaseDensity& base, const AngleVector& mu, std::size_t grid_n,
                                 const FimOptions& opts = {}) {
  if (grid_n < 32) throw DomainError("fim_at_symmetry: grid_N must be at least 32");
  FimReport report;
  report.matrix = detail::assemble_fim(base, mu, grid_n, opts.skew_scale, opts.exec);
  report.grid_n = grid_n;
  if (opts.check_doubling) {
    const Eigen::MatrixXd fine = detail::assemble_fim(base, mu, 2 * grid_n, opts.skew_scale, opts.exec);
    report.doubling_change = (fine - report.matrix).cwiseAbs().maxCoeff();
  }
  return report;
}

inline constexpr double kDefaultEigenTol = 1e-8;

/// Eigendecomposition, numerical rank and orthonormal null basis of a symmetric matrix.
/// rank = #{eigenvalue > tol_rel * max eigenvalue}.
inline FimReport diagnose(const Eigen::MatrixXd& matrix, double tol_rel = kDefaultEigenTol) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) throw DomainError("diagnose: matrix must be square");
  if (!(tol_rel > 0.0)) throw DomainError("diagnose: tol_rel must be positive");
  const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, matrix.cwiseAbs().maxCoeff())) throw DomainError("diagnose: matrix not symmetric");

  FimReport report;
  report.matrix = 0.5 * (matrix + matrix.transpose());
  report.tol_used = tol_rel;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(report.matrix);
  if (eig.info() != Eigen::Success) throw AccuracyError("diagnose: eigensolver failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double lmax = values.maxCoeff();
  if (!(lmax > 0.0)) throw DomainError("diagnose: degenerate matrix (largest eigenvalue <= 0)");
  report.eigenvalues.assign(values.data(), values.data() + values.size());
  const double cut = tol_rel * lmax;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) > cut) {
      ++report.numerical_rank;
    } else {
      const Eigen::VectorXd v = eig.eigenvectors().col(i);
      report.null_basis.emplace_back(v.data(), v.data() + v.size());
    }
  }
  return report;
}

/// fim_at_symmetry followed by diagnose, keeping grid metadata.
inline FimReport analyze_fim(const BaseDensity& base, const AngleVector& mu, std::size_t grid_n,
                             double tol_rel = kDefaultEigenTol, const FimOptions& opts = {}) {
  const FimReport raw = fim_at_symmetry(base, mu, grid_n, opts);
  FimReport report = diagnose(raw.matrix, tol_rel);
  report.grid_n = raw.grid_n;
  report.doubling_change = raw.doubling_change;
  return report;
}

/// Searches span(null_basis) for a unit vector whose first d components (the
/// location coefficients alpha) are all clearly nonzero: min |alpha_i| > ratio * |alpha|.
/// Tries the basis vectors, then deterministic random combinations. The sign is
/// fixed so that alpha_1 > 0.
inline std::optional<std::vector<double>> find_full_support_null_vector(
    const std::vector<std::vector<double>>& null_basis, std::size_t d, double ratio = 1e-3, int attempts = 1000) {
  if (null_basis.empty()) return std::nullopt;
  const std::size_t p = null_basis.front().size();
  auto accept = [&](std::vector<double> v) -> std::optional<std::vector<double>> {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return std::nullopt;
    for (double& x : v) x /= norm;
    double alpha_norm = 0.0;
    double alpha_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < d; ++i) {
      alpha_norm += v[i] * v[i];
      alpha_min = std::min(alpha_min, std::abs(v[i]));
    }
    alpha_norm = std::sqrt(alpha_norm);
    if (!(alpha_norm > 0.0) || !(alpha_min > ratio * alpha_norm)) return std::nullopt;
    if (v[0] < 0.0) {
      for (double& x : v) x = -x;
    }
    return v;
  };
  for (const auto& b : null_basis) {
    if (auto v = accept(b)) return v;
  }
  RngStream rng(0x6e756c6cULL, null_basis.size());
  for (int a = 0; a < attempts; ++a) {
    std::vector<double> v(p, 0.0);
    for (const auto& b : null_basis) {
      const double w = rng.normal();
      for (std::size_t k = 0; k < p; ++k) v[k] += w * b[k];
    }
    if (auto ok = accept(std::move(v))) return ok;
  }
  return std::nullopt;
}

/// Largest deviation of <v, S(theta)> from zero over the grid, unweighted and
/// weighted by sqrt(f0). A true singularity annihilates the score pointwise.
struct PointwiseCertificate {
  double max_abs = 0.0;
  double max_weighted = 0.0;
  std::size_t grid_n = 0;
};

inline PointwiseCertificate pointwise_certificate(const BaseDensity& base, const AngleVector& mu,
                                                  std::span<const double> v, std::size_t grid_n,
                                                  double skew_scale = 1.0, ExecPolicy exec = {}) {
  const std::size_t d = base.dim();
  if (v.size() != 2 * d) throw DomainError("pointwise_certificate: vector must have length 2d");
  const TorusGrid grid(d, grid_n);
  const AxisTrig trig(grid, mu.coords());
  const double log_c = base.log_constant();
  struct Acc {
    double max_abs = 0.0;
    double max_weighted = 0.0;
  };
  const Acc acc = base.visit([&](const auto& fam) {
    return grid.reduce<Acc>(
        exec, [] { return Acc{}; },
        [&](Acc& a, std::span<const std::size_t> idx) {
          Scratch s{}, c{}, g{};
          trig.load(idx, s, c);
          fam.grad_log(s.data(), c.data(), g.data());
          double dot = 0.0;
          for (std::size_t i = 0; i < d; ++i) dot += v[i] * (-g[i]) + v[d + i] * skew_scale * s[i];
          const double f = std::exp(fam.log_unnormalized(s.data(), c.data()) + log_c);
          a.max_abs = std::max(a.max_abs, std::abs(dot));
          a.max_weighted = std::max(a.max_weighted, std::abs(dot) * std::sqrt(f));
        },
        [](Acc& a, const Acc& b) {
          a.max_abs = std::max(a.max_abs, b.max_abs);
          a.max_weighted = std::max(a.max_weighted, b.max_weighted);
        });
  });
  return {acc.max_abs, acc.max_weighted, grid_n};
}

}  // namespace torskew
