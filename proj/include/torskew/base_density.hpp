#pragma once

// Symmetric base densities on the torus. Every family is written as a function
// of (sin theta_i, cos theta_i) so that grid loops and likelihood sweeps can
// reuse precomputed trigonometric values.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "torskew/bessel.hpp"
#include "torskew/errors.hpp"
#include "torskew/torus.hpp"

namespace torskew {

namespace detail {

inline void require_finite(double x, std::string_view what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + ": must be finite");
}

inline void require_dim(std::size_t d, std::string_view what) {
  if (d == 0 || d > kMaxDim) {
    throw DomainError(std::string(what) + ": dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  }
}

// Row-major d x d, symmetric, zero diagonal.
inline void require_coupling_matrix(const std::vector<double>& m, std::size_t d, std::string_view what) {
  if (m.size() != d * d) {
    throw DomainError(std::string(what) + ": expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (m[i * d + i] != 0.0) throw DomainError(std::string(what) + ": diagonal must be zero");
    for (std::size_t j = 0; j < d; ++j) {
      require_finite(m[i * d + j], what);
      if (m[i * d + j] != m[j * d + i]) throw DomainError(std::string(what) + ": matrix must be symmetric");
    }
  }
}

}  // namespace detail

/// f ∝ exp(sum_i kappa_i cos theta_i)
struct ProductVonMises {
  static constexpr std::string_view kName = "product_von_mises";
  std::vector<double> kappa;

  std::size_t dim() const { return kappa.size(); }
  void validate() const {
    detail::require_dim(dim(), "product_von_mises");
    for (double k : kappa) {
      detail::require_finite(k, "product_von_mises.kappa");
      if (k < 0.0) throw DomainError("product_von_mises.kappa: must be non-negative");
    }
  }
  double log_unnormalized(const double* s, const double* c) const {
    (void)s;
    double v = 0.0;
    for (std::size_t i = 0; i < kappa.size(); ++i) v += kappa[i] * c[i];
    return v;
  }
  void grad_log(const double* s, const double* c, double* out) const {
    (void)c;
    for (std::size_t i = 0; i < kappa.size(); ++i) out[i] = -kappa[i] * s[i];
  }
};

/// f ∝ exp(kappa1 cos t1 + kappa2 cos t2 + beta sin t1 sin t2)
struct Sine {
  static constexpr std::string_view kName = "sine";
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double beta = 0.0;

  std::size_t dim() const { return 2; }
  void validate() const {
    detail::require_finite(kappa1, "sine.kappa1");
    detail::require_finite(kappa2, "sine.kappa2");
    detail::require_finite(beta, "sine.beta");
    if (kappa1 < 0.0 || kappa2 < 0.0) throw DomainError("sine: kappa1, kappa2 must be non-negative");
  }
  double log_unnormalized(const double* s, const double* c) const {
    return kappa1 * c[0] + kappa2 * c[1] + beta * s[0] * s[1];
  }
  void grad_log(const double* s, const double* c, double* out) const {
    out[0] = -kappa1 * s[0] + beta * c[0] * s[1];
    out[1] = -kappa2 * s[1] + beta * s[0] * c[1];
  }
};

/// f ∝ exp(kappa1 cos t1 + kappa2 cos t2 + beta cos(t1 - t2))
struct Cosine {
  static constexpr std::string_view kName = "cosine";
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double beta = 0.0;

  std::size_t dim() const { return 2; }
  void validate() const {
    detail::require_finite(kappa1, "cosine.kappa1");
    detail::require_finite(kappa2, "cosine.kappa2");
    detail::require_finite(beta, "cosine.beta");
    if (kappa1 < 0.0 || kappa2 < 0.0) throw DomainError("cosine: kappa1, kappa2 must be non-negative");
  }
  double log_unnormalized(const double* s, const double* c) const {
    return kappa1 * c[0] + kappa2 * c[1] + beta * (c[0] * c[1] + s[0] * s[1]);
  }
  void grad_log(const double* s, const double* c, double* out) const {
    const double sin_diff = s[0] * c[1] - c[0] * s[1];
    out[0] = -kappa1 * s[0] - beta * sin_diff;
    out[1] = -kappa2 * s[1] + beta * sin_diff;
  }
};

/// f ∝ exp(kappa' c(t) + 1/2 s(t)' Lambda s(t)), Lambda symmetric with zero diagonal.
struct MultivariateSine {
  static constexpr std::string_view kName = "multivariate_sine";
  std::vector<double> kappa;
  std::vector<double> lambda;  // row-major d x d

  std::size_t dim() const { return kappa.size(); }
  void validate() const {
    detail::require_dim(dim(), "multivariate_sine");
    for (double k : kappa) detail::require_finite(k, "multivariate_sine.kappa");
    detail::require_coupling_matrix(lambda, dim(), "multivariate_sine.Lambda");
  }
  double log_unnormalized(const double* s, const double* c) const {
    const std::size_t d = dim();
    double v = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      v += kappa[i] * c[i];
      for (std::size_t j = i + 1; j < d; ++j) v += lambda[i * d + j] * s[i] * s[j];
    }
    return v;
  }
  void grad_log(const double* s, const double* c, double* out) const {
    const std::size_t d = dim();
    for (std::size_t i = 0; i < d; ++i) {
      double coupling = 0.0;
      for (std::size_t j = 0; j < d; ++j) coupling += lambda[i * d + j] * s[j];
      out[i] = -kappa[i] * s[i] + c[i] * coupling;
    }
  }
};

/// f ∝ exp(kappa' c(t) - s' Delta s - c' Delta c), evaluated in the equivalent
/// pairwise form sum_i kappa_i cos t_i - sum_{j != k} delta_jk cos(t_k - t_j).
struct MultivariateCosine {
  static constexpr std::string_view kName = "multivariate_cosine";
  std::vector<double> kappa;
  std::vector<double> delta;  // row-major d x d

  std::size_t dim() const { return kappa.size(); }
  void validate() const {
    detail::require_dim(dim(), "multivariate_cosine");
    for (double k : kappa) detail::require_finite(k, "multivariate_cosine.kappa");
    detail::require_coupling_matrix(delta, dim(), "multivariate_cosine.Delta");
  }
  double log_unnormalized(const double* s, const double* c) const {
    const std::size_t d = dim();
    double v = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      v += kappa[i] * c[i];
      for (std::size_t j = i + 1; j < d; ++j) v -= 2.0 * delta[i * d + j] * (c[i] * c[j] + s[i] * s[j]);
    }
    return v;
  }
  void grad_log(const double* s, const double* c, double* out) const {
    const std::size_t d = dim();
    for (std::size_t i = 0; i < d; ++i) {
      double coupling = 0.0;
      for (std::size_t k = 0; k < d; ++k) coupling += delta[i * d + k] * (s[i] * c[k] - c[i] * s[k]);
      out[i] = -kappa[i] * s[i] + 2.0 * coupling;
    }
  }
};

/// f ∝ 1 / (c0 - c1 cos t1 - c2 cos t2 - c3 cos t1 cos t2 - c4 sin t1 sin t2)
struct BivariateWrappedCauchy {
  static constexpr std::string_view kName = "bivariate_wrapped_cauchy";
  static constexpr std::size_t kPositivityGrid = 256;
  double c0 = 1.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;

  std::size_t dim() const { return 2; }
  double denominator(const double* s, const double* c) const {
    return c0 - c1 * c[0] - c2 * c[1] - c3 * c[0] * c[1] - c4 * s[0] * s[1];
  }
  void validate() const {
    for (double x : {c0, c1, c2, c3, c4}) detail::require_finite(x, "bivariate_wrapped_cauchy");
    const TorusGrid grid(2, kPositivityGrid);
    const AxisTrig trig(grid, {});
    for (std::size_t a = 0; a < kPositivityGrid; ++a) {
      for (std::size_t b = 0; b < kPositivityGrid; ++b) {
        const double s[2] = {trig.sin[0][a], trig.sin[1][b]};
        const double c[2] = {trig.cos[0][a], trig.cos[1][b]};
        if (!(denominator(s, c) > 0.0)) {
          throw DomainError("bivariate_wrapped_cauchy: denominator must be positive on the torus "
                            "(fails at theta = (" + std::to_string(grid.node(a)) + ", " +
                            std::to_string(grid.node(b)) + "))");
        }
      }
    }
  }
  double log_unnormalized(const double* s, const double* c) const { return -std::log(denominator(s, c)); }
  void grad_log(const double* s, const double* c, double* out) const {
    const double inv = 1.0 / denominator(s, c);
    out[0] = -(c1 * s[0] + c3 * s[0] * c[1] - c4 * c[0] * s[1]) * inv;
    out[1] = -(c2 * s[1] + c3 * c[0] * s[1] - c4 * s[0] * c[1]) * inv;
  }
};

using Family = std::variant<ProductVonMises, Sine, Cosine, MultivariateSine, MultivariateCosine,
                            BivariateWrappedCauchy>;

inline std::string_view family_name(const Family& f) {
  return std::visit([](const auto& fam) { return std::decay_t<decltype(fam)>::kName; }, f);
}

inline std::size_t family_dim(const Family& f) {
  return std::visit([](const auto& fam) { return fam.dim(); }, f);
}

enum class NormalizationMethod { Analytic, Quadrature };

struct NormalizationCache {
  double log_constant = 0.0;  // log of C such that C * integral(unnormalized) = 1
  NormalizationMethod method = NormalizationMethod::Analytic;
  std::size_t grid_n = 0;        // 0 for analytic
  double doubling_change = 0.0;  // |log C(N) - log C(2N)| for quadrature
};

struct NormalizationOptions {
  std::size_t initial_grid_n = 32;
  double target_change = 1e-10;  // stop doubling once below this
  double max_change = 1e-6;      // accuracy error above this
  std::uint64_t max_nodes = std::uint64_t{1} << 25;
  ExecPolicy exec{};
};

namespace detail {

template <typename Fam>
double log_integral_unnormalized(const Fam& fam, std::size_t grid_n, ExecPolicy exec) {
  const TorusGrid grid(fam.dim(), grid_n);
  const AxisTrig trig(grid, {});
  struct MaxAcc {
    double v = -std::numeric_limits<double>::infinity();
  };
  const double peak = grid
                          .reduce<MaxAcc>(
                              exec, [] { return MaxAcc{}; },
                              [&](MaxAcc& acc, std::span<const std::size_t> idx) {
                                Scratch s, c;
                                trig.load(idx, s, c);
                                acc.v = std::max(acc.v, fam.log_unnormalized(s.data(), c.data()));
                              },
                              [](MaxAcc& a, const MaxAcc& b) { a.v = std::max(a.v, b.v); })
                          .v;
  const double total = grid
                           .reduce<CompensatedSum>(
                               exec, [] { return CompensatedSum{}; },
                               [&](CompensatedSum& acc, std::span<const std::size_t> idx) {
                                 Scratch s, c;
                                 trig.load(idx, s, c);
                                 acc.add(std::exp(fam.log_unnormalized(s.data(), c.data()) - peak));
                               },
                               [](CompensatedSum& a, const CompensatedSum& b) { a.merge(b); })
                           .value();
  return peak + std::log(total * grid.weight());
}

inline double analytic_log_constant(const ProductVonMises& fam) {
  double v = 0.0;
  for (double k : fam.kappa) v -= std::log(kTwoPi) + log_bessel_i0(k);
  return v;
}

}  // namespace detail

/// Normalizing constant at a fixed grid size. Analytic for the product von Mises
/// family; otherwise uniform-rule quadrature at N with the change on doubling to 2N
/// recorded. Throws AccuracyError when that change exceeds 1e-6.
inline NormalizationCache log_norm_constant(const Family& family, std::size_t grid_n, ExecPolicy exec = {}) {
  if (const auto* pvm = std::get_if<ProductVonMises>(&family)) {
    return {detail::analytic_log_constant(*pvm), NormalizationMethod::Analytic, 0, 0.0};
  }
  if (grid_n < 16) throw DomainError("log_norm_constant: grid_N must be at least 16");
  return std::visit(
      [&](const auto& fam) {
        const double coarse = -detail::log_integral_unnormalized(fam, grid_n, exec);
        const double fine = -detail::log_integral_unnormalized(fam, 2 * grid_n, exec);
        const double change = std::abs(coarse - fine);
        if (!(change <= 1e-6)) {
          throw AccuracyError("log_norm_constant: quadrature not converged (change " + std::to_string(change) +
                              " on doubling N=" + std::to_string(grid_n) + ")");
        }
        return NormalizationCache{coarse, NormalizationMethod::Quadrature, grid_n, change};
      },
      family);
}

/// A validated symmetric base density with its normalizing constant.
class BaseDensity {
 public:
  explicit BaseDensity(Family family, const NormalizationOptions& opts = {}) : family_(std::move(family)) {
    std::visit([](const auto& fam) { fam.validate(); }, family_);
    norm_ = normalize(opts);
  }

  const Family& family() const { return family_; }
  std::size_t dim() const { return family_dim(family_); }
  std::string_view name() const { return family_name(family_); }
  const NormalizationCache& normalization() const { return norm_; }
  double log_constant() const { return norm_.log_constant; }

  template <typename F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), family_);
  }

  double log_unnormalized(const AngleVector& theta) const {
    check_dim(theta);
    Scratch s, c;
    fill_trig(theta, s, c);
    return visit([&](const auto& fam) { return fam.log_unnormalized(s.data(), c.data()); });
  }

  double log_density(const AngleVector& theta) const { return log_unnormalized(theta) + norm_.log_constant; }
  double density(const AngleVector& theta) const { return std::exp(log_density(theta)); }

  /// Gradient of log f0 with respect to theta.
  std::vector<double> grad_log(const AngleVector& theta) const {
    check_dim(theta);
    Scratch s, c, g;
    fill_trig(theta, s, c);
    visit([&](const auto& fam) { fam.grad_log(s.data(), c.data(), g.data()); });
    return {g.begin(), g.begin() + static_cast<std::ptrdiff_t>(dim())};
  }

 private:
  void check_dim(const AngleVector& theta) const {
    if (theta.dim() != dim()) {
      throw DomainError("base density of dimension " + std::to_string(dim()) + " evaluated at a point of dimension " +
                        std::to_string(theta.dim()));
    }
  }
  static void fill_trig(const AngleVector& theta, Scratch& s, Scratch& c) {
    for (std::size_t i = 0; i < theta.dim(); ++i) {
      s[i] = std::sin(theta[i]);
      c[i] = std::cos(theta[i]);
    }
  }

  NormalizationCache normalize(const NormalizationOptions& opts) const {
    if (const auto* pvm = std::get_if<ProductVonMises>(&family_)) {
      return {detail::analytic_log_constant(*pvm), NormalizationMethod::Analytic, 0, 0.0};
    }
    return visit([&](const auto& fam) {
      std::size_t n = opts.initial_grid_n;
      double coarse = -detail::log_integral_unnormalized(fam, n, opts.exec);
      for (;;) {
        const double fine = -detail::log_integral_unnormalized(fam, 2 * n, opts.exec);
        const double change = std::abs(coarse - fine);
        const double next_nodes = std::pow(static_cast<double>(4 * n), static_cast<double>(fam.dim()));
        if (change < opts.target_change || next_nodes > static_cast<double>(opts.max_nodes)) {
          if (!(change <= opts.max_change)) {
            throw AccuracyError("normalization: quadrature not converged for " + std::string(fam.kName) +
                                " (change " + std::to_string(change) + " at N=" + std::to_string(2 * n) + ")");
          }
          return NormalizationCache{fine, NormalizationMethod::Quadrature, 2 * n, change};
        }
        coarse = fine;
        n *= 2;
      }
    });
  }

  Family family_;
  NormalizationCache norm_;
};

inline double log_unnormalized(const BaseDensity& base, const AngleVector& theta) {
  return base.log_unnormalized(theta);
}

inline std::vector<double> grad_log(const BaseDensity& base, const AngleVector& theta) {
  return base.grad_log(theta);
}

}  // namespace torskew
