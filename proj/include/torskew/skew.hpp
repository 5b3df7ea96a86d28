#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "torskew/base_density.hpp"
#include "torskew/errors.hpp"
#include "torskew/torus.hpp"

namespace torskew {

/// f0(t - mu) (1 + sum_j lambda_j sin(t_j - mu_j)),  sum_j |lambda_j| <= 1.
struct SineSkew {};
/// f0(t - mu) prod_j (1 + lambda_j sin(t_j - mu_j)),  |lambda_j| <= 1.
struct ProductSkew {};
/// C f0(t - mu) ((1 + lambda_1 sin(t_1 - mu_1) + lambda_2 sin(t_2 - mu_2)) / 2)^m,  d = 2.
struct PowerSkew {
  int m = 1;
};

using Mechanism = std::variant<SineSkew, ProductSkew, PowerSkew>;

inline std::string mechanism_name(const Mechanism& mech) {
  if (std::holds_alternative<SineSkew>(mech)) return "sine";
  if (std::holds_alternative<ProductSkew>(mech)) return "product";
  return "power(m=" + std::to_string(std::get<PowerSkew>(mech).m) + ")";
}

/// Multiplier of the skewness block of the score at lambda = 0 (m for the power mechanism).
inline double skew_score_scale(const Mechanism& mech) {
  if (const auto* p = std::get_if<PowerSkew>(&mech)) return static_cast<double>(p->m);
  return 1.0;
}

/// A violated skewing constraint.
struct Violation {
  std::string constraint;  // e.g. "sum |lambda_j| <= 1"
  double value = 0.0;      // left-hand side
  double limit = 0.0;      // right-hand side
  std::string message;
};

/// Checks the mechanism constraint exactly (no tolerance).
inline std::optional<Violation> validate(std::size_t dim, const std::vector<double>& lambda, const Mechanism& mech) {
  if (lambda.size() != dim) {
    return Violation{"length(lambda) = d", static_cast<double>(lambda.size()), static_cast<double>(dim),
                     "lambda has length " + std::to_string(lambda.size()) + " but the base has dimension " +
                         std::to_string(dim)};
  }
  for (double l : lambda) {
    if (!std::isfinite(l)) return Violation{"lambda finite", l, 0.0, "lambda contains a non-finite value"};
  }
  double l1 = 0.0;
  double linf = 0.0;
  for (double l : lambda) {
    l1 += std::abs(l);
    linf = std::max(linf, std::abs(l));
  }
  auto l1_violation = [&] {
    return Violation{"sum |lambda_j| <= 1", l1, 1.0,
                     "sum |lambda_j| = " + std::to_string(l1) + " exceeds 1 by " + std::to_string(l1 - 1.0)};
  };
  return std::visit(
      [&](const auto& m) -> std::optional<Violation> {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, SineSkew>) {
          if (l1 > 1.0) return l1_violation();
        } else if constexpr (std::is_same_v<M, ProductSkew>) {
          if (linf > 1.0) {
            return Violation{"|lambda_j| <= 1 for each j", linf, 1.0,
                             "max |lambda_j| = " + std::to_string(linf) + " exceeds 1 by " +
                                 std::to_string(linf - 1.0)};
          }
        } else {
          if (dim != 2) {
            return Violation{"d = 2 for the power mechanism", static_cast<double>(dim), 2.0,
                             "the power mechanism is defined on the 2-torus only"};
          }
          if (m.m < 1) {
            return Violation{"m >= 1", static_cast<double>(m.m), 1.0, "power m must be a positive integer"};
          }
          if (l1 > 1.0) return l1_violation();
        }
        return std::nullopt;
      },
      mech);
}

namespace detail {

// Skew factor evaluated at relative sines s_j = sin(t_j - mu_j).
inline double skew_factor(const Mechanism& mech, const std::vector<double>& lambda, const double* s) {
  const std::size_t d = lambda.size();
  if (std::holds_alternative<ProductSkew>(mech)) {
    double f = 1.0;
    for (std::size_t j = 0; j < d; ++j) f *= 1.0 + lambda[j] * s[j];
    return f;
  }
  double lin = 1.0;
  for (std::size_t j = 0; j < d; ++j) lin += lambda[j] * s[j];
  if (const auto* p = std::get_if<PowerSkew>(&mech)) return std::pow(0.5 * lin, p->m);
  return lin;
}

// Upper bound of the skew factor used as rejection envelope.
inline double skew_factor_bound(const Mechanism& mech, std::size_t d) {
  if (std::holds_alternative<ProductSkew>(mech)) return std::ldexp(1.0, static_cast<int>(d));
  if (std::holds_alternative<PowerSkew>(mech)) return 1.0;
  return 2.0;
}

// log of integral f0(t) * factor(t) dt with f0 normalized, by grid quadrature.
inline double log_mean_skew_factor(const BaseDensity& base, const Mechanism& mech, const std::vector<double>& lambda,
                                   std::size_t grid_n, ExecPolicy exec) {
  const TorusGrid grid(base.dim(), grid_n);
  const AxisTrig trig(grid, {});
  const double log_c = base.log_constant();
  return base.visit([&](const auto& fam) {
    const double total = grid
                             .reduce<CompensatedSum>(
                                 exec, [] { return CompensatedSum{}; },
                                 [&](CompensatedSum& acc, std::span<const std::size_t> idx) {
                                   Scratch s, c;
                                   trig.load(idx, s, c);
                                   const double f0 = std::exp(fam.log_unnormalized(s.data(), c.data()) + log_c);
                                   acc.add(f0 * skew_factor(mech, lambda, s.data()));
                                 },
                                 [](CompensatedSum& a, const CompensatedSum& b) { a.merge(b); })
                             .value();
    return std::log(total * grid.weight());
  });
}

}  // namespace detail

struct SkewOptions {
  std::size_t mechanism_grid_n = 64;  // starting grid for mechanism normalizers
  ExecPolicy exec{};
};

/// Skewed toroidal model: base density, location mu, skewness lambda, mechanism.
class SkewModel {
 public:
  SkewModel(BaseDensity base, AngleVector mu, std::vector<double> lambda, Mechanism mechanism = SineSkew{},
            const SkewOptions& opts = {})
      : base_(std::move(base)), mu_(std::move(mu)), lambda_(std::move(lambda)), mechanism_(mechanism) {
    if (mu_.dim() != base_.dim()) {
      throw DomainError("skew model: mu has length " + std::to_string(mu_.dim()) + " but the base has dimension " +
                        std::to_string(base_.dim()));
    }
    if (auto v = validate(base_.dim(), lambda_, mechanism_)) throw ConstraintError(v->message + " [" + v->constraint + "]");
    log_mechanism_constant_ = mechanism_log_constant(opts);
  }

  const BaseDensity& base() const { return base_; }
  const AngleVector& mu() const { return mu_; }
  const std::vector<double>& lambda() const { return lambda_; }
  const Mechanism& mechanism() const { return mechanism_; }
  std::size_t dim() const { return base_.dim(); }
  /// Additive log normalizer contributed by the mechanism (0 for sine-skewing).
  double log_mechanism_constant() const { return log_mechanism_constant_; }

  /// Skew factor at theta (before the mechanism constant).
  double skew_factor(const AngleVector& theta) const {
    Scratch s;
    for (std::size_t j = 0; j < dim(); ++j) s[j] = std::sin(theta[j] - mu_[j]);
    return detail::skew_factor(mechanism_, lambda_, s.data());
  }

  /// log f(theta); -inf where the skew factor vanishes.
  double log_density(const AngleVector& theta) const {
    if (theta.dim() != dim()) throw DomainError("skew_log_density: dimension mismatch");
    const double factor = skew_factor(theta);
    if (!(factor > 0.0)) return -std::numeric_limits<double>::infinity();
    return base_.log_density(angle_diff(theta, mu_)) + std::log(factor) + log_mechanism_constant_;
  }

  double density(const AngleVector& theta) const { return std::exp(log_density(theta)); }

 private:
  double mechanism_log_constant(const SkewOptions& opts) const {
    if (std::holds_alternative<SineSkew>(mechanism_)) return 0.0;
    bool all_zero = true;
    for (double l : lambda_) all_zero = all_zero && l == 0.0;
    if (all_zero && std::holds_alternative<ProductSkew>(mechanism_)) return 0.0;
    std::size_t n = opts.mechanism_grid_n;
    double coarse = -detail::log_mean_skew_factor(base_, mechanism_, lambda_, n, opts.exec);
    for (int attempt = 0; attempt < 4; ++attempt) {
      const double fine = -detail::log_mean_skew_factor(base_, mechanism_, lambda_, 2 * n, opts.exec);
      if (std::abs(fine - coarse) < 1e-10) return fine;
      coarse = fine;
      n *= 2;
    }
    throw AccuracyError("skew model: mechanism normalizer did not converge for " + mechanism_name(mechanism_));
  }

  BaseDensity base_;
  AngleVector mu_;
  std::vector<double> lambda_;
  Mechanism mechanism_;
  double log_mechanism_constant_ = 0.0;
};

inline double skew_log_density(const SkewModel& model, const AngleVector& theta) { return model.log_density(theta); }

inline std::optional<Violation> validate(const SkewModel& model) {
  return validate(model.dim(), model.lambda(), model.mechanism());
}

struct SampleOptions {
  double envelope_safety = 1.2;
  std::size_t envelope_grid_n = 64;
  std::size_t chunk_size = 4096;
  std::uint64_t rate_window = 100000;
  double min_acceptance = 1e-4;
  ExecPolicy exec{};
};

/// Draws n i.i.d. points by two-stage rejection: a uniform proposal accepted with
/// probability f0 / M, M = safety * grid max of f0, then the skew factor accepted
/// with probability factor / B. Work is split into fixed chunks, each with its own
/// stream (seed, chunk index), so the output does not depend on the worker count.
inline std::vector<AngleVector> sample(const SkewModel& model, std::size_t n, std::uint64_t seed,
                                       const SampleOptions& opts = {}) {
  if (n == 0) throw DomainError("sample: n must be positive");
  const std::size_t d = model.dim();
  const BaseDensity& base = model.base();

  const TorusGrid grid(d, opts.envelope_grid_n);
  const AxisTrig trig(grid, {});
  struct MaxAcc {
    double v = -std::numeric_limits<double>::infinity();
  };
  const double grid_max = base.visit([&](const auto& fam) {
    return grid
        .reduce<MaxAcc>(
            opts.exec, [] { return MaxAcc{}; },
            [&](MaxAcc& acc, std::span<const std::size_t> idx) {
              Scratch s, c;
              trig.load(idx, s, c);
              acc.v = std::max(acc.v, fam.log_unnormalized(s.data(), c.data()));
            },
            [](MaxAcc& a, const MaxAcc& b) { a.v = std::max(a.v, b.v); })
        .v;
  });
  const double log_envelope = grid_max + std::log(opts.envelope_safety);
  const double factor_bound = detail::skew_factor_bound(model.mechanism(), d);
  const double max_density_estimate = std::exp(grid_max + base.log_constant());

  const std::size_t chunks = (n + opts.chunk_size - 1) / opts.chunk_size;
  std::vector<std::vector<AngleVector>> parts(chunks);
  parallel_for(chunks, opts.exec, [&](std::size_t chunk) {
    const std::size_t begin = chunk * opts.chunk_size;
    const std::size_t want = std::min(opts.chunk_size, n - begin);
    RngStream rng(seed, chunk);
    auto& out = parts[chunk];
    out.reserve(want);
    std::uint64_t window_proposals = 0;
    std::uint64_t window_accepts = 0;
    Scratch s, c, x;
    base.visit([&](const auto& fam) {
      while (out.size() < want) {
        for (std::size_t i = 0; i < d; ++i) {
          x[i] = rng.angle();
          s[i] = std::sin(x[i]);
          c[i] = std::cos(x[i]);
        }
        ++window_proposals;
        const double ratio = std::exp(fam.log_unnormalized(s.data(), c.data()) - log_envelope);
        if (ratio > 1.0) {
          throw EnvelopeError("sample: density exceeds the rejection envelope", max_density_estimate);
        }
        const bool base_ok = rng.uniform() < ratio;
        const bool skew_ok = base_ok && rng.uniform() * factor_bound < detail::skew_factor(model.mechanism(), model.lambda(), s.data());
        if (skew_ok) {
          ++window_accepts;
          std::vector<double> theta(d);
          for (std::size_t i = 0; i < d; ++i) theta[i] = x[i] + model.mu()[i];
          out.emplace_back(std::move(theta));
        }
        if (window_proposals >= opts.rate_window) {
          if (static_cast<double>(window_accepts) < opts.min_acceptance * static_cast<double>(window_proposals)) {
            throw EnvelopeError("sample: acceptance rate " +
                                    std::to_string(static_cast<double>(window_accepts) / window_proposals) +
                                    " below " + std::to_string(opts.min_acceptance),
                                max_density_estimate);
          }
          window_proposals = 0;
          window_accepts = 0;
        }
      }
    });
  });

  std::vector<AngleVector> result;
  result.reserve(n);
  for (auto& p : parts) {
    for (auto& v : p) result.push_back(std::move(v));
  }
  return result;
}

}  // namespace torskew
