#pragma once

// Constrained maximum likelihood for skewed toroidal models and the
// convergence-rate experiment.
//
// Parameterization seen by the optimizer:
//   mu      = mu_start + offset (offset unconstrained, wrapped on return)
//   lambda  = x_j |x_j| with x = u sin|u| / |u|
// The second map sends R^d smoothly onto the closed unit l2 ball (|x| = 1 exactly
// when |u| = pi/2) and x -> x|x| maps that ball onto the closed l1 ball
// {sum |lambda_j| <= 1}, so every feasible lambda, boundary included, is reached.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "torskew/base_density.hpp"
#include "torskew/errors.hpp"
#include "torskew/skew.hpp"
#include "torskew/torus.hpp"

namespace torskew {

class ExperimentError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Constraint map

inline std::vector<double> lambda_from_unconstrained(std::span<const double> u) {
  double r2 = 0.0;
  for (double x : u) r2 += x * x;
  const double r = std::sqrt(r2);
  const double sinc = r < 1e-8 ? 1.0 - r2 / 6.0 : std::sin(r) / r;
  std::vector<double> lambda(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double x = u[j] * sinc;
    lambda[j] = x * std::abs(x);
  }
  return lambda;
}

/// Right inverse of lambda_from_unconstrained with |u| <= pi/2.
inline std::vector<double> unconstrained_from_lambda(std::span<const double> lambda) {
  std::vector<double> x(lambda.size());
  double r2 = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    x[j] = std::copysign(std::sqrt(std::abs(lambda[j])), lambda[j]);
    r2 += x[j] * x[j];
  }
  const double rx = std::sqrt(r2);
  if (rx > 1.0 + 1e-12) throw ConstraintError("unconstrained_from_lambda: sum |lambda_j| exceeds 1");
  if (rx == 0.0) return x;
  const double ru = std::asin(std::min(rx, 1.0));
  for (double& v : x) v *= ru / rx;
  return x;
}

// ---------------------------------------------------------------------------
// Concentration parameters <-> unconstrained vector

namespace detail {

inline std::vector<double> pack_concentrations(const Family& family) {
  return std::visit(
      [](const auto& fam) -> std::vector<double> {
        using F = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<F, ProductVonMises>) {
          std::vector<double> u;
          for (double k : fam.kappa) u.push_back(std::sqrt(k));
          return u;
        } else if constexpr (std::is_same_v<F, Sine> || std::is_same_v<F, Cosine>) {
          return {std::sqrt(fam.kappa1), std::sqrt(fam.kappa2), fam.beta};
        } else if constexpr (std::is_same_v<F, MultivariateSine> || std::is_same_v<F, MultivariateCosine>) {
          const auto& m = [&]() -> const std::vector<double>& {
            if constexpr (std::is_same_v<F, MultivariateSine>) return fam.lambda;
            else return fam.delta;
          }();
          std::vector<double> u(fam.kappa);
          const std::size_t d = fam.dim();
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) u.push_back(m[i * d + j]);
          return u;
        } else {
          const double slack = fam.c0 - std::abs(fam.c1) - std::abs(fam.c2) - std::abs(fam.c3) - std::abs(fam.c4);
          if (!(slack > 0.0)) {
            throw DomainError("fit: free wrapped Cauchy concentrations need c0 > |c1| + |c2| + |c3| + |c4| at init");
          }
          return {std::log(slack), fam.c1, fam.c2, fam.c3, fam.c4};
        }
      },
      family);
}

inline Family unpack_concentrations(const Family& like, std::span<const double> u) {
  return std::visit(
      [&](const auto& fam) -> Family {
        using F = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<F, ProductVonMises>) {
          ProductVonMises out;
          for (double x : u) out.kappa.push_back(x * x);
          return out;
        } else if constexpr (std::is_same_v<F, Sine> || std::is_same_v<F, Cosine>) {
          return F{u[0] * u[0], u[1] * u[1], u[2]};
        } else if constexpr (std::is_same_v<F, MultivariateSine> || std::is_same_v<F, MultivariateCosine>) {
          const std::size_t d = fam.dim();
          F out;
          out.kappa.assign(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(d));
          std::vector<double> m(d * d, 0.0);
          std::size_t k = d;
          for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = i + 1; j < d; ++j) {
              m[i * d + j] = u[k];
              m[j * d + i] = u[k];
              ++k;
            }
          }
          if constexpr (std::is_same_v<F, MultivariateSine>) out.lambda = std::move(m);
          else out.delta = std::move(m);
          return out;
        } else {
          const double c0 = std::abs(u[1]) + std::abs(u[2]) + std::abs(u[3]) + std::abs(u[4]) + std::exp(u[0]);
          return BivariateWrappedCauchy{c0, u[1], u[2], u[3], u[4]};
        }
      },
      like);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Log-likelihood

/// Data on the torus stored as per-point sin/cos, row-major n x d.
class TorusSample {
 public:
  explicit TorusSample(const std::vector<AngleVector>& data) {
    if (data.empty()) throw DomainError("fit: data must be nonempty");
    d_ = data.front().dim();
    n_ = data.size();
    sin_.resize(n_ * d_);
    cos_.resize(n_ * d_);
    for (std::size_t k = 0; k < n_; ++k) {
      if (data[k].dim() != d_) throw DomainError("fit: data points must share one dimension");
      for (std::size_t i = 0; i < d_; ++i) {
        sin_[k * d_ + i] = std::sin(data[k][i]);
        cos_[k * d_ + i] = std::cos(data[k][i]);
      }
    }
  }
  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }
  const double* sin_row(std::size_t k) const { return sin_.data() + k * d_; }
  const double* cos_row(std::size_t k) const { return cos_.data() + k * d_; }

  /// True when some coordinate takes a single value across the sample.
  bool degenerate() const {
    for (std::size_t i = 0; i < d_; ++i) {
      bool same = true;
      for (std::size_t k = 1; k < n_ && same; ++k) {
        same = sin_[k * d_ + i] == sin_[i] && cos_[k * d_ + i] == cos_[i];
      }
      if (same) return true;
    }
    return n_ == 1;
  }

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> sin_;
  std::vector<double> cos_;
};

/// sum_k log f(theta_k) for a skew model (base normalization included).
inline double log_likelihood(const SkewModel& model, const TorusSample& data) {
  const std::size_t d = model.dim();
  if (data.dim() != d) throw DomainError("log_likelihood: dimension mismatch");
  Scratch cm, sm;
  for (std::size_t i = 0; i < d; ++i) {
    cm[i] = std::cos(model.mu()[i]);
    sm[i] = std::sin(model.mu()[i]);
  }
  const double offset = model.base().log_constant() + model.log_mechanism_constant();
  return model.base().visit([&](const auto& fam) {
    double total = 0.0;
    // Skew factors are multiplied into a mantissa/exponent pair and logged once.
    double product = 1.0;
    long exponent = 0;
    Scratch s, c;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double* ds = data.sin_row(k);
      const double* dc = data.cos_row(k);
      for (std::size_t i = 0; i < d; ++i) {
        s[i] = ds[i] * cm[i] - dc[i] * sm[i];
        c[i] = dc[i] * cm[i] + ds[i] * sm[i];
      }
      const double factor = detail::skew_factor(model.mechanism(), model.lambda(), s.data());
      if (!(factor > 0.0)) return -std::numeric_limits<double>::infinity();
      total += fam.log_unnormalized(s.data(), c.data());
      product *= factor;
      if (product < 0x1p-500 || product > 0x1p500) {
        int e = 0;
        product = std::frexp(product, &e);
        exponent += e;
      }
    }
    total += std::log(product) + static_cast<double>(exponent) * std::numbers::ln2;
    return total + static_cast<double>(data.size()) * offset;
  });
}

inline double log_likelihood(const SkewModel& model, const std::vector<AngleVector>& data) {
  return log_likelihood(model, TorusSample(data));
}

// ---------------------------------------------------------------------------
// Fitting

struct FitOptions {
  bool free_concentrations = false;
  int max_iterations = 4000;
  double screening_tol = 1e-3;  // simplex size at which each start is stopped
  double simplex_tol = 1e-6;     // final tolerance for the best start
  double polish_step = 0.02;
  double nudge = 0.25;  // axis nudges of lambda for the restarts
  double initial_step = 0.2;
  NormalizationOptions normalization{32, 1e-10, 1e-6, std::uint64_t{1} << 22, ExecPolicy{1}};
};

struct FitResult {
  std::vector<double> mu;
  std::vector<double> lambda;
  std::optional<Family> concentrations;  // set when concentrations were free
  bool free_concentrations = false;
  double log_likelihood = 0.0;
  double init_log_likelihood = 0.0;
  int iterations = 0;
  int starts = 0;
  bool converged = false;
  bool constraint_active = false;
};

namespace detail {

struct GslMinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct GslVectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

struct NelderMeadRun {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimizes `objective` with GSL's nmsimplex2. Non-finite values are mapped to a
// large finite penalty so the simplex can retreat from infeasible regions.
inline NelderMeadRun nelder_mead(const std::function<double(std::span<const double>)>& objective,
                                 std::vector<double> start, double step, int max_iterations, double tol) {
  const std::size_t p = start.size();
  struct Ctx {
    const std::function<double(std::span<const double>)>* f;
    std::size_t p;
  } ctx{&objective, p};
  gsl_multimin_function fn;
  fn.n = p;
  fn.params = &ctx;
  fn.f = [](const gsl_vector* v, void* params) -> double {
    const auto* c = static_cast<const Ctx*>(params);
    const std::span<const double> x(gsl_vector_const_ptr(v, 0), c->p);
    const double val = (*c->f)(x);
    return std::isfinite(val) ? val : 1e300;
  };
  std::unique_ptr<gsl_vector, GslVectorDeleter> x0(gsl_vector_alloc(p));
  std::unique_ptr<gsl_vector, GslVectorDeleter> steps(gsl_vector_alloc(p));
  for (std::size_t i = 0; i < p; ++i) {
    gsl_vector_set(x0.get(), i, start[i]);
    gsl_vector_set(steps.get(), i, step);
  }
  std::unique_ptr<gsl_multimin_fminimizer, GslMinimizerDeleter> m(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, p));
  gsl_multimin_fminimizer_set(m.get(), &fn, x0.get(), steps.get());
  NelderMeadRun run;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && run.iterations < max_iterations) {
    ++run.iterations;
    if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(m.get()), tol);
  }
  run.converged = status == GSL_SUCCESS;
  run.value = gsl_multimin_fminimizer_minimum(m.get());
  run.x.assign(gsl_vector_const_ptr(m->x, 0), gsl_vector_const_ptr(m->x, 0) + p);
  return run;
}

struct GslErrorGuard {
  gsl_error_handler_t* previous = gsl_set_error_handler_off();
  ~GslErrorGuard() { gsl_set_error_handler(previous); }
};

}  // namespace detail

/// Local maximizer of the likelihood by Nelder-Mead, restarted from the init and
/// from lambda nudged by +/- `nudge` along each axis; the best run is returned.
/// Concentrations stay at `init`'s values unless `free_concentrations` is set.
inline FitResult fit_mle(const std::vector<AngleVector>& data, const SkewModel& init, const FitOptions& opts = {}) {
  const TorusSample sample(data);
  const std::size_t d = init.dim();
  if (sample.dim() != d) throw DomainError("fit: data dimension does not match the model");
  if (opts.free_concentrations && sample.degenerate()) {
    throw DomainError("fit: likelihood is unbounded in the concentrations for data with a constant coordinate; "
                      "fix the concentrations instead");
  }
  const double n = static_cast<double>(sample.size());
  const double init_ll = log_likelihood(init, sample);
  if (!std::isfinite(init_ll)) throw DomainError("fit: log-likelihood at init is not finite");

  const detail::GslErrorGuard guard;
  const std::vector<double> mu0 = init.mu().values();
  const Family family0 = init.base().family();
  const std::vector<double> conc0 = opts.free_concentrations ? detail::pack_concentrations(family0) : std::vector<double>{};
  const std::size_t p = 2 * d + conc0.size();

  auto build = [&](std::span<const double> x) {
    std::vector<double> mu(d);
    for (std::size_t i = 0; i < d; ++i) mu[i] = mu0[i] + x[i];
    std::vector<double> lambda = lambda_from_unconstrained(x.subspan(d, d));
    if (opts.free_concentrations) {
      BaseDensity base(detail::unpack_concentrations(family0, x.subspan(2 * d)), opts.normalization);
      return SkewModel(std::move(base), AngleVector(std::move(mu)), std::move(lambda), init.mechanism());
    }
    return SkewModel(init.base(), AngleVector(std::move(mu)), std::move(lambda), init.mechanism());
  };
  const std::function<double(std::span<const double>)> objective = [&](std::span<const double> x) -> double {
    for (std::size_t k = 2 * d; k < p; ++k) {
      if (std::abs(x[k]) > 1e3) return std::numeric_limits<double>::infinity();
    }
    try {
      return -log_likelihood(build(x), sample) / n;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<std::vector<double>> starts;
  auto push_start = [&](std::vector<double> lambda) {
    double l1 = 0.0;
    for (double l : lambda) l1 += std::abs(l);
    if (l1 > 0.99) {
      for (double& l : lambda) l *= 0.99 / l1;
    }
    std::vector<double> x(d, 0.0);
    const std::vector<double> u = unconstrained_from_lambda(lambda);
    x.insert(x.end(), u.begin(), u.end());
    x.insert(x.end(), conc0.begin(), conc0.end());
    starts.push_back(std::move(x));
  };
  push_start(init.lambda());
  for (std::size_t j = 0; j < d; ++j) {
    for (double sign : {1.0, -1.0}) {
      std::vector<double> lambda = init.lambda();
      lambda[j] += sign * opts.nudge;
      push_start(std::move(lambda));
    }
  }

  // Screen every start at a loose tolerance, then polish the best one.
  std::optional<detail::NelderMeadRun> best;
  for (const auto& s : starts) {
    detail::NelderMeadRun run = detail::nelder_mead(objective, s, opts.initial_step, opts.max_iterations, opts.screening_tol);
    if (!best || run.value < best->value) best = std::move(run);
  }
  {
    detail::NelderMeadRun polished =
        detail::nelder_mead(objective, best->x, opts.polish_step, opts.max_iterations, opts.simplex_tol);
    polished.iterations += best->iterations;
    if (polished.value <= best->value) {
      best = std::move(polished);
    } else {
      best->converged = polished.converged;
    }
  }

  const SkewModel fitted = build(best->x);
  FitResult result;
  result.mu = fitted.mu().values();
  result.lambda = fitted.lambda();
  result.free_concentrations = opts.free_concentrations;
  if (opts.free_concentrations) result.concentrations = fitted.base().family();
  result.log_likelihood = log_likelihood(fitted, sample);
  result.init_log_likelihood = init_ll;
  if (result.log_likelihood < init_ll) {
    // The init itself is a feasible point; never return something worse.
    result.mu = init.mu().values();
    result.lambda = init.lambda();
    result.log_likelihood = init_ll;
  }
  result.iterations = best->iterations;
  result.starts = static_cast<int>(starts.size());
  result.converged = best->converged;
  double l1 = 0.0;
  for (double l : result.lambda) l1 += std::abs(l);
  result.constraint_active = l1 > 1.0 - 1e-6;
  return result;
}

/// Per-coordinate circular mean, used as a data-driven location start.
inline AngleVector circular_mean(const std::vector<AngleVector>& data) {
  if (data.empty()) throw DomainError("circular_mean: empty data");
  const std::size_t d = data.front().dim();
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double ss = 0.0, cc = 0.0;
    for (const auto& x : data) {
      ss += std::sin(x[i]);
      cc += std::cos(x[i]);
    }
    out[i] = std::atan2(ss, cc);
  }
  return AngleVector(std::move(out));
}

// ---------------------------------------------------------------------------
// Rate experiment

struct Estimate {
  std::vector<double> mu;
  std::vector<double> lambda;
};

struct RateRow {
  std::size_t n = 0;
  double rmse_lambda = 0.0;
  double rmse_mu = 0.0;
  std::size_t replications = 0;
  std::size_t excluded = 0;
};

struct RateTable {
  std::vector<RateRow> rows;
  double fitted_slope_lambda = 0.0;
  double fitted_slope_mu = 0.0;
  std::uint64_t seed = 0;
};

struct RateOptions {
  std::size_t min_replications = 200;
  double max_excluded_fraction = 0.05;
  FitOptions fit{};
  SampleOptions sampling{.exec = ExecPolicy{1}};
  ExecPolicy exec{};
};

/// Seed of replication `rep` at sample-size index `row`, derived from the experiment seed.
inline std::uint64_t replication_seed(std::uint64_t seed, std::size_t row, std::size_t rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(rep), 0x72617465u};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Least-squares slope of log(y) on log(x).
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("log_log_slope: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// The default estimator: MLE with concentrations fixed at truth, started from the
/// circular mean and lambda = 0.
inline Estimate mle_estimate(const std::vector<AngleVector>& data, const SkewModel& truth, const FitOptions& opts) {
  const SkewModel init(truth.base(), circular_mean(data), std::vector<double>(truth.dim(), 0.0), truth.mechanism());
  const FitResult fit = fit_mle(data, init, opts);
  return {fit.mu, fit.lambda};
}

/// For each n, draws `reps` datasets from `truth`, estimates (mu, lambda), and
/// reports RMSE against truth plus the log-log slopes. Replications whose
/// estimator throws are excluded; more than 5% exclusions fails the experiment.
template <typename Estimator>
  requires std::invocable<Estimator&, const std::vector<AngleVector>&, const SkewModel&>
RateTable rate_experiment(const SkewModel& truth, const std::vector<std::size_t>& n_grid, std::size_t reps,
                          std::uint64_t seed, Estimator&& estimator, const RateOptions& opts = {}) {
  if (n_grid.size() < 3) throw DomainError("rate_experiment: need at least 3 sample sizes");
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) throw DomainError("rate_experiment: n_grid must be strictly increasing");
  }
  if (n_grid.front() == 0) throw DomainError("rate_experiment: sample sizes must be positive");
  if (std::log10(static_cast<double>(n_grid.back()) / static_cast<double>(n_grid.front())) < 1.5) {
    throw DomainError("rate_experiment: n_grid must span at least 1.5 decades");
  }
  if (reps < opts.min_replications) {
    throw DomainError("rate_experiment: need at least " + std::to_string(opts.min_replications) + " replications");
  }
  const std::size_t d = truth.dim();

  RateTable table;
  table.seed = seed;
  for (std::size_t row = 0; row < n_grid.size(); ++row) {
    const std::size_t n = n_grid[row];
    struct Outcome {
      bool ok = false;
      double err_lambda = 0.0;
      double err_mu = 0.0;
    };
    std::vector<Outcome> outcomes(reps);
    parallel_for(reps, opts.exec, [&](std::size_t rep) {
      try {
        const auto data = sample(truth, n, replication_seed(seed, row, rep), opts.sampling);
        const Estimate est = estimator(data, truth);
        Outcome o{true, 0.0, 0.0};
        for (std::size_t i = 0; i < d; ++i) {
          const double dl = est.lambda[i] - truth.lambda()[i];
          const double dm = wrapped_distance(est.mu[i], truth.mu()[i]);
          o.err_lambda += dl * dl;
          o.err_mu += dm * dm;
        }
        outcomes[rep] = o;
      } catch (const Error&) {
        outcomes[rep] = Outcome{};
      }
    });
    CompensatedSum sl, sm;
    std::size_t used = 0;
    for (const auto& o : outcomes) {
      if (!o.ok) continue;
      sl.add(o.err_lambda);
      sm.add(o.err_mu);
      ++used;
    }
    const std::size_t excluded = reps - used;
    if (static_cast<double>(excluded) > opts.max_excluded_fraction * static_cast<double>(reps)) {
      throw ExperimentError("rate_experiment: " + std::to_string(excluded) + " of " + std::to_string(reps) +
                            " replications failed at n=" + std::to_string(n));
    }
    table.rows.push_back({n, std::sqrt(sl.value() / static_cast<double>(used)),
                          std::sqrt(sm.value() / static_cast<double>(used)), used, excluded});
  }
  std::vector<double> xs, yl, ym;
  for (const auto& r : table.rows) {
    xs.push_back(static_cast<double>(r.n));
    yl.push_back(r.rmse_lambda);
    ym.push_back(r.rmse_mu);
  }
  table.fitted_slope_lambda = log_log_slope(xs, yl);
  table.fitted_slope_mu = log_log_slope(xs, ym);
  return table;
}

inline RateTable rate_experiment(const SkewModel& truth, const std::vector<std::size_t>& n_grid, std::size_t reps,
                                 std::uint64_t seed, const RateOptions& opts = {}) {
  return rate_experiment(
      truth, n_grid, reps, seed,
      [&](const std::vector<AngleVector>& data, const SkewModel& t) { return mle_estimate(data, t, opts.fit); }, opts);
}

}  // namespace torskew
