#pragma once

// Geometry and bookkeeping on the d-torus [-pi, pi)^d: wrapping, uniform
// quadrature grids with deterministic parallel reduction, compensated
// summation, reproducible RNG streams and rank-1 lattices.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "torskew/errors.hpp"

namespace torskew {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Largest torus dimension handled by the fixed-size kernels.
inline constexpr std::size_t kMaxDim = 8;

using Scratch = std::array<double, kMaxDim>;

/// Wraps one angle onto [-pi, pi). Values already in range are returned unchanged.
inline double wrap_angle(double x) {
  if (!std::isfinite(x)) throw DomainError("wrap: non-finite angle");
  if (x >= -kPi && x < kPi) return x;
  double r = std::fmod(x + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  r -= kPi;
  if (r >= kPi) r = -kPi;
  if (r < -kPi) r = -kPi;
  return r;
}

/// Smallest |a - b + 2 pi k| over integers k.
inline double wrapped_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

/// A point on the d-torus, canonically wrapped to [-pi, pi)^d.
class AngleVector {
 public:
  AngleVector() = default;
  explicit AngleVector(std::vector<double> coords) : coords_(std::move(coords)) {
    for (double& c : coords_) c = wrap_angle(c);
  }
  AngleVector(std::initializer_list<double> coords) : AngleVector(std::vector<double>(coords)) {}

  static AngleVector zeros(std::size_t d) { return AngleVector(std::vector<double>(d, 0.0)); }

  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const { return coords_; }
  const std::vector<double>& values() const { return coords_; }

  friend bool operator==(const AngleVector&, const AngleVector&) = default;

 private:
  std::vector<double> coords_;
};

/// Component-wise wrap of an arbitrary real vector.
inline AngleVector wrap(std::span<const double> x) {
  return AngleVector(std::vector<double>(x.begin(), x.end()));
}

/// Wrapped difference a - b, component-wise.
inline AngleVector angle_diff(const AngleVector& a, const AngleVector& b) {
  if (a.dim() != b.dim()) throw DomainError("angle_diff: dimension mismatch");
  std::vector<double> out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] - b[i];
  return AngleVector(std::move(out));
}

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  void merge(const CompensatedSum& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Worker count for grid reductions and sampling. 0 means hardware concurrency.
struct ExecPolicy {
  unsigned threads = 0;

  unsigned resolved() const {
    if (threads != 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
  }
};

/// Runs `task(i)` for i in [0, count) on up to `threads` workers.
/// Tasks must write to disjoint outputs; ordering of results is up to the caller.
template <typename Task>
void parallel_for(std::size_t count, ExecPolicy policy, Task&& task) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(policy.resolved(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < count; i = next++) task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Uniform tensor grid on [-pi, pi)^d with nodes -pi + 2 pi k / N.
/// Nodes are generated from indices and never materialized.
class TorusGrid {
 public:
  static constexpr std::uint64_t kDefaultBudget = std::uint64_t{1} << 30;

  TorusGrid(std::size_t dim, std::size_t points_per_dim, std::uint64_t budget = kDefaultBudget)
      : dim_(dim), n_(points_per_dim) {
    if (dim == 0 || dim > kMaxDim) {
      throw DomainError("make_grid: dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    }
    if (points_per_dim < 2) throw DomainError("make_grid: need at least 2 points per dimension");
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < dim; ++i) {
      if (total > budget / points_per_dim) {
        throw ResourceError("make_grid: " + std::to_string(points_per_dim) + "^" +
                            std::to_string(dim) + " nodes exceeds budget of " +
                            std::to_string(budget));
      }
      total *= points_per_dim;
    }
    size_ = total;
  }

  std::size_t dim() const { return dim_; }
  std::size_t points_per_dim() const { return n_; }
  std::uint64_t size() const { return size_; }
  double node(std::size_t k) const { return -kPi + kTwoPi * static_cast<double>(k) / static_cast<double>(n_); }
  double weight() const { return std::pow(kTwoPi / static_cast<double>(n_), static_cast<double>(dim_)); }

  /// Node coordinates along one axis.
  std::vector<double> axis() const {
    std::vector<double> out(n_);
    for (std::size_t k = 0; k < n_; ++k) out[k] = node(k);
    return out;
  }

  /// Decodes a flat index (last axis fastest) into per-axis indices.
  void unflatten(std::uint64_t flat, std::span<std::size_t> idx) const {
    for (std::size_t i = dim_; i-- > 0;) {
      idx[i] = static_cast<std::size_t>(flat % n_);
      flat /= n_;
    }
  }

  /// Deterministic reduction over all nodes. The grid is split into slices along
  /// the first axis; each slice is visited in index order by `visit(acc, idx)`
  /// and slice accumulators are merged in slice order, so the result does not
  /// depend on the number of workers.
  template <typename Acc, typename MakeAcc, typename Visit, typename Merge>
  Acc reduce(ExecPolicy policy, MakeAcc&& make_acc, Visit&& visit, Merge&& merge) const {
    std::vector<Acc> partial;
    partial.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) partial.push_back(make_acc());
    const std::uint64_t per_slice = size_ / n_;
    parallel_for(n_, policy, [&](std::size_t slice) {
      std::array<std::size_t, kMaxDim> idx{};
      Acc& acc = partial[slice];
      const std::uint64_t base = static_cast<std::uint64_t>(slice) * per_slice;
      for (std::uint64_t j = 0; j < per_slice; ++j) {
        unflatten(base + j, std::span<std::size_t>(idx.data(), dim_));
        visit(acc, std::span<const std::size_t>(idx.data(), dim_));
      }
    });
    Acc total = make_acc();
    for (const Acc& p : partial) merge(total, p);
    return total;
  }

 private:
  std::size_t dim_;
  std::size_t n_;
  std::uint64_t size_ = 0;
};

inline TorusGrid make_grid(std::size_t dim, std::size_t points_per_dim) {
  return TorusGrid(dim, points_per_dim);
}

/// Per-axis sin/cos of (node - shift_i), so grid loops need no trig calls.
struct AxisTrig {
  std::vector<std::vector<double>> sin;
  std::vector<std::vector<double>> cos;

  AxisTrig(const TorusGrid& grid, std::span<const double> shift) {
    const std::size_t d = grid.dim();
    sin.assign(d, std::vector<double>(grid.points_per_dim()));
    cos.assign(d, std::vector<double>(grid.points_per_dim()));
    for (std::size_t i = 0; i < d; ++i) {
      const double mu = shift.empty() ? 0.0 : shift[i];
      for (std::size_t k = 0; k < grid.points_per_dim(); ++k) {
        const double x = grid.node(k) - mu;
        sin[i][k] = std::sin(x);
        cos[i][k] = std::cos(x);
      }
    }
  }

  void load(std::span<const std::size_t> idx, Scratch& s, Scratch& c) const {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s[i] = sin[i][idx[i]];
      c[i] = cos[i][idx[i]];
    }
  }
};

/// Reproducible random stream derived from (seed, stream index).
/// Distinct stream indices give statistically independent generators.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x746f7275u};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on [-pi, pi).
  double angle() { return -kPi + kTwoPi * uniform(); }
  double normal() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Korobov rank-1 lattice with `count` points on [-pi, pi)^d, shifted half a cell.
inline std::vector<AngleVector> rank1_lattice(std::size_t dim, std::size_t count,
                                              std::uint64_t generator = 306) {
  if (dim == 0 || count == 0) throw DomainError("rank1_lattice: empty lattice");
  std::vector<std::uint64_t> z(dim, 1);
  for (std::size_t i = 1; i < dim; ++i) z[i] = (z[i - 1] * generator) % count;
  std::vector<AngleVector> pts;
  pts.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double u = (static_cast<double>((k * z[i]) % count) + 0.5) / static_cast<double>(count);
      x[i] = -kPi + kTwoPi * u;
    }
    pts.emplace_back(std::move(x));
  }
  return pts;
}

}  // namespace torskew
