#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "torskew/torskew.hpp"

namespace fixtures {

using namespace torskew;

struct Named {
  std::string name;
  Family family;
};

inline std::vector<double> equicorrelated(std::size_t d, double off) {
  std::vector<double> m(d * d, off);
  for (std::size_t i = 0; i < d; ++i) m[i * d + i] = 0.0;
  return m;
}

inline Family pvm2() { return ProductVonMises{{1.0, 2.0}}; }
inline Family pvm3() { return ProductVonMises{{1.0, 2.0, 0.5}}; }
inline Family sine() { return Sine{1.0, 1.0, 0.9}; }
inline Family cosine() { return Cosine{1.0, 1.0, 0.5}; }
inline Family mvsine3() { return MultivariateSine{{1.0, 1.0, 1.0}, equicorrelated(3, 0.4)}; }
inline Family mvcos3() { return MultivariateCosine{{1.0, 1.0, 1.0}, equicorrelated(3, 0.3)}; }
inline Family bwc_a() { return BivariateWrappedCauchy{1.5, 0.4, 0.3, 0.2, 0.4}; }
inline Family bwc_b() { return BivariateWrappedCauchy{1.2, 0.5, 0.4, -0.1, 0.3}; }
inline Family bwc_c() { return BivariateWrappedCauchy{1.0, 0.3, 0.3, 0.1, -0.2}; }

inline std::vector<Named> all() {
  return {{"pvm_d2", pvm2()},   {"pvm_d3", pvm3()},   {"sine", sine()},    {"cosine", cosine()},
          {"mvsine_d3", mvsine3()}, {"mvcos_d3", mvcos3()}, {"bwc_a", bwc_a()}, {"bwc_b", bwc_b()},
          {"bwc_c", bwc_c()}};
}

/// Plain grid integral of a function on the torus; independent of library reductions.
template <typename F>
double grid_integral(std::size_t d, std::size_t n, F&& f) {
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> theta(d);
  const double h = 2.0 * std::acos(-1.0) / static_cast<double>(n);
  long double total = 0.0L;
  std::size_t count = 1;
  for (std::size_t i = 0; i < d; ++i) count *= n;
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t r = k;
    for (std::size_t i = d; i-- > 0;) {
      idx[i] = r % n;
      r /= n;
    }
    for (std::size_t i = 0; i < d; ++i) theta[i] = -std::acos(-1.0) + h * static_cast<double>(idx[i]);
    total += f(theta);
  }
  return static_cast<double>(total) * std::pow(h, static_cast<double>(d));
}

}  // namespace fixtures
