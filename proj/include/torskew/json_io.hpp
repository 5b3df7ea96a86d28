#pragma once

// JSON model descriptors and report serialization.
//
// Base descriptor examples:
//   {"family": "cosine", "kappa1": 1.0, "kappa2": 1.0, "beta": 0.5}
//   {"family": "product_von_mises", "kappa": [1, 2]}
//   {"family": "multivariate_sine", "kappa": [1, 1, 1], "Lambda": [[0, .4, .4], [.4, 0, .4], [.4, .4, 0]]}
//   {"family": "bivariate_wrapped_cauchy", "c0": 2, "c1": 0.3, "c2": 0.3, "c3": 0.1, "c4": 0.2}
// Skew models add {"mu": [...], "lambda": [...], "mechanism": "sine" | "product" | {"power": m}}.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "torskew/characterize.hpp"
#include "torskew/estimation.hpp"
#include "torskew/fisher.hpp"
#include "torskew/skew.hpp"

namespace torskew {

using json = nlohmann::json;

/// Descriptor problem with the offending field path in the message.
class DescriptorError : public DomainError {
 public:
  using DomainError::DomainError;
};

namespace detail {

inline const json& require_field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw DescriptorError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw DescriptorError(path + "." + key + ": missing required field");
  return *it;
}

inline double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw DescriptorError(path + ": expected a number, got " + std::string(j.type_name()));
  return j.get<double>();
}

inline double read_number_field(const json& j, const std::string& key, const std::string& path) {
  return read_number(require_field(j, key, path), path + "." + key);
}

inline std::vector<double> read_vector(const json& j, const std::string& path) {
  if (!j.is_array()) throw DescriptorError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<double> read_matrix(const json& j, std::size_t d, const std::string& path) {
  if (!j.is_array() || j.size() != d) {
    throw DescriptorError(path + ": expected a " + std::to_string(d) + "x" + std::to_string(d) + " nested array");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < d; ++i) {
    const std::vector<double> row = read_vector(j[i], path + "[" + std::to_string(i) + "]");
    if (row.size() != d) throw DescriptorError(path + "[" + std::to_string(i) + "]: expected " + std::to_string(d) + " entries");
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

inline json matrix_to_json(const std::vector<double>& m, std::size_t d) {
  json rows = json::array();
  for (std::size_t i = 0; i < d; ++i) {
    rows.push_back(std::vector<double>(m.begin() + static_cast<std::ptrdiff_t>(i * d),
                                       m.begin() + static_cast<std::ptrdiff_t>((i + 1) * d)));
  }
  return rows;
}

inline json eigen_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.cols(); ++k) row[static_cast<std::size_t>(k)] = m(i, k);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace detail

inline Family family_from_json(const json& j, const std::string& path = "model") {
  const json& fam = detail::require_field(j, "family", path);
  if (!fam.is_string()) throw DescriptorError(path + ".family: expected a string");
  const std::string name = fam.get<std::string>();
  if (name == ProductVonMises::kName) {
    return ProductVonMises{detail::read_vector(detail::require_field(j, "kappa", path), path + ".kappa")};
  }
  if (name == Sine::kName || name == Cosine::kName) {
    const double k1 = detail::read_number_field(j, "kappa1", path);
    const double k2 = detail::read_number_field(j, "kappa2", path);
    const double b = detail::read_number_field(j, "beta", path);
    if (name == Sine::kName) return Sine{k1, k2, b};
    return Cosine{k1, k2, b};
  }
  if (name == MultivariateSine::kName || name == MultivariateCosine::kName) {
    std::vector<double> kappa = detail::read_vector(detail::require_field(j, "kappa", path), path + ".kappa");
    const bool sine = name == MultivariateSine::kName;
    const std::string key = sine ? "Lambda" : "Delta";
    std::vector<double> m = detail::read_matrix(detail::require_field(j, key, path), kappa.size(), path + "." + key);
    if (sine) return MultivariateSine{std::move(kappa), std::move(m)};
    return MultivariateCosine{std::move(kappa), std::move(m)};
  }
  if (name == BivariateWrappedCauchy::kName) {
    return BivariateWrappedCauchy{detail::read_number_field(j, "c0", path), detail::read_number_field(j, "c1", path),
                                  detail::read_number_field(j, "c2", path), detail::read_number_field(j, "c3", path),
                                  detail::read_number_field(j, "c4", path)};
  }
  throw DescriptorError(path + ".family: unknown family '" + name + "'");
}

inline json family_to_json(const Family& family) {
  return std::visit(
      [](const auto& fam) -> json {
        using F = std::decay_t<decltype(fam)>;
        json j;
        j["family"] = std::string(F::kName);
        if constexpr (std::is_same_v<F, ProductVonMises>) {
          j["kappa"] = fam.kappa;
        } else if constexpr (std::is_same_v<F, Sine> || std::is_same_v<F, Cosine>) {
          j["kappa1"] = fam.kappa1;
          j["kappa2"] = fam.kappa2;
          j["beta"] = fam.beta;
        } else if constexpr (std::is_same_v<F, MultivariateSine>) {
          j["kappa"] = fam.kappa;
          j["Lambda"] = detail::matrix_to_json(fam.lambda, fam.dim());
        } else if constexpr (std::is_same_v<F, MultivariateCosine>) {
          j["kappa"] = fam.kappa;
          j["Delta"] = detail::matrix_to_json(fam.delta, fam.dim());
        } else {
          j["c0"] = fam.c0;
          j["c1"] = fam.c1;
          j["c2"] = fam.c2;
          j["c3"] = fam.c3;
          j["c4"] = fam.c4;
        }
        return j;
      },
      family);
}

inline Mechanism mechanism_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "sine") return SineSkew{};
    if (s == "product") return ProductSkew{};
    throw DescriptorError(path + ": unknown mechanism '" + s + "' (expected \"sine\", \"product\" or {\"power\": m})");
  }
  if (j.is_object() && j.contains("power")) {
    const json& m = j["power"];
    if (!m.is_number_integer()) throw DescriptorError(path + ".power: expected a positive integer");
    return PowerSkew{m.get<int>()};
  }
  throw DescriptorError(path + ": expected \"sine\", \"product\" or {\"power\": m}");
}

inline json mechanism_to_json(const Mechanism& mech) {
  if (std::holds_alternative<SineSkew>(mech)) return "sine";
  if (std::holds_alternative<ProductSkew>(mech)) return "product";
  return json{{"power", std::get<PowerSkew>(mech).m}};
}

/// Raw skew-model fields, before constraint validation.
struct SkewDescriptor {
  Family family;
  std::vector<double> mu;
  std::vector<double> lambda;
  Mechanism mechanism = SineSkew{};
};

/// Parses a descriptor. Missing mu / lambda default to zeros; `degrees` converts mu.
inline SkewDescriptor skew_descriptor_from_json(const json& j, bool degrees = false) {
  SkewDescriptor out{family_from_json(j), {}, {}, SineSkew{}};
  const std::size_t d = family_dim(out.family);
  out.mu = j.contains("mu") ? detail::read_vector(j["mu"], "model.mu") : std::vector<double>(d, 0.0);
  out.lambda = j.contains("lambda") ? detail::read_vector(j["lambda"], "model.lambda") : std::vector<double>(d, 0.0);
  if (j.contains("mechanism")) out.mechanism = mechanism_from_json(j["mechanism"], "model.mechanism");
  if (out.mu.size() != d) throw DescriptorError("model.mu: expected " + std::to_string(d) + " entries");
  if (degrees) {
    for (double& m : out.mu) m *= kPi / 180.0;
  }
  return out;
}

inline json skew_model_to_json(const SkewModel& model) {
  json j = family_to_json(model.base().family());
  j["mu"] = model.mu().values();
  j["lambda"] = model.lambda();
  j["mechanism"] = mechanism_to_json(model.mechanism());
  return j;
}

inline json normalization_to_json(const NormalizationCache& n) {
  return {{"log_constant", n.log_constant},
          {"method", n.method == NormalizationMethod::Analytic ? "analytic" : "quadrature"},
          {"grid_N", n.grid_n},
          {"doubling_change", n.doubling_change}};
}

inline json fim_report_to_json(const FimReport& r) {
  json j;
  j["matrix"] = detail::eigen_to_json(r.matrix);
  j["eigenvalues"] = r.eigenvalues;
  j["rank"] = r.numerical_rank;
  j["null_basis"] = r.null_basis;
  j["grid_N"] = r.grid_n;
  j["tolerance"] = r.tol_used;
  j["doubling_change"] = r.doubling_change ? json(*r.doubling_change) : json(nullptr);
  return j;
}

inline json verdict_to_json(const Characterization& c) {
  json j;
  j["verdict"] = verdict_name(c.verdict);
  j["alpha"] = nullptr;
  j["gamma"] = nullptr;
  j["deviation"] = nullptr;
  j["min_eigenvalue"] = c.fim.min_eigenvalue();
  j["grid_N"] = c.fim.grid_n;
  j["rank"] = c.fim.numerical_rank;
  j["eigenvalues"] = c.fim.eigenvalues;
  if (const auto* s = std::get_if<Singular>(&c.verdict)) {
    j["alpha"] = s->certificate.alpha;
    j["gamma"] = s->certificate.gamma;
    j["null_ratio"] = s->certificate.raw_ratio;
    j["deviation"] = s->certificate.max_invariance_deviation;
    j["null_vector"] = s->null_vector;
    j["pointwise_residual"] = s->certificate.pointwise_residual;
    j["t_samples"] = s->certificate.t_samples;
    j["theta_samples"] = s->certificate.theta_samples;
  } else if (const auto* e = std::get_if<InconsistentEvidence>(&c.verdict)) {
    j["alpha"] = e->best_alpha;
    j["deviation"] = e->deviation;
    j["null_space_dim"] = e->null_space_dim;
    j["reason"] = e->reason;
  }
  return j;
}

inline json fit_result_to_json(const FitResult& r) {
  json j;
  j["mu"] = r.mu;
  j["lambda"] = r.lambda;
  j["concentrations"] = r.concentrations ? family_to_json(*r.concentrations) : json(nullptr);
  j["free_concentrations"] = r.free_concentrations;
  j["log_likelihood"] = r.log_likelihood;
  j["init_log_likelihood"] = r.init_log_likelihood;
  j["iterations"] = r.iterations;
  j["starts"] = r.starts;
  j["converged"] = r.converged;
  j["constraint_active"] = r.constraint_active;
  return j;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// CSV with header theta1..thetad, radians.
inline void write_samples_csv(std::ostream& os, const std::vector<AngleVector>& samples, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i) os << (i ? "," : "") << "theta" << (i + 1);
  os << '\n';
  for (const auto& x : samples) {
    for (std::size_t i = 0; i < d; ++i) os << (i ? "," : "") << format_double(x[i]);
    os << '\n';
  }
}

inline void write_rate_csv(std::ostream& os, const RateTable& t) {
  os << "n,rmse_lambda,rmse_mu,reps\n";
  for (const auto& r : t.rows) {
    os << r.n << ',' << format_double(r.rmse_lambda) << ',' << format_double(r.rmse_mu) << ',' << r.replications << '\n';
  }
}

inline json rate_table_to_json(const RateTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"n", r.n}, {"rmse_lambda", r.rmse_lambda}, {"rmse_mu", r.rmse_mu}, {"reps", r.replications},
                    {"excluded", r.excluded}});
  }
  return {{"rows", rows}, {"slope_lambda", t.fitted_slope_lambda}, {"slope_mu", t.fitted_slope_mu}, {"seed", t.seed}};
}

}  // namespace torskew
