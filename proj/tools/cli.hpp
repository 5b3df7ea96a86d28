#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "torskew/torskew.hpp"

namespace torskew::cli {

enum ExitCode : int { kOk = 0, kDomainError = 1, kAccuracyError = 2 };

struct RunConfig {
  std::string command;
  std::vector<std::string> model_paths;
  std::string out_path;  // empty: stdout
  std::string data_path;
  std::size_t grid_n = 128;
  double tol = kDefaultEigenTol;
  double invariance_tol = 1e-6;
  std::uint64_t seed = 0;
  std::size_t n = 1000;
  std::size_t reps = 200;
  std::vector<std::size_t> n_grid{500, 2000, 8000, 32000};
  std::vector<std::string> at;  // density evaluation points, "t1,t2,..."
  unsigned threads = 0;
  bool degrees = false;
  bool free_concentrations = false;
};

inline json config_to_json(const RunConfig& c) {
  return {{"command", c.command},
          {"model", c.model_paths},
          {"out", c.out_path},
          {"data", c.data_path},
          {"grid_N", c.grid_n},
          {"tol", c.tol},
          {"invariance_tol", c.invariance_tol},
          {"seed", c.seed},
          {"n", c.n},
          {"reps", c.reps},
          {"n_grid", c.n_grid},
          {"at", c.at},
          {"threads", c.threads},
          {"degrees", c.degrees},
          {"free_concentrations", c.free_concentrations}};
}

namespace detail {

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read model descriptor '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DescriptorError(path + ": " + e.what());
  }
}

inline std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DomainError(what + ": '" + item + "' is not a number");
    }
  }
  return out;
}

inline std::vector<AngleVector> read_angle_csv(const std::string& path, bool degrees) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read data file '" + path + "'");
  std::vector<AngleVector> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && !(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-' || line[0] == '+' || line[0] == '.')) {
      continue;  // header
    }
    std::vector<double> x = parse_number_list(line, path + ":" + std::to_string(lineno));
    if (degrees) {
      for (double& v : x) v *= kPi / 180.0;
    }
    if (!out.empty() && x.size() != out.front().dim()) {
      throw DomainError(path + ":" + std::to_string(lineno) + ": inconsistent number of columns");
    }
    out.emplace_back(std::move(x));
  }
  if (out.empty()) throw DomainError("data file '" + path + "' has no rows");
  return out;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw DomainError("cannot write output file '" + path + "'");
    }
  }
  std::ostream& stream(std::ostream& fallback) { return file_.is_open() ? file_ : fallback; }

 private:
  std::ofstream file_;
};

inline void emit_json(const json& j, const std::string& path, std::ostream& out) {
  Output o(path);
  o.stream(out) << j.dump(2) << '\n';
}

struct LoadedModel {
  json descriptor;
  SkewDescriptor parsed;
};

inline LoadedModel load_model(const RunConfig& cfg, std::size_t index = 0) {
  if (cfg.model_paths.size() <= index) throw DomainError("--model is required");
  LoadedModel m;
  m.descriptor = read_json_file(cfg.model_paths[index]);
  m.parsed = skew_descriptor_from_json(m.descriptor, cfg.degrees);
  return m;
}

inline NormalizationOptions norm_options(const RunConfig& cfg) {
  NormalizationOptions o;
  o.exec.threads = cfg.threads;
  return o;
}

inline SkewModel build_model(const RunConfig& cfg, const SkewDescriptor& d) {
  BaseDensity base(d.family, norm_options(cfg));
  SkewOptions so;
  so.exec.threads = cfg.threads;
  return SkewModel(std::move(base), AngleVector(d.mu), d.lambda, d.mechanism, so);
}

inline json header(const RunConfig& cfg) { return {{"config", config_to_json(cfg)}}; }

inline int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const LoadedModel m = load_model(cfg);
  json j = header(cfg);
  j["model"] = m.descriptor;
  const BaseDensity base(m.parsed.family, norm_options(cfg));
  j["normalization"] = normalization_to_json(base.normalization());
  if (auto v = validate(base.dim(), m.parsed.lambda, m.parsed.mechanism)) {
    j["valid"] = false;
    j["violation"] = {{"constraint", v->constraint}, {"value", v->value}, {"limit", v->limit}, {"message", v->message}};
    emit_json(j, cfg.out_path, out);
    err << "invalid model: " << v->message << " (constraint " << v->constraint << ")\n";
    return kDomainError;
  }
  j["valid"] = true;
  j["violation"] = nullptr;
  emit_json(j, cfg.out_path, out);
  return kOk;
}

inline int cmd_density(const RunConfig& cfg, std::ostream& out) {
  const LoadedModel m = load_model(cfg);
  const SkewModel model = build_model(cfg, m.parsed);
  std::vector<AngleVector> points;
  for (const auto& a : cfg.at) {
    std::vector<double> x = parse_number_list(a, "--at");
    if (cfg.degrees) {
      for (double& v : x) v *= kPi / 180.0;
    }
    points.emplace_back(std::move(x));
  }
  if (!cfg.data_path.empty()) {
    auto more = read_angle_csv(cfg.data_path, cfg.degrees);
    points.insert(points.end(), more.begin(), more.end());
  }
  if (points.empty()) throw DomainError("density: give evaluation points with --at or --data");
  json rows = json::array();
  for (const auto& p : points) {
    if (p.dim() != model.dim()) throw DomainError("density: point dimension does not match the model");
    const double ld = model.log_density(p);
    rows.push_back({{"theta", p.values()},
                    {"log_density", std::isfinite(ld) ? json(ld) : json("-inf")},
                    {"density", std::exp(ld)},
                    {"log_base_density", model.base().log_density(angle_diff(p, model.mu()))}});
  }
  json j = header(cfg);
  j["model"] = skew_model_to_json(model);
  j["normalization"] = normalization_to_json(model.base().normalization());
  j["log_mechanism_constant"] = model.log_mechanism_constant();
  j["points"] = rows;
  emit_json(j, cfg.out_path, out);
  return kOk;
}

inline int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const LoadedModel m = load_model(cfg);
  const SkewModel model = build_model(cfg, m.parsed);
  SampleOptions so;
  so.exec.threads = cfg.threads;
  const auto draws = sample(model, cfg.n, cfg.seed, so);
  {
    Output o(cfg.out_path);
    write_samples_csv(o.stream(out), draws, model.dim());
  }
  json meta = header(cfg);
  meta["model"] = skew_model_to_json(model);
  meta["rows"] = draws.size();
  if (cfg.out_path.empty()) {
    err << meta.dump() << '\n';
  } else {
    emit_json(meta, cfg.out_path + ".json", out);
  }
  return kOk;
}

inline int cmd_fim(const RunConfig& cfg, std::ostream& out) {
  const LoadedModel m = load_model(cfg);
  const BaseDensity base(m.parsed.family, norm_options(cfg));
  FimOptions fo;
  fo.skew_scale = skew_score_scale(m.parsed.mechanism);
  fo.check_doubling = true;
  fo.exec.threads = cfg.threads;
  const FimReport report = analyze_fim(base, AngleVector(m.parsed.mu), cfg.grid_n, cfg.tol, fo);
  json j = header(cfg);
  j["model"] = m.descriptor;
  j["fim"] = fim_report_to_json(report);
  emit_json(j, cfg.out_path, out);
  return kOk;
}

inline int cmd_characterize(const RunConfig& cfg, std::ostream& out) {
  const LoadedModel m = load_model(cfg);
  const BaseDensity base(m.parsed.family, norm_options(cfg));
  CharacterizeOptions co;
  co.eigen_tol = cfg.tol;
  co.invariance_tol = cfg.invariance_tol;
  co.mechanism = m.parsed.mechanism;
  co.exec.threads = cfg.threads;
  const Characterization c = characterize(base, cfg.grid_n, co);
  json j = verdict_to_json(c);
  j["config"] = config_to_json(cfg);
  j["model"] = m.descriptor;
  emit_json(j, cfg.out_path, out);
  return kOk;
}

inline int cmd_fit(const RunConfig& cfg, std::ostream& out) {
  const LoadedModel m = load_model(cfg);
  if (cfg.data_path.empty()) throw DomainError("fit: --data is required");
  const auto data = read_angle_csv(cfg.data_path, cfg.degrees);
  const SkewModel init = build_model(cfg, m.parsed);
  FitOptions fo;
  fo.free_concentrations = cfg.free_concentrations;
  const FitResult r = fit_mle(data, init, fo);
  json j = header(cfg);
  j["init"] = skew_model_to_json(init);
  j["n"] = data.size();
  j["fit"] = fit_result_to_json(r);
  emit_json(j, cfg.out_path, out);
  return kOk;
}

inline int cmd_rates(const RunConfig& cfg, std::ostream& out) {
  if (cfg.model_paths.empty()) throw DomainError("--model is required");
  if (cfg.out_path.empty()) throw DomainError("rates: --out must name an output directory");
  std::filesystem::create_directories(cfg.out_path);
  RateOptions ro;
  ro.exec.threads = cfg.threads;
  json summary = header(cfg);
  summary["experiments"] = json::array();
  for (std::size_t k = 0; k < cfg.model_paths.size(); ++k) {
    const LoadedModel m = load_model(cfg, k);
    const SkewModel truth = build_model(cfg, m.parsed);
    const RateTable t = rate_experiment(truth, cfg.n_grid, cfg.reps, cfg.seed, ro);
    const std::string csv = "rates_" + std::to_string(k) + "_" + std::string(truth.base().name()) + ".csv";
    {
      std::ofstream f(std::filesystem::path(cfg.out_path) / csv);
      if (!f) throw DomainError("cannot write " + csv);
      write_rate_csv(f, t);
    }
    json e = rate_table_to_json(t);
    e["model"] = skew_model_to_json(truth);
    e["csv"] = csv;
    summary["experiments"].push_back(e);
  }
  emit_json(summary, (std::filesystem::path(cfg.out_path) / "summary.json").string(), out);
  return kOk;
}

}  // namespace detail

/// Dispatches one command. Exit codes: 0 success, 1 domain errors, 2 accuracy or
/// resource errors.
inline int run(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (cfg.command == "validate") return detail::cmd_validate(cfg, out, err);
    if (cfg.command == "density") return detail::cmd_density(cfg, out);
    if (cfg.command == "sample") return detail::cmd_sample(cfg, out, err);
    if (cfg.command == "fim") return detail::cmd_fim(cfg, out);
    if (cfg.command == "characterize") return detail::cmd_characterize(cfg, out);
    if (cfg.command == "fit") return detail::cmd_fit(cfg, out);
    if (cfg.command == "rates") return detail::cmd_rates(cfg, out);
    err << "unknown command '" << cfg.command << "'\n";
    return kDomainError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kDomainError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kAccuracyError;
  }
}

/// Builds the CLI11 app; subcommands share one flag set.
inline void configure(CLI::App& app, RunConfig& cfg) {
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"validate", "check a model descriptor and its skewness constraint"},
      {"density", "evaluate the (skewed) density at points"},
      {"sample", "draw samples by rejection (CSV)"},
      {"fim", "Fisher information at lambda = 0 with eigen-diagnosis"},
      {"characterize", "singular / nonsingular verdict with line-invariance certificate"},
      {"fit", "constrained maximum likelihood fit"},
      {"rates", "convergence-rate experiment (CSV per model + summary.json)"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->callback([&cfg, name = name] { cfg.command = name; });
    sub->add_option("--model", cfg.model_paths, "model descriptor JSON (repeat for rates)")->required();
    sub->add_option("--out", cfg.out_path, "output file (directory for rates)");
    sub->add_option("--data", cfg.data_path, "CSV of angles (fit, density)");
    sub->add_option("--grid-n", cfg.grid_n, "quadrature points per dimension")->capture_default_str();
    sub->add_option("--tol", cfg.tol, "relative eigenvalue tolerance")->capture_default_str();
    sub->add_option("--invariance-tol", cfg.invariance_tol, "h0 invariance tolerance")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
    sub->add_option("--n", cfg.n, "number of samples")->capture_default_str();
    sub->add_option("--reps", cfg.reps, "replications per sample size")->capture_default_str();
    sub->add_option("--n-grid", cfg.n_grid, "sample sizes, e.g. 500,2000,8000")->delimiter(',');
    sub->add_option("--at", cfg.at, "evaluation point 't1,t2,...' (repeatable)");
    sub->add_option("--threads", cfg.threads, "worker cap (0 = all cores)")->capture_default_str();
    sub->add_flag("--degrees", cfg.degrees, "angles in the input are in degrees");
    sub->add_flag("--free-concentrations", cfg.free_concentrations, "fit: estimate concentrations too");
  }
}

}  // namespace torskew::cli
