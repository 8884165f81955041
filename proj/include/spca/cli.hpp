#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spca/config.hpp"
#include "spca/covariance.hpp"
#include "spca/csv.hpp"
#include "spca/deviation.hpp"
#include "spca/error.hpp"
#include "spca/experiment.hpp"
#include "spca/solver.hpp"

namespace spca::cli {

enum ExitCode : int { ok = 0, input_error = 2, runtime_error = 3 };

struct FitRequest {
  std::string input_path;
  std::optional<double> delta;  // nullopt: estimate from the mask
  LambdaChoice lambda{LambdaRule::data_driven, 0.0};
  std::optional<double> sigma1;  // required by the theoretical rule
  std::optional<double> sigma2;
  SbarChoice sbar;
  SolverChoice solver = SolverChoice::automatic;
  double C = 1.0;
  std::string output_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  int max_iterations = 500;
  double tolerance = 1e-12;
  int restarts = 4;
};

struct SimulateRequest {
  std::string config_path;
  std::string output_path;
  std::string metadata_path;  // empty: output_path + ".json"
  unsigned threads = 1;
};

struct DeviationRequest {
  std::string config_path;
  std::string output_path;
  std::string metadata_path;  // empty: output_path + ".json"
};

namespace detail {

/// One machine-readable line per failure: `error <TOKEN>: <message>`.
inline void report(std::ostream& err, std::string_view token, const std::string& message) {
  err << "error " << token << ": " << message << '\n';
}

inline int fail(std::ostream& err, std::string_view token, const std::string& message, int code) {
  report(err, token, message);
  return code;
}

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse_error:
    case ErrorCode::invalid_argument:
    case ErrorCode::dimension_mismatch:
      return input_error;
    default:
      return runtime_error;
  }
}

inline bool write_text(const std::string& path, const std::string& text, std::ostream& err) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    report(err, "IO_ERROR", "cannot write '" + path + "'");
    return false;
  }
  return true;
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

/**
 * Reads a CSV, debiases its covariance, tunes lambda and sbar, solves, and writes a
 * JSON summary. Support indices in the output are 0-based column positions.
 */
inline int cmd_fit(const FitRequest& req, std::ostream& err) {
  using detail::fail;
  std::optional<MaskedSample> sample;
  try {
    sample = read_masked_csv(req.input_path);
  } catch (const Error& e) {
    return fail(err, "PARSE_ERROR", e.what(), input_error);
  }
  if (sample->n() < 2) return fail(err, "TOO_FEW_ROWS", "need at least 2 observations", input_error);
  if (req.delta && !(*req.delta > 0.0 && *req.delta <= 1.0))
    return fail(err, "BAD_DELTA", "delta must lie in (0, 1]", input_error);
  if (req.sbar.mode == SbarChoice::Mode::fixed && (req.sbar.value < 1 || req.sbar.value > sample->p()))
    return fail(err, "BAD_SBAR", "sbar must lie in [1, p]", input_error);
  if (req.lambda.rule == LambdaRule::theoretical && (!req.sigma1 || !req.sigma2))
    return fail(err, "MISSING_SIGMA", "the theoretical rule needs --sigma1 and --sigma2", input_error);
  if (req.lambda.rule == LambdaRule::fixed && !(req.lambda.fixed_value >= 0.0))
    return fail(err, "BAD_LAMBDA", "lambda must be >= 0", input_error);
  if (!(req.C > 0.0)) return fail(err, "BAD_CONSTANT", "C must be positive", input_error);

  const auto missing = unobserved_columns(*sample);
  if (!missing.empty())
    return fail(err, "ALL_MISSING_COLUMN",
                "column " + std::to_string(missing.front()) + " has no observed entries", runtime_error);

  try {
    const Index n = sample->n(), p = sample->p();
    const double delta = req.delta.value_or(estimate_delta(*sample));
    const auto sigma_tilde = debias_covariance(empirical_covariance(*sample), delta);
    const auto summary = spectral_summary(sigma_tilde, 1);
    const double s1 = summary.eigenvalues[0];
    const std::optional<double> s2 = p >= 2 ? std::optional<double>(summary.eigenvalues[1]) : std::nullopt;

    double lambda = 0.0;
    switch (req.lambda.rule) {
      case LambdaRule::theoretical:
        lambda = theoretical_lambda(*req.sigma1, *req.sigma2, p, n, delta, req.C);
        break;
      case LambdaRule::data_driven:
        lambda = data_driven_lambda(summary, n, delta, req.C).lambda;
        break;
      case LambdaRule::fixed:
        lambda = req.lambda.fixed_value;
        break;
    }

    std::optional<Index> sbar;
    switch (req.sbar.mode) {
      case SbarChoice::Mode::default_formula: sbar = default_sbar(n, p, delta); break;
      case SbarChoice::Mode::fixed: sbar = req.sbar.value; break;
      case SbarChoice::Mode::unconstrained: break;
    }
    const Index smax = std::min(sbar.value_or(p), p);
    const SolverKind kind = choose_solver(req.solver, p, smax);
    std::string reason = "requested";
    if (req.solver == SolverChoice::automatic)
      reason = kind == SolverKind::exact ? "enumeration fits the budget" : "enumeration exceeds the budget";

    SolverConfig config;
    config.lambda = lambda;
    config.sbar = sbar;
    config.max_iterations = req.max_iterations;
    config.tolerance = req.tolerance;
    config.restarts = req.restarts;
    config.threads = req.threads;
    if (kind == SolverKind::truncated_power && req.restarts > 1 && !req.seed)
      return fail(err, "MISSING_SEED", "random restarts need --seed", input_error);
    config.seed = req.seed.value_or(0);

    const SolverResult fit =
        kind == SolverKind::exact ? exact_l0_pca(sigma_tilde, lambda, sbar) : truncated_power_l0_pca(sigma_tilde, config);

    nlohmann::json j;
    j["n"] = n;
    j["p"] = p;
    j["delta"] = {{"value", delta}, {"mode", req.delta ? "fixed" : "estimate"}};
    j["debiased"] = delta < 1.0;
    j["lambda"] = {{"value", lambda}, {"rule", to_string(req.lambda)}, {"C", req.C}};
    j["sbar"] = {{"value", sbar ? nlohmann::json(*sbar) : nlohmann::json(nullptr)}, {"mode", to_string(req.sbar)}};
    j["solver"] = {{"requested", to_string(req.solver)}, {"used", to_string(kind)}, {"reason", reason}};
    j["estimate"] = {{"dim", fit.estimate.dim()}, {"support", fit.estimate.support()}, {"values", fit.estimate.values()}};
    j["objective"] = fit.objective;
    j["sigma_hat_1"] = s1;
    j["sigma_hat_2"] = s2 ? nlohmann::json(*s2) : nlohmann::json(nullptr);
    j["effective_rank"] = summary.effective_rank;
    j["diagnostics"] = {{"iterations", fit.iterations_used},
                        {"solver_kind", to_string(fit.solver_kind)},
                        {"restarts", kind == SolverKind::truncated_power ? config.restarts : 0},
                        {"seed", req.seed ? nlohmann::json(*req.seed) : nlohmann::json(nullptr)}};
    if (!detail::write_text(req.output_path, detail::dump(j), err)) return runtime_error;
    return ok;
  } catch (const Error& e) {
    return fail(err, to_string(e.code()), e.what(), detail::exit_code_for(e.code()));
  }
}

namespace detail {

template <class T, class Parse>
std::optional<T> load_config(const std::string& path, std::ostream& err, Parse&& parse) {
  std::ifstream in(path);
  if (!in) {
    report(err, "BAD_CONFIG", "cannot open '" + path + "'");
    return std::nullopt;
  }
  try {
    return parse(in);
  } catch (const ConfigError& e) {
    for (const auto& issue : e.issues())
      report(err, issue.token, (issue.line ? "line " + std::to_string(issue.line) + ": " : "") + issue.message);
  } catch (const Error& e) {
    report(err, "BAD_CONFIG", e.what());
  }
  return std::nullopt;
}

}  // namespace detail

/// Runs a grid config; failed cells are flagged in the report and do not change the exit code.
inline int cmd_simulate(const SimulateRequest& req, std::ostream& err) {
  auto grid = detail::load_config<ExperimentGrid>(req.config_path, err,
                                                  [](std::istream& in) { return grid_from_config(in); });
  if (!grid) return input_error;
  grid->threads = req.threads;
  const std::size_t total = grid->cell_count();
  try {
    const auto report = run_rate_experiment(*grid, [&](const CellRecord& c) {
      err << "cell " << c.cell + 1 << '/' << total << " n=" << c.n << " p=" << c.p << " s=" << c.s
          << " delta=" << spca::detail::format_double(c.delta) << ' '
          << (c.ok ? "ok mean_loss=" + spca::detail::format_double(c.mean_loss) : "failed " + c.failure) << '\n';
    });
    std::ostringstream csv;
    write_report_csv(csv, report);
    const std::string meta_path = req.metadata_path.empty() ? req.output_path + ".json" : req.metadata_path;
    if (!detail::write_text(req.output_path, csv.str(), err)) return runtime_error;
    if (!detail::write_text(meta_path, detail::dump(report_metadata(report)), err)) return runtime_error;
    return ok;
  } catch (const Error& e) {
    return detail::fail(err, to_string(e.code()), e.what(), detail::exit_code_for(e.code()));
  }
}

inline int cmd_deviation(const DeviationRequest& req, std::ostream& err) {
  auto config = detail::load_config<DeviationConfig>(req.config_path, err,
                                                     [](std::istream& in) { return deviation_from_config(in); });
  if (!config) return input_error;
  try {
    const auto profile = deviation_profile(*config);
    std::ostringstream csv;
    write_profile_csv(csv, profile);
    const nlohmann::json meta = {{"n", config->n},         {"p", config->p},
                                 {"s", config->theta_sparsity}, {"delta", config->delta},
                                 {"sigma1", config->sigma1}, {"sigma2", config->sigma2},
                                 {"seed", config->seed},     {"t", profile.t},
                                 {"theta", to_string(config->theta_mode)},
                                 {"s_values", profile.s_values}};
    const std::string meta_path = req.metadata_path.empty() ? req.output_path + ".json" : req.metadata_path;
    if (!detail::write_text(req.output_path, csv.str(), err)) return runtime_error;
    if (!detail::write_text(meta_path, detail::dump(meta), err)) return runtime_error;
    return ok;
  } catch (const Error& e) {
    return detail::fail(err, to_string(e.code()), e.what(), detail::exit_code_for(e.code()));
  }
}

/// Entry point for the `spca` binary: subcommands fit, simulate and deviation.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Sparse leading principal component estimation with missing observations", "spca"};
  app.require_subcommand(1);

  FitRequest fit;
  std::string delta_text = "estimate", lambda_rule = "data_driven", sbar_text = "default", solver_text = "auto";
  std::optional<double> lambda_value;
  std::optional<std::uint64_t> fit_seed;
  auto* fit_cmd = app.add_subcommand("fit", "Estimate the sparse leading component of a CSV dataset");
  fit_cmd->add_option("--input", fit.input_path, "CSV file: rows = observations, columns = variables")->required();
  fit_cmd->add_option("--output", fit.output_path, "JSON result path")->required();
  fit_cmd->add_option("--delta", delta_text, "Observation rate in (0,1], or 'estimate'");
  fit_cmd->add_option("--lambda-rule", lambda_rule, "theoretical | data_driven | fixed")
      ->check(CLI::IsMember({"theoretical", "data_driven", "fixed"}));
  fit_cmd->add_option("--lambda", lambda_value, "Penalty for --lambda-rule fixed");
  fit_cmd->add_option("--sigma1", fit.sigma1, "Leading eigenvalue for the theoretical rule");
  fit_cmd->add_option("--sigma2", fit.sigma2, "Second eigenvalue for the theoretical rule");
  fit_cmd->add_option("--sbar", sbar_text, "default | unconstrained | <count>");
  fit_cmd->add_option("--solver", solver_text, "auto | exact | truncated_power")
      ->check(CLI::IsMember({"auto", "exact", "truncated_power"}));
  fit_cmd->add_option("-C,--constant", fit.C, "Penalty constant C");
  fit_cmd->add_option("--seed", fit_seed, "Seed for random restarts");
  fit_cmd->add_option("--threads", fit.threads, "Worker threads for restarts");
  fit_cmd->add_option("--max-iterations", fit.max_iterations);
  fit_cmd->add_option("--tolerance", fit.tolerance);
  fit_cmd->add_option("--restarts", fit.restarts);

  SimulateRequest sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo rate experiment from a grid config");
  sim_cmd->add_option("--config", sim.config_path, "Grid config file")->required();
  sim_cmd->add_option("--output", sim.output_path, "Report CSV path")->required();
  sim_cmd->add_option("--metadata", sim.metadata_path, "Metadata JSON path (default: <output>.json)");
  sim_cmd->add_option("--threads", sim.threads, "Worker threads for replicates");

  DeviationRequest dev;
  auto* dev_cmd = app.add_subcommand("deviation", "Measure the sparse deviation profile of a simulated dataset");
  dev_cmd->add_option("--config", dev.config_path, "Deviation config file")->required();
  dev_cmd->add_option("--output", dev.output_path, "Profile CSV path")->required();
  dev_cmd->add_option("--metadata", dev.metadata_path, "Metadata JSON path (default: <output>.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, err);
    return code == 0 ? ok : input_error;
  }

  if (*sim_cmd) return cmd_simulate(sim, err);
  if (*dev_cmd) return cmd_deviation(dev, err);

  if (delta_text != "estimate") {
    const auto d = spca::detail::parse_double(delta_text);
    if (!d) return detail::fail(err, "BAD_DELTA", "--delta must be a number or 'estimate'", input_error);
    fit.delta = *d;
  }
  if (lambda_rule == "theoretical") {
    fit.lambda.rule = LambdaRule::theoretical;
  } else if (lambda_rule == "fixed") {
    if (!lambda_value) return detail::fail(err, "MISSING_LAMBDA", "--lambda-rule fixed needs --lambda", input_error);
    fit.lambda = {LambdaRule::fixed, *lambda_value};
  } else {
    fit.lambda.rule = LambdaRule::data_driven;
  }
  if (sbar_text == "default") {
    fit.sbar.mode = SbarChoice::Mode::default_formula;
  } else if (sbar_text == "unconstrained") {
    fit.sbar.mode = SbarChoice::Mode::unconstrained;
  } else {
    Index v = 0;
    const auto [ptr, ec] = std::from_chars(sbar_text.data(), sbar_text.data() + sbar_text.size(), v);
    if (ec != std::errc() || ptr != sbar_text.data() + sbar_text.size())
      return detail::fail(err, "BAD_SBAR", "--sbar must be 'default', 'unconstrained' or a count", input_error);
    fit.sbar = {SbarChoice::Mode::fixed, v};
  }
  fit.solver = solver_text == "exact"             ? SolverChoice::exact
               : solver_text == "truncated_power" ? SolverChoice::truncated_power
                                                  : SolverChoice::automatic;
  fit.seed = fit_seed;
  return cmd_fit(fit, err);
}

}  // namespace spca::cli
