#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "spca/csv.hpp"
#include "spca/deviation.hpp"
#include "spca/error.hpp"
#include "spca/experiment.hpp"

namespace spca {

struct ConfigIssue {
  std::string token;  // e.g. BAD_DELTA, MISSING_KEY
  std::size_t line = 0;  // 0 when the issue is not tied to a line
  std::string message;
};

/// Every schema violation found in a config file, in line order.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : Error(ErrorCode::invalid_argument, summarize(issues)), issues_(std::move(issues)) {}

  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string summarize(const std::vector<ConfigIssue>& issues) {
    std::string out;
    for (const auto& i : issues) {
      if (!out.empty()) out += "; ";
      out += i.token + " (line " + std::to_string(i.line) + "): " + i.message;
    }
    return out;
  }

  std::vector<ConfigIssue> issues_;
};

/**
 * `key = value` lines; `#` starts a comment; blank lines are ignored. Keys are
 * case-sensitive and may appear once.
 */
class KeyValueConfig {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string_view line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        cfg.issues_.push_back({"BAD_SYNTAX", line_no, "expected 'key = value'"});
        continue;
      }
      const std::string key(detail::trim(line.substr(0, eq)));
      const std::string value(detail::trim(line.substr(eq + 1)));
      if (key.empty()) {
        cfg.issues_.push_back({"BAD_SYNTAX", line_no, "empty key"});
      } else if (cfg.entries_.count(key)) {
        cfg.issues_.push_back({"DUPLICATE_KEY", line_no,
                               "'" + key + "' already set on line " + std::to_string(cfg.entries_[key].line)});
      } else {
        cfg.entries_[key] = {value, line_no};
      }
    }
    return cfg;
  }

  const Entry* find(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  void issue(std::string token, std::size_t line, std::string message) {
    issues_.push_back({std::move(token), line, std::move(message)});
  }

  void check_known(const std::set<std::string>& known) {
    for (const auto& [key, entry] : entries_)
      if (!known.count(key)) issue("UNKNOWN_KEY", entry.line, "unknown key '" + key + "'");
  }

  /// Throws ConfigError if anything was recorded.
  void finish() const {
    if (issues_.empty()) return;
    auto sorted = issues_;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.line < b.line; });
    throw ConfigError(std::move(sorted));
  }

 private:
  std::map<std::string, Entry> entries_;
  std::vector<ConfigIssue> issues_;
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(KeyValueConfig& cfg) : cfg_(cfg) {}

  const KeyValueConfig::Entry* required(const std::string& key) {
    const auto* e = cfg_.find(key);
    if (!e) cfg_.issue("MISSING_KEY", 0, "required key '" + key + "' is missing");
    return e;
  }

  std::optional<double> real(const KeyValueConfig::Entry* e, const std::string& key) {
    if (!e) return std::nullopt;
    if (auto v = parse_double(e->value)) return v;
    cfg_.issue("BAD_VALUE", e->line, "'" + key + "' must be a number, got '" + e->value + "'");
    return std::nullopt;
  }

  std::optional<std::int64_t> integer(const KeyValueConfig::Entry* e, const std::string& key,
                                      std::string_view value) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec == std::errc() && ptr == value.data() + value.size()) return v;
    cfg_.issue("BAD_VALUE", e->line, "'" + key + "' must be an integer, got '" + std::string(value) + "'");
    return std::nullopt;
  }

  std::optional<std::uint64_t> seed(const KeyValueConfig::Entry* e) {
    if (!e) return std::nullopt;
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
    if (ec == std::errc() && ptr == e->value.data() + e->value.size()) return v;
    cfg_.issue("BAD_VALUE", e->line, "'seed' must be a nonnegative integer, got '" + e->value + "'");
    return std::nullopt;
  }

  std::vector<Index> index_list(const KeyValueConfig::Entry* e, const std::string& key, Index min_value) {
    std::vector<Index> out;
    if (!e) return out;
    for (auto field : split_fields(e->value)) {
      const auto v = integer(e, key, field);
      if (!v) return {};
      if (*v < min_value) {
        cfg_.issue("BAD_VALUE", e->line, "'" + key + "' values must be >= " + std::to_string(min_value));
        return {};
      }
      out.push_back(static_cast<Index>(*v));
    }
    return out;
  }

  std::vector<double> delta_list(const KeyValueConfig::Entry* e, const std::string& key) {
    std::vector<double> out;
    if (!e) return out;
    for (auto field : split_fields(e->value)) {
      const auto v = parse_double(field);
      if (!v || !(*v > 0.0 && *v <= 1.0)) {
        cfg_.issue("BAD_DELTA", e->line, "'" + key + "' values must lie in (0, 1], got '" + std::string(field) + "'");
        return {};
      }
      out.push_back(*v);
    }
    return out;
  }

  template <class Enum>
  std::optional<Enum> choice(const std::string& key, const std::map<std::string, Enum>& options) {
    const auto* e = cfg_.find(key);
    if (!e) return std::nullopt;
    const auto it = options.find(e->value);
    if (it != options.end()) return it->second;
    std::string allowed;
    for (const auto& [name, _] : options) allowed += (allowed.empty() ? "" : ", ") + name;
    cfg_.issue("BAD_VALUE", e->line, "'" + key + "' must be one of {" + allowed + "}, got '" + e->value + "'");
    return std::nullopt;
  }

  KeyValueConfig& cfg() { return cfg_; }

 private:
  KeyValueConfig& cfg_;
};

inline std::optional<ThetaMode> theta_choice(ConfigReader& r) {
  return r.choice<ThetaMode>("theta", {{"flat", ThetaMode::flat}, {"random", ThetaMode::seeded_random}});
}

}  // namespace detail

/**
 * Simulation grid schema.
 *
 * Required: n, p, s (comma-separated integer lists), delta (comma-separated list in
 * (0, 1]), sigma1, sigma2, replicates, seed.
 * Optional: lambda_rule (theoretical | data_driven | fixed), lambda (with fixed), C,
 * estimator (penalized | oracle | one_sparse), sbar (default | unconstrained | integer),
 * solver (auto | exact | truncated_power), theta (flat | random), delta_mode
 * (known | estimate), max_iterations, tolerance, restarts.
 */
inline ExperimentGrid grid_from_config(KeyValueConfig cfg) {
  cfg.check_known({"n", "p", "s", "delta", "sigma1", "sigma2", "replicates", "seed", "lambda_rule", "lambda", "C",
                   "estimator", "sbar", "solver", "theta", "delta_mode", "max_iterations", "tolerance", "restarts"});
  detail::ConfigReader r(cfg);
  ExperimentGrid g;
  g.n_values = r.index_list(r.required("n"), "n", 1);
  g.p_values = r.index_list(r.required("p"), "p", 1);
  g.s_values = r.index_list(r.required("s"), "s", 1);
  g.delta_values = r.delta_list(r.required("delta"), "delta");

  const auto* s1 = r.required("sigma1");
  const auto* s2 = r.required("sigma2");
  const auto sigma1 = r.real(s1, "sigma1");
  const auto sigma2 = r.real(s2, "sigma2");
  if (sigma1 && sigma2) {
    if (!(*sigma2 >= 0.0 && *sigma1 > *sigma2))
      cfg.issue("BAD_SIGMA", s1->line, "need sigma1 > sigma2 >= 0");
    g.sigma1 = *sigma1;
    g.sigma2 = *sigma2;
  }

  if (const auto* e = r.required("replicates")) {
    if (auto v = r.integer(e, "replicates", e->value)) {
      if (*v < 1) cfg.issue("BAD_VALUE", e->line, "'replicates' must be >= 1");
      g.replicates = static_cast<int>(*v);
    }
  }
  if (auto seed = r.seed(r.required("seed"))) g.root_seed = *seed;

  if (auto rule = r.choice<LambdaRule>("lambda_rule", {{"theoretical", LambdaRule::theoretical},
                                                        {"data_driven", LambdaRule::data_driven},
                                                        {"fixed", LambdaRule::fixed}}))
    g.lambda.rule = *rule;
  if (g.lambda.rule == LambdaRule::fixed) {
    const auto* e = cfg.find("lambda");
    if (!e) {
      cfg.issue("MISSING_KEY", cfg.find("lambda_rule")->line, "lambda_rule = fixed needs 'lambda'");
    } else if (auto v = r.real(e, "lambda")) {
      if (*v < 0.0) cfg.issue("BAD_VALUE", e->line, "'lambda' must be >= 0");
      g.lambda.fixed_value = *v;
    }
  }
  if (const auto* e = cfg.find("C")) {
    if (auto v = r.real(e, "C")) {
      if (!(*v > 0.0)) cfg.issue("BAD_VALUE", e->line, "'C' must be positive");
      g.C = *v;
    }
  }
  if (auto est = r.choice<Estimator>("estimator", {{"penalized", Estimator::penalized},
                                                   {"oracle", Estimator::oracle},
                                                   {"one_sparse", Estimator::one_sparse}}))
    g.estimator = *est;
  if (const auto* e = cfg.find("sbar")) {
    if (e->value == "default") {
      g.sbar.mode = SbarChoice::Mode::default_formula;
    } else if (e->value == "unconstrained") {
      g.sbar.mode = SbarChoice::Mode::unconstrained;
    } else if (auto v = r.integer(e, "sbar", e->value)) {
      if (*v < 1) cfg.issue("BAD_VALUE", e->line, "'sbar' must be >= 1");
      g.sbar = {SbarChoice::Mode::fixed, static_cast<Index>(*v)};
    }
  }
  if (auto s = r.choice<SolverChoice>("solver", {{"auto", SolverChoice::automatic},
                                                 {"exact", SolverChoice::exact},
                                                 {"truncated_power", SolverChoice::truncated_power}}))
    g.solver_choice = *s;
  if (auto t = detail::theta_choice(r)) g.theta_mode = *t;
  if (auto d = r.choice<bool>("delta_mode", {{"known", false}, {"estimate", true}})) g.estimate_delta = *d;
  if (const auto* e = cfg.find("max_iterations"))
    if (auto v = r.integer(e, "max_iterations", e->value)) {
      if (*v < 1) cfg.issue("BAD_VALUE", e->line, "'max_iterations' must be >= 1");
      g.solver.max_iterations = static_cast<int>(*v);
    }
  if (const auto* e = cfg.find("restarts"))
    if (auto v = r.integer(e, "restarts", e->value)) {
      if (*v < 1) cfg.issue("BAD_VALUE", e->line, "'restarts' must be >= 1");
      g.solver.restarts = static_cast<int>(*v);
    }
  if (const auto* e = cfg.find("tolerance"))
    if (auto v = r.real(e, "tolerance")) {
      if (!(*v > 0.0)) cfg.issue("BAD_VALUE", e->line, "'tolerance' must be positive");
      g.solver.tolerance = *v;
    }
  cfg.finish();
  return g;
}

inline ExperimentGrid grid_from_config(std::istream& in) { return grid_from_config(KeyValueConfig::parse(in)); }

/**
 * Deviation study schema.
 *
 * Required: n, p, s (sparsity of theta1), delta, sigma1, sigma2, seed.
 * Optional: s_range (`a..b` or a comma-separated list; default 1..p), t (default
 * log(e p)), theta (flat | random).
 */
inline DeviationConfig deviation_from_config(KeyValueConfig cfg) {
  cfg.check_known({"n", "p", "s", "delta", "sigma1", "sigma2", "seed", "s_range", "t", "theta"});
  detail::ConfigReader r(cfg);
  DeviationConfig d;
  auto single = [&](const char* key, Index min_value) -> std::optional<Index> {
    const auto* e = r.required(key);
    if (!e) return std::nullopt;
    auto v = r.integer(e, key, e->value);
    if (v && *v < min_value) {
      cfg.issue("BAD_VALUE", e->line, std::string("'") + key + "' must be >= " + std::to_string(min_value));
      return std::nullopt;
    }
    return v ? std::optional<Index>(static_cast<Index>(*v)) : std::nullopt;
  };
  if (auto v = single("n", 1)) d.n = *v;
  const auto p = single("p", 1);
  if (p) d.p = *p;
  if (auto v = single("s", 1)) {
    d.theta_sparsity = *v;
    if (p && *v > *p) cfg.issue("BAD_VALUE", cfg.find("s")->line, "'s' must not exceed p");
  }
  if (const auto* e = r.required("delta")) {
    const auto v = detail::parse_double(e->value);
    if (!v || !(*v > 0.0 && *v <= 1.0))
      cfg.issue("BAD_DELTA", e->line, "'delta' must lie in (0, 1], got '" + e->value + "'");
    else
      d.delta = *v;
  }
  const auto* s1 = r.required("sigma1");
  const auto sigma1 = r.real(s1, "sigma1");
  const auto sigma2 = r.real(r.required("sigma2"), "sigma2");
  if (sigma1 && sigma2) {
    if (!(*sigma2 >= 0.0 && *sigma1 > *sigma2)) cfg.issue("BAD_SIGMA", s1->line, "need sigma1 > sigma2 >= 0");
    d.sigma1 = *sigma1;
    d.sigma2 = *sigma2;
  }
  if (auto seed = r.seed(r.required("seed"))) d.seed = *seed;
  if (const auto* e = cfg.find("t")) {
    if (auto v = r.real(e, "t")) {
      if (*v < 0.0) cfg.issue("BAD_VALUE", e->line, "'t' must be >= 0");
      d.t = *v;
    }
  }
  if (auto t = detail::theta_choice(r)) d.theta_mode = *t;

  if (const auto* e = cfg.find("s_range")) {
    const std::string_view value = e->value;
    if (const auto dots = value.find(".."); dots != std::string_view::npos) {
      const auto lo = r.integer(e, "s_range", detail::trim(value.substr(0, dots)));
      const auto hi = r.integer(e, "s_range", detail::trim(value.substr(dots + 2)));
      if (lo && hi) {
        if (*lo > *hi) cfg.issue("BAD_SUPPORT_RANGE", e->line, "empty range");
        for (auto s = *lo; s <= *hi; ++s) d.s_values.push_back(static_cast<Index>(s));
      }
    } else {
      d.s_values = r.index_list(e, "s_range", 1);
    }
    for (Index s : d.s_values)
      if (s < 1 || (p && s > *p)) {
        cfg.issue("BAD_SUPPORT_RANGE", e->line, "support size " + std::to_string(s) + " outside [1, p]");
        break;
      }
  } else if (p) {
    for (Index s = 1; s <= *p; ++s) d.s_values.push_back(s);
  }
  cfg.finish();
  return d;
}

inline DeviationConfig deviation_from_config(std::istream& in) {
  return deviation_from_config(KeyValueConfig::parse(in));
}

}  // namespace spca
