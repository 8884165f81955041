#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spca/covariance.hpp"
#include "spca/csv.hpp"
#include "spca/metrics.hpp"
#include "spca/parallel.hpp"
#include "spca/seeding.hpp"
#include "spca/simulation.hpp"
#include "spca/solver.hpp"

namespace spca {

enum class LambdaRule { theoretical, data_driven, fixed };

struct LambdaChoice {
  LambdaRule rule = LambdaRule::theoretical;
  double fixed_value = 0.0;
};

inline std::string to_string(const LambdaChoice& choice) {
  switch (choice.rule) {
    case LambdaRule::theoretical: return "theoretical";
    case LambdaRule::data_driven: return "data_driven";
    case LambdaRule::fixed: return "fixed:" + detail::format_double(choice.fixed_value);
  }
  return "unknown";
}

struct SbarChoice {
  enum class Mode { default_formula, fixed, unconstrained } mode = Mode::default_formula;
  Index value = 0;
};

inline std::string to_string(const SbarChoice& choice) {
  switch (choice.mode) {
    case SbarChoice::Mode::default_formula: return "default";
    case SbarChoice::Mode::fixed: return std::to_string(choice.value);
    case SbarChoice::Mode::unconstrained: return "unconstrained";
  }
  return "unknown";
}

/// penalized: the l0-penalized estimator; oracle: the sbar = |theta1|_0 constrained
/// estimator with no penalty; one_sparse: the largest-diagonal selector.
enum class Estimator { penalized, oracle, one_sparse };

inline std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::penalized: return "penalized";
    case Estimator::oracle: return "oracle";
    case Estimator::one_sparse: return "one_sparse";
  }
  return "unknown";
}

inline std::string_view to_string(SolverChoice c) {
  switch (c) {
    case SolverChoice::automatic: return "auto";
    case SolverChoice::exact: return "exact";
    case SolverChoice::truncated_power: return "truncated_power";
  }
  return "unknown";
}

/// Factorial design over (n, p, s, delta) with a shared spiked-model shape.
struct ExperimentGrid {
  std::vector<Index> n_values;
  std::vector<Index> p_values;
  std::vector<Index> s_values;
  std::vector<double> delta_values;
  double sigma1 = 4.0;
  double sigma2 = 1.0;
  int replicates = 100;
  std::uint64_t root_seed = 0;
  SolverConfig solver;  // lambda and sbar are filled in per replicate
  SolverChoice solver_choice = SolverChoice::automatic;
  LambdaChoice lambda;
  double C = 1.0;
  Estimator estimator = Estimator::penalized;
  SbarChoice sbar;
  ThetaMode theta_mode = ThetaMode::flat;
  bool estimate_delta = false;  // false: the design delta is treated as known
  unsigned threads = 1;
  EnumerationBudget budget;

  std::size_t cell_count() const {
    return n_values.size() * p_values.size() * s_values.size() * delta_values.size();
  }

  void validate() const {
    detail::require(!n_values.empty() && !p_values.empty() && !s_values.empty() && !delta_values.empty(),
                    ErrorCode::invalid_argument, "every grid axis needs at least one value");
    detail::require(replicates >= 1, ErrorCode::invalid_argument, "replicates must be >= 1");
    for (auto n : n_values) detail::require(n >= 1, ErrorCode::invalid_argument, "n must be >= 1");
    for (auto p : p_values) detail::require(p >= 1, ErrorCode::invalid_argument, "p must be >= 1");
    for (auto s : s_values) detail::require(s >= 1, ErrorCode::invalid_argument, "s must be >= 1");
    for (auto d : delta_values)
      detail::require(d > 0.0 && d <= 1.0, ErrorCode::invalid_argument, "delta must lie in (0, 1]");
    detail::require(sigma2 >= 0.0 && sigma1 > sigma2, ErrorCode::invalid_argument, "need sigma1 > sigma2 >= 0");
    detail::require(C > 0.0, ErrorCode::invalid_argument, "C must be positive");
  }
};

struct CellRecord {
  std::size_t cell = 0;
  Index n = 0, p = 0, s = 0;
  double delta = 1.0;
  bool ok = true;
  std::string failure;  // error token and message when !ok
  double mean_loss = 0.0;
  double loss_se = 0.0;
  double recovery_rate = 0.0;
  double mean_iterations = 0.0;
  double mean_lambda = 0.0;
  double mean_support_size = 0.0;
  double rate_target = 0.0;  // s * sigma_tilde^2 * log(ep) / (delta^2 n)
  std::string solver_used;
  std::vector<double> losses;  // per replicate, in replicate order
};

struct ExperimentReport {
  ExperimentGrid grid;
  std::vector<CellRecord> cells;
};

struct ReplicateOutcome {
  double loss = 0.0;
  bool recovered = false;
  int iterations = 0;
  double lambda = 0.0;
  Index support_size = 0;
  SolverKind kind = SolverKind::exact;
};

/// One replicate of one cell: sample, mask, debias, tune, solve, score.
inline ReplicateOutcome run_replicate(const ExperimentGrid& grid, const SpikedModel& model,
                                      const GaussianSampler& sampler, std::size_t cell, std::size_t replicate,
                                      Index n, double delta) {
  const Index p = model.p();
  const auto x = sampler.draw(n, derive_seed(grid.root_seed, cell, replicate, Stream::data));
  const auto sample = apply_mask(x, delta, derive_seed(grid.root_seed, cell, replicate, Stream::mask));
  const double delta_used = grid.estimate_delta ? estimate_delta(sample) : delta;
  const auto sigma_tilde = debias_covariance(empirical_covariance(sample), delta_used);

  SolverResult fit;
  double lambda = 0.0;
  switch (grid.estimator) {
    case Estimator::one_sparse:
      fit = one_sparse_selector(sigma_tilde);
      break;
    case Estimator::oracle: {
      const Index sbar = std::min(model.theta1().nnz(), p);
      if (choose_solver(grid.solver_choice, p, sbar, grid.budget) == SolverKind::exact) {
        fit = oracle_constrained_pca(sigma_tilde, sbar, grid.budget);
      } else {
        SolverConfig cfg = grid.solver;
        cfg.lambda = 0.0;
        cfg.sbar = sbar;
        cfg.seed = derive_seed(grid.root_seed, cell, replicate, Stream::solver_restart);
        fit = truncated_power_l0_pca(sigma_tilde, cfg);
      }
      break;
    }
    case Estimator::penalized: {
      switch (grid.lambda.rule) {
        case LambdaRule::theoretical:
          lambda = theoretical_lambda(model.sigma1(), model.sigma2(), p, n, delta_used, grid.C);
          break;
        case LambdaRule::data_driven:
          lambda = data_driven_lambda(sigma_tilde, n, delta_used, grid.C).lambda;
          break;
        case LambdaRule::fixed:
          lambda = grid.lambda.fixed_value;
          break;
      }
      std::optional<Index> sbar;
      switch (grid.sbar.mode) {
        case SbarChoice::Mode::default_formula: sbar = default_sbar(n, p, delta_used); break;
        case SbarChoice::Mode::fixed: sbar = std::min(grid.sbar.value, p); break;
        case SbarChoice::Mode::unconstrained: break;
      }
      const Index smax = std::min(sbar.value_or(p), p);
      if (choose_solver(grid.solver_choice, p, smax, grid.budget) == SolverKind::exact) {
        fit = exact_l0_pca(sigma_tilde, lambda, sbar, grid.budget);
      } else {
        SolverConfig cfg = grid.solver;
        cfg.lambda = lambda;
        cfg.sbar = sbar;
        cfg.seed = derive_seed(grid.root_seed, cell, replicate, Stream::solver_restart);
        cfg.threads = 1;
        fit = truncated_power_l0_pca(sigma_tilde, cfg);
      }
      break;
    }
  }

  ReplicateOutcome out;
  out.loss = projector_loss(fit.estimate, model.theta1());
  out.recovered = fit.estimate.support() == model.theta1().support();
  out.iterations = fit.iterations_used;
  out.lambda = lambda;
  out.support_size = fit.estimate.nnz();
  out.kind = fit.solver_kind;
  return out;
}

/**
 * Runs every cell of the grid. Cells are ordered with n outermost and delta innermost.
 * Seeds come from derive_seed(root_seed, cell, replicate, stream), so a cell's result
 * depends only on its index and the root seed. A cell whose replicate raises an
 * spca::Error is marked failed and the run continues.
 */
inline ExperimentReport run_rate_experiment(const ExperimentGrid& grid,
                                            const std::function<void(const CellRecord&)>& on_cell = {}) {
  grid.validate();
  ExperimentReport report;
  report.grid = grid;
  std::size_t cell = 0;
  for (Index n : grid.n_values)
    for (Index p : grid.p_values)
      for (Index s : grid.s_values)
        for (double delta : grid.delta_values) {
          CellRecord rec;
          rec.cell = cell;
          rec.n = n;
          rec.p = p;
          rec.s = s;
          rec.delta = delta;
          try {
            const SpikedModel model(
                make_sparse_theta(p, s, grid.theta_mode, derive_seed(grid.root_seed, cell, 0, Stream::theta)),
                grid.sigma1, grid.sigma2);
            const GaussianSampler sampler(build_spiked(model));
            const auto reps = static_cast<std::size_t>(grid.replicates);
            std::vector<ReplicateOutcome> outcomes(reps);
            parallel_for(reps, grid.threads, [&](std::size_t r) {
              outcomes[r] = run_replicate(grid, model, sampler, cell, r, n, delta);
            });

            double sum = 0.0, sum_sq = 0.0, rec_sum = 0.0, it_sum = 0.0, lam_sum = 0.0, supp_sum = 0.0;
            for (const auto& o : outcomes) {
              rec.losses.push_back(o.loss);
              sum += o.loss;
              rec_sum += o.recovered ? 1.0 : 0.0;
              it_sum += o.iterations;
              lam_sum += o.lambda;
              supp_sum += static_cast<double>(o.support_size);
            }
            const double R = static_cast<double>(reps);
            rec.mean_loss = sum / R;
            for (double l : rec.losses) sum_sq += (l - rec.mean_loss) * (l - rec.mean_loss);
            rec.loss_se = reps > 1 ? std::sqrt(sum_sq / (R - 1.0) / R) : 0.0;
            rec.recovery_rate = rec_sum / R;
            rec.mean_iterations = it_sum / R;
            rec.mean_lambda = lam_sum / R;
            rec.mean_support_size = supp_sum / R;
            const double st = model.sigma_tilde();
            rec.rate_target = static_cast<double>(s) * st * st * (1.0 + std::log(static_cast<double>(p))) /
                              (delta * delta * static_cast<double>(n));
            rec.solver_used = std::string(to_string(outcomes.front().kind));
          } catch (const Error& e) {
            rec.ok = false;
            rec.failure = std::string(to_string(e.code())) + ": " + e.what();
            rec.losses.clear();
          }
          if (on_cell) on_cell(rec);
          report.cells.push_back(std::move(rec));
          ++cell;
        }
  return report;
}

/**
 * Picks the penalty constant C for a grid from `candidates` by minimizing the summed
 * mean loss over pilot replicates. Pilot seeds are derived from a separate root, so the
 * calibration never sees the data used for evaluation. Ties go to the smaller C.
 */
inline double calibrate_lambda_constant(ExperimentGrid grid, const std::vector<double>& candidates,
                                        int pilot_replicates) {
  detail::require(!candidates.empty(), ErrorCode::invalid_argument, "no candidate constants");
  grid.replicates = pilot_replicates;
  grid.root_seed = derive_seed(grid.root_seed, 0, 0, Stream::pilot);
  double best_c = candidates.front();
  double best_loss = std::numeric_limits<double>::infinity();
  for (double c : candidates) {
    grid.C = c;
    const auto report = run_rate_experiment(grid);
    double total = 0.0;
    for (const auto& cell : report.cells) total += cell.ok ? cell.mean_loss : 2.0;
    if (total < best_loss || (total == best_loss && c < best_c)) {
      best_loss = total;
      best_c = c;
    }
  }
  return best_c;
}

/// One row per cell; numbers use the shortest round-trip decimal form.
inline void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  using detail::format_double;
  out << "cell,n,p,s,delta,status,mean_loss,loss_se,recovery_rate,mean_iterations,mean_lambda,"
         "mean_support_size,rate_target,solver\n";
  for (const auto& c : report.cells) {
    out << c.cell << ',' << c.n << ',' << c.p << ',' << c.s << ',' << format_double(c.delta) << ','
        << (c.ok ? "ok" : "failed") << ',';
    if (c.ok) {
      out << format_double(c.mean_loss) << ',' << format_double(c.loss_se) << ',' << format_double(c.recovery_rate)
          << ',' << format_double(c.mean_iterations) << ',' << format_double(c.mean_lambda) << ','
          << format_double(c.mean_support_size) << ',' << format_double(c.rate_target) << ',' << c.solver_used;
    } else {
      out << ",,,,,,,";
    }
    out << '\n';
  }
}

inline nlohmann::json report_metadata(const ExperimentReport& report) {
  const auto& g = report.grid;
  nlohmann::json failed = nlohmann::json::array();
  for (const auto& c : report.cells)
    if (!c.ok) failed.push_back({{"cell", c.cell}, {"error", c.failure}});
  return {
      {"root_seed", g.root_seed},
      {"seed_scheme", "derive_seed(root, cell, replicate, stream) = mix64(mix64(mix64(mix64(root)^cell)^replicate)"
                      "^stream), mix64 = splitmix64 finalizer; streams data=1 mask=2 solver_restart=3 theta=4 pilot=5"},
      {"replicates", g.replicates},
      {"sigma1", g.sigma1},
      {"sigma2", g.sigma2},
      {"sigma_tilde", g.sigma1 / (g.sigma1 - g.sigma2)},
      {"lambda_rule", to_string(g.lambda)},
      {"C", g.C},
      {"estimator", to_string(g.estimator)},
      {"sbar", to_string(g.sbar)},
      {"solver", to_string(g.solver_choice)},
      {"theta", to_string(g.theta_mode)},
      {"delta_mode", g.estimate_delta ? "estimate" : "known"},
      {"cells", report.cells.size()},
      {"failed_cells", failed},
  };
}

}  // namespace spca
