#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "spca/combinatorics.hpp"
#include "spca/covariance.hpp"
#include "spca/error.hpp"
#include "spca/parallel.hpp"
#include "spca/seeding.hpp"
#include "spca/types.hpp"

namespace spca {

enum class SolverKind { exact, truncated_power, oracle_constrained, one_sparse };

inline std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::exact: return "exact";
    case SolverKind::truncated_power: return "truncated_power";
    case SolverKind::oracle_constrained: return "oracle_constrained";
    case SolverKind::one_sparse: return "one_sparse";
  }
  return "unknown";
}

/// Guards the exhaustive solvers. Beyond these limits they refuse instead of degrading.
struct EnumerationBudget {
  std::uint64_t max_evaluations = 2'000'000;
  Index max_dim = 20;
};

struct SolverConfig {
  double lambda = 0.0;
  std::optional<Index> sbar;  // nullopt: unconstrained
  int max_iterations = 500;
  double tolerance = 1e-12;
  int restarts = 4;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  // Supports up to this size are polished with an exact restricted eigenvector.
  Index refine_limit = 128;

  Index max_support(Index p) const { return std::min(sbar.value_or(p), p); }

  void validate(Index p) const {
    detail::require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::invalid_argument,
                    "lambda must be a finite nonnegative number");
    detail::require(!sbar || (*sbar >= 1 && *sbar <= p), ErrorCode::invalid_argument,
                    "sbar must lie in [1, p]");
    detail::require(tolerance > 0.0, ErrorCode::invalid_argument, "tolerance must be positive");
    detail::require(max_iterations >= 1, ErrorCode::invalid_argument, "max_iterations must be >= 1");
    detail::require(restarts >= 1, ErrorCode::invalid_argument, "restarts must be >= 1");
  }
};

struct SolverResult {
  SparseUnitVector estimate;
  double objective = 0.0;  // estimate' * sigma * estimate - lambda * |estimate|_0
  int iterations_used = 0;
  SolverKind solver_kind = SolverKind::exact;
  std::vector<double> objective_trace;  // accepted objectives, truncated power only
};

/// theta' M theta - lambda |theta|_0, evaluated on the support only.
inline double penalized_objective(const SymmetricMatrix& m, const SparseUnitVector& theta, double lambda) {
  detail::require(m.dim() == theta.dim(), ErrorCode::dimension_mismatch, "objective dimension mismatch");
  const auto& J = theta.support();
  const auto& v = theta.values();
  double q = 0.0;
  for (std::size_t a = 0; a < J.size(); ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < J.size(); ++b) row += m(J[a], J[b]) * v[b];
    q += v[a] * row;
  }
  return q - lambda * static_cast<double>(theta.nnz());
}

namespace detail {

inline double support_max_eigenvalue(const SymmetricMatrix& m, std::span<const Index> J) {
  switch (J.size()) {
    case 1: return m(J[0], J[0]);
    case 2: {
      const double a = m(J[0], J[0]), c = m(J[1], J[1]), b = m(J[0], J[1]);
      return 0.5 * (a + c) + std::hypot(0.5 * (a - c), b);
    }
    default: return max_eigenvalue(m.principal(J));
  }
}

inline Eigen::VectorXd embedded_leading_vector(const SymmetricMatrix& m, std::span<const Index> J) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.dim());
  if (J.size() == 1) {
    out[J[0]] = 1.0;
    return out;
  }
  const auto solver = decompose(m.principal(J), true);
  const Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Index>(J.size()) - 1);
  for (std::size_t a = 0; a < J.size(); ++a) out[J[a]] = v[static_cast<Index>(a)];
  return out;
}

inline bool strictly_better(double candidate, double incumbent) {
  if (!std::isfinite(incumbent)) return candidate > incumbent;
  return candidate > incumbent + 1e-12 * (1.0 + std::abs(incumbent));
}

inline void check_budget(Index p, std::uint64_t evaluations, const EnumerationBudget& budget) {
  require(p <= budget.max_dim, ErrorCode::budget_exceeded,
          "dimension " + std::to_string(p) + " exceeds exhaustive-search limit " +
              std::to_string(budget.max_dim));
  require(evaluations <= budget.max_evaluations, ErrorCode::budget_exceeded,
          "support enumeration needs " + std::to_string(evaluations) + " evaluations, budget is " +
              std::to_string(budget.max_evaluations));
}

}  // namespace detail

/**
 * Exact maximizer of theta' Sigma theta - lambda |theta|_0 over unit theta with
 * |theta|_0 <= sbar (unconstrained when sbar is empty).
 *
 * For a fixed support J the quadratic form is maximized by the leading eigenvector of
 * Sigma[J, J], so the problem reduces to enumerating supports and comparing
 * lambda_max(Sigma[J, J]) - lambda |J|. Ties go to the smaller support, then to the
 * lexicographically first one.
 */
inline SolverResult exact_l0_pca(const SymmetricMatrix& sigma, double lambda, std::optional<Index> sbar,
                                 const EnumerationBudget& budget = {}) {
  detail::require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::invalid_argument,
                  "lambda must be a finite nonnegative number");
  const Index p = sigma.dim();
  detail::require(!sbar || *sbar >= 1, ErrorCode::invalid_argument, "sbar must be >= 1");
  const Index smax = std::min(sbar.value_or(p), p);
  detail::check_budget(p, support_count_upto(p, smax), budget);

  double best = -std::numeric_limits<double>::infinity();
  std::vector<Index> best_support;
  std::uint64_t evaluated = 0;
  for (Index k = 1; k <= smax; ++k) {
    const double penalty = lambda * static_cast<double>(k);
    for_each_combination(p, k, [&](std::span<const Index> J) {
      ++evaluated;
      const double value = detail::support_max_eigenvalue(sigma, J) - penalty;
      if (detail::strictly_better(value, best)) {
        best = value;
        best_support.assign(J.begin(), J.end());
      }
    });
  }

  SolverResult result;
  result.estimate = SparseUnitVector::from_dense(detail::embedded_leading_vector(sigma, best_support), 1e-12);
  result.objective = penalized_objective(sigma, result.estimate, lambda);
  result.iterations_used = static_cast<int>(std::min<std::uint64_t>(evaluated, std::numeric_limits<int>::max()));
  result.solver_kind = SolverKind::exact;
  return result;
}

/// Constrained estimator with known sparsity bound and no penalty.
inline SolverResult oracle_constrained_pca(const SymmetricMatrix& sigma, Index sbar,
                                           const EnumerationBudget& budget = {}) {
  auto result = exact_l0_pca(sigma, 0.0, sbar, budget);
  result.solver_kind = SolverKind::oracle_constrained;
  return result;
}

/// Coordinate vector with the largest diagonal entry (lowest index on ties).
inline SolverResult one_sparse_selector(const SymmetricMatrix& sigma, double lambda = 0.0) {
  Index best = 0;
  for (Index j = 1; j < sigma.dim(); ++j)
    if (sigma(j, j) > sigma(best, best)) best = j;
  SolverResult result;
  result.estimate = SparseUnitVector::basis(sigma.dim(), best);
  result.objective = sigma(best, best) - lambda;
  result.iterations_used = 1;
  result.solver_kind = SolverKind::one_sparse;
  return result;
}

namespace detail {

struct PowerRun {
  Eigen::VectorXd x;
  double objective = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::vector<double> trace;
};

inline double dense_objective(const SymmetricMatrix& m, const Eigen::VectorXd& x, double lambda) {
  return penalized_objective(m, SparseUnitVector::from_dense(x), lambda);
}

/**
 * Best penalized truncation of y: for s = 1..smax keep the s largest-magnitude
 * entries, renormalize, and score u' M u - lambda s. The quadratic form is updated
 * incrementally as entries are added, so the sweep costs O(smax^2).
 */
inline Eigen::VectorXd best_truncation(const SymmetricMatrix& m, const Eigen::VectorXd& y, Index smax,
                                       double lambda) {
  const Index p = y.size();
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return std::abs(y[a]) > std::abs(y[b]); });

  double q = 0.0, sq = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  Index best_size = 1;
  for (Index s = 1; s <= smax; ++s) {
    const Index j = order[s - 1];
    const double yj = y[j];
    if (yj == 0.0) break;
    double cross = 0.0;
    for (Index t = 0; t < s - 1; ++t) cross += m(j, order[t]) * y[order[t]];
    q += 2.0 * yj * cross + m(j, j) * yj * yj;
    sq += yj * yj;
    const double value = q / sq - lambda * static_cast<double>(s);
    if (value > best) {
      best = value;
      best_size = s;
    }
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
  for (Index t = 0; t < best_size; ++t) out[order[t]] = y[order[t]];
  return out.normalized();
}

/// Replaces x by the leading eigenvector restricted to its support when that helps.
inline void refine_on_support(const SymmetricMatrix& m, Eigen::VectorXd& x, double& objective, double lambda,
                              Index limit) {
  std::vector<Index> J;
  for (Index j = 0; j < x.size(); ++j)
    if (x[j] != 0.0) J.push_back(j);
  if (J.size() < 2 || static_cast<Index>(J.size()) > limit) return;
  Eigen::VectorXd candidate = embedded_leading_vector(m, J);
  const auto sparse = SparseUnitVector::from_dense(candidate, 1e-12);
  const double value = penalized_objective(m, sparse, lambda);
  if (value >= objective) {
    x = sparse.to_dense();
    objective = value;
  }
}

inline PowerRun run_truncated_power(const SymmetricMatrix& m, const Eigen::VectorXd& start,
                                    const SolverConfig& config) {
  const Index smax = config.max_support(m.dim());
  PowerRun run;
  run.x = best_truncation(m, start, smax, config.lambda);
  run.objective = dense_objective(m, run.x, config.lambda);
  refine_on_support(m, run.x, run.objective, config.lambda, config.refine_limit);
  run.trace.push_back(run.objective);

  for (int it = 1; it <= config.max_iterations; ++it) {
    run.iterations = it;
    const Eigen::VectorXd y = m.matrix() * run.x;
    if (y.cwiseAbs().maxCoeff() == 0.0) break;
    Eigen::VectorXd candidate = best_truncation(m, y, smax, config.lambda);
    double value = dense_objective(m, candidate, config.lambda);
    refine_on_support(m, candidate, value, config.lambda, config.refine_limit);
    if (value < run.objective) break;  // never accept a worse iterate
    const double gain = value - run.objective;
    run.x = std::move(candidate);
    run.objective = value;
    run.trace.push_back(value);
    if (gain < config.tolerance) break;
  }
  return run;
}

/// Leading eigenvector of Sigma restricted to its k largest diagonal entries.
inline Eigen::VectorXd diagonal_start(const SymmetricMatrix& m, Index k) {
  std::vector<Index> order(static_cast<std::size_t>(m.dim()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return m(a, a) > m(b, b); });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return embedded_leading_vector(m, order);
}

inline Eigen::VectorXd random_sparse_start(Index p, Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Index> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
  for (Index t = 0; t < k; ++t) v[idx[t]] = normal(rng);
  if (v.cwiseAbs().maxCoeff() == 0.0) v[idx[0]] = 1.0;
  return v.normalized();
}

}  // namespace detail

/**
 * Truncated power iteration for the l0-penalized problem.
 *
 * Each step multiplies by Sigma and applies the best penalized truncation over all
 * support sizes up to sbar; supports of at most `refine_limit` entries are then
 * polished with the restricted leading eigenvector. An iterate is accepted only if
 * it does not lower the objective, so each run's objective trace is non-decreasing.
 * Restart 0 starts from the diagonal-thresholded leading eigenvector; the others from
 * seeded random sbar-sparse vectors. One extra run starts from the coordinate with the
 * largest diagonal entry. Among runs with equal objective (to 1e-12 relative) the
 * smaller support wins, then the lexicographically first support, so the result does
 * not depend on scheduling. Hitting max_iterations is not an error.
 */
inline SolverResult truncated_power_l0_pca(const SymmetricMatrix& sigma, const SolverConfig& config) {
  const Index p = sigma.dim();
  detail::require(p >= 1, ErrorCode::dimension_mismatch, "empty matrix");
  config.validate(p);
  const Index smax = config.max_support(p);
  const auto restarts = static_cast<std::size_t>(config.restarts);

  std::vector<detail::PowerRun> runs(restarts + 1);
  parallel_for(runs.size(), config.threads, [&](std::size_t r) {
    Eigen::VectorXd start;
    if (r == 0)
      start = detail::diagonal_start(sigma, std::min(smax, config.refine_limit));
    else if (r < restarts)
      start = detail::random_sparse_start(p, smax, derive_seed(config.seed, 0, r, Stream::solver_restart));
    else
      start = one_sparse_selector(sigma).estimate.to_dense();
    runs[r] = detail::run_truncated_power(sigma, start, config);
  });

  std::vector<SparseUnitVector> found;
  for (const auto& run : runs) found.push_back(SparseUnitVector::from_dense(run.x));
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (detail::strictly_better(runs[r].objective, runs[best].objective)) {
      best = r;
    } else if (!detail::strictly_better(runs[best].objective, runs[r].objective)) {
      const auto& a = found[r].support();
      const auto& b = found[best].support();
      if (a.size() < b.size() || (a.size() == b.size() && a < b)) best = r;
    }
  }

  SolverResult result;
  result.estimate = std::move(found[best]);
  result.objective = penalized_objective(sigma, result.estimate, config.lambda);
  result.iterations_used = runs[best].iterations;
  result.solver_kind = SolverKind::truncated_power;
  result.objective_trace = std::move(runs[best].trace);
  return result;
}

/// Penalty level C * sigma1^2 / (sigma1 - sigma2) * log(e p) / (delta^2 n).
inline double theoretical_lambda(double sigma1, double sigma2, Index p, Index n, double delta, double C) {
  detail::require(sigma2 >= 0.0 && sigma1 > sigma2, ErrorCode::zero_spectral_gap,
                  "theoretical lambda needs sigma1 > sigma2 >= 0");
  detail::require(p >= 1 && n >= 1, ErrorCode::invalid_argument, "p and n must be >= 1");
  detail::require(delta > 0.0 && delta <= 1.0, ErrorCode::invalid_argument, "delta must lie in (0, 1]");
  detail::require(C > 0.0, ErrorCode::invalid_argument, "C must be positive");
  const double log_ep = 1.0 + std::log(static_cast<double>(p));
  return C * sigma1 * sigma1 / (sigma1 - sigma2) * log_ep / (delta * delta * static_cast<double>(n));
}

struct DataDrivenLambda {
  double lambda = 0.0;
  double sigma1_hat = 0.0;
  double sigma2_hat = 0.0;
};

/// Same rule with sigma1, sigma2 replaced by the two largest eigenvalues of the
/// debiased covariance. Refuses when their gap is at or below gap_floor (default
/// 1e-8 * sigma1_hat).
inline DataDrivenLambda data_driven_lambda(const SpectralSummary& summary, Index n, double delta, double C,
                                           std::optional<double> gap_floor = std::nullopt) {
  const Index p = summary.eigenvalues.size();
  detail::require(p >= 2, ErrorCode::degenerate_input, "data-driven lambda needs at least two variables");
  const double s1 = summary.eigenvalues[0], s2 = summary.eigenvalues[1];
  detail::require(s1 > 0.0, ErrorCode::degenerate_input, "largest eigenvalue is not positive");
  const double floor = gap_floor.value_or(1e-8 * s1);
  detail::require(s1 - s2 > floor, ErrorCode::zero_spectral_gap,
                  "spectral gap " + std::to_string(s1 - s2) + " is below the floor " + std::to_string(floor));
  detail::require(n >= 1, ErrorCode::invalid_argument, "n must be >= 1");
  detail::require(delta > 0.0 && delta <= 1.0, ErrorCode::invalid_argument, "delta must lie in (0, 1]");
  detail::require(C > 0.0, ErrorCode::invalid_argument, "C must be positive");
  const double log_ep = 1.0 + std::log(static_cast<double>(p));
  return {C * s1 * s1 / (s1 - s2) * log_ep / (delta * delta * static_cast<double>(n)), s1, s2};
}

inline DataDrivenLambda data_driven_lambda(const SymmetricMatrix& sigma_tilde, Index n, double delta, double C,
                                           std::optional<double> gap_floor = std::nullopt) {
  detail::require(sigma_tilde.dim() >= 2, ErrorCode::degenerate_input,
                  "data-driven lambda needs at least two variables");
  return data_driven_lambda(spectral_summary(sigma_tilde, 1), n, delta, C, gap_floor);
}

/// Sparsity cap floor(delta^2 n / log(e p)) - 1, clamped to p.
inline Index default_sbar(Index n, Index p, double delta) {
  detail::require(n >= 1 && p >= 1, ErrorCode::invalid_argument, "n and p must be >= 1");
  detail::require(delta > 0.0 && delta <= 1.0, ErrorCode::invalid_argument, "delta must lie in (0, 1]");
  const double ratio = delta * delta * static_cast<double>(n) / (1.0 + std::log(static_cast<double>(p)));
  const double sbar = std::floor(ratio) - 1.0;
  detail::require(sbar >= 1.0, ErrorCode::sample_too_small,
                  "delta^2 n / log(ep) = " + std::to_string(ratio) + " leaves no admissible sparsity level");
  return std::min<Index>(static_cast<Index>(sbar), p);
}

enum class SolverChoice { automatic, exact, truncated_power };

/// Exact enumeration when the budget admits it, otherwise truncated power.
inline SolverKind choose_solver(SolverChoice choice, Index p, Index smax, const EnumerationBudget& budget = {}) {
  switch (choice) {
    case SolverChoice::exact: return SolverKind::exact;
    case SolverChoice::truncated_power: return SolverKind::truncated_power;
    case SolverChoice::automatic: break;
  }
  const bool fits = p <= budget.max_dim && support_count_upto(p, smax) <= budget.max_evaluations;
  return fits ? SolverKind::exact : SolverKind::truncated_power;
}

}  // namespace spca
