#pragma once

#include <algorithm>
#include <cmath>

#include "spca/combinatorics.hpp"
#include "spca/covariance.hpp"
#include "spca/solver.hpp"
#include "spca/types.hpp"

namespace spca {

/// Squared Frobenius distance between the rank-one projectors a a' and b b',
/// computed as 2 - 2 (a'b)^2 and clamped at zero.
inline double projector_loss(const SparseUnitVector& a, const SparseUnitVector& b) {
  const double c = a.dot(b);
  return std::max(0.0, 2.0 - 2.0 * c * c);
}

namespace detail {

template <class Score>
double max_over_supports(Index p, Index s, const EnumerationBudget& budget, Score&& score) {
  require(s >= 1 && s <= p, ErrorCode::invalid_argument,
          "support size " + std::to_string(s) + " outside [1, " + std::to_string(p) + "]");
  require(binomial(p, s) <= budget.max_evaluations, ErrorCode::budget_exceeded,
          "C(" + std::to_string(p) + ", " + std::to_string(s) + ") supports exceed the enumeration budget");
  double best = 0.0;
  bool first = true;
  for_each_combination(p, s, [&](std::span<const Index> J) {
    const double v = score(J);
    if (first || v > best) best = v;
    first = false;
  });
  return best;
}

}  // namespace detail

/**
 * Sparse deviation Z(s): the largest |theta' (sigma_hat - sigma_true) theta| over unit
 * vectors with exactly s nonzeros, i.e. the largest spectral norm of an s x s principal
 * submatrix of the difference.
 */
inline double sparse_deviation(const SymmetricMatrix& sigma_hat, const SymmetricMatrix& sigma_true, Index s,
                               const EnumerationBudget& budget = {}) {
  detail::require(sigma_hat.dim() == sigma_true.dim(), ErrorCode::dimension_mismatch,
                  "sparse deviation dimension mismatch");
  const SymmetricMatrix diff(sigma_hat.matrix() - sigma_true.matrix());
  return detail::max_over_supports(diff.dim(), s, budget,
                                   [&](std::span<const Index> J) { return spectral_norm(diff.principal(J)); });
}

/// Largest restricted eigenvalue over exactly-s supports (sigma_max(s)).
inline double sparse_max_eigenvalue(const SymmetricMatrix& sigma, Index s, const EnumerationBudget& budget = {}) {
  return detail::max_over_supports(sigma.dim(), s, budget, [&](std::span<const Index> J) {
    return detail::support_max_eigenvalue(sigma, J);
  });
}

/// max{ sqrt(x), x } with x = (t + s log(e p / s)) / (delta^2 n).
inline double zeta_bound(Index s, Index p, double t, double delta, Index n) {
  detail::require(s >= 1 && s <= p, ErrorCode::invalid_argument, "zeta bound needs 1 <= s <= p");
  detail::require(t >= 0.0, ErrorCode::invalid_argument, "t must be nonnegative");
  detail::require(n >= 1, ErrorCode::invalid_argument, "n must be >= 1");
  detail::require(delta > 0.0 && delta <= 1.0, ErrorCode::invalid_argument, "delta must lie in (0, 1]");
  const double sd = static_cast<double>(s);
  const double x = (t + sd * (1.0 + std::log(static_cast<double>(p) / sd))) / (delta * delta * static_cast<double>(n));
  return std::max(std::sqrt(x), x);
}

}  // namespace spca
