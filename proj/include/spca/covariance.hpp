#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

#include "spca/error.hpp"
#include "spca/types.hpp"

namespace spca {

/// Fraction of observed cells; the natural estimate of the observation probability.
inline double estimate_delta(const MaskedSample& sample) {
  const auto observed = sample.mask().count();
  detail::require(observed > 0, ErrorCode::degenerate_input,
                  "no observed entries: observation rate is zero");
  return static_cast<double>(observed) / static_cast<double>(sample.n() * sample.p());
}

/// Columns with no observed entry. The single-rate debiasing model has nothing to say
/// about them; callers decide whether to warn or refuse.
inline std::vector<Index> unobserved_columns(const MaskedSample& sample) {
  std::vector<Index> out;
  for (Index j = 0; j < sample.p(); ++j)
    if (!sample.mask().col(j).any()) out.push_back(j);
  return out;
}

/// (1/n) sum_i Y_i Y_i^T over the masked rows.
inline SymmetricMatrix empirical_covariance(const MaskedSample& sample) {
  const auto& y = sample.data();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(y.cols(), y.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(y.transpose(), 1.0 / static_cast<double>(y.rows()));
  return SymmetricMatrix(Eigen::MatrixXd(gram.selfadjointView<Eigen::Lower>()));
}

/**
 * Inverse-propensity correction of the masked Gram matrix:
 *
 *   (1/delta - 1/delta^2) diag(emp) + (1/delta^2) emp
 *
 * i.e. off-diagonal entries scaled by 1/delta^2 and the diagonal by 1/delta. The
 * result is unbiased for the population covariance under Bernoulli(delta) masking.
 * delta == 1 returns the input unchanged.
 */
inline SymmetricMatrix debias_covariance(const SymmetricMatrix& emp, double delta) {
  detail::require(delta > 0.0 && delta <= 1.0, ErrorCode::invalid_argument,
                  "observation rate must lie in (0, 1], got " + std::to_string(delta));
  if (delta == 1.0) return emp;
  const double inv = 1.0 / delta;
  const double inv2 = inv * inv;
  Eigen::MatrixXd out = emp.matrix() * inv2;
  for (Index j = 0; j < out.rows(); ++j) out(j, j) = emp(j, j) * inv;
  return SymmetricMatrix(out);
}

struct SpectralSummary {
  Eigen::VectorXd eigenvalues;  // non-increasing
  std::vector<Eigen::VectorXd> leading_vectors;
  double effective_rank = 0.0;
};

namespace detail {

/// Flips v so its largest-magnitude entry (first on ties) is positive.
inline void canonical_sign(Eigen::VectorXd& v) {
  Index peak = 0;
  for (Index j = 1; j < v.size(); ++j)
    if (std::abs(v[j]) > std::abs(v[peak])) peak = j;
  if (v[peak] < 0.0) v = -v;
}

inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> decompose(const Eigen::MatrixXd& m, bool vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      m, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, ErrorCode::not_converged,
          "symmetric eigensolver failed to converge");
  return solver;
}

}  // namespace detail

/// Full symmetric eigendecomposition with the k leading eigenvectors and the
/// effective rank trace / spectral norm (0 for the zero matrix).
inline SpectralSummary spectral_summary(const SymmetricMatrix& m, Index k) {
  detail::require(k >= 1 && k <= m.dim(), ErrorCode::invalid_argument,
                  "requested eigenvector count must lie in [1, dim]");
  const auto solver = detail::decompose(m.matrix(), true);
  const Index p = m.dim();

  SpectralSummary out;
  out.eigenvalues = solver.eigenvalues().reverse();
  for (Index i = 0; i < k; ++i) {
    Eigen::VectorXd v = solver.eigenvectors().col(p - 1 - i);
    v.normalize();
    detail::canonical_sign(v);
    out.leading_vectors.push_back(std::move(v));
  }
  const double spectral_norm = std::max(std::abs(out.eigenvalues[0]), std::abs(out.eigenvalues[p - 1]));
  out.effective_rank = spectral_norm > 0.0 ? out.eigenvalues.sum() / spectral_norm : 0.0;
  return out;
}

/// Largest eigenvalue of a small dense symmetric matrix.
inline double max_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return m(0, 0);
  return detail::decompose(m, false).eigenvalues()[m.rows() - 1];
}

/// Spectral norm (max |eigenvalue|) of a small dense symmetric matrix.
inline double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return std::abs(m(0, 0));
  const auto ev = detail::decompose(m, false).eigenvalues();
  return std::max(std::abs(ev[0]), std::abs(ev[m.rows() - 1]));
}

}  // namespace spca
