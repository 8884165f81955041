#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string_view>

#include "spca/covariance.hpp"
#include "spca/error.hpp"
#include "spca/types.hpp"

namespace spca {

/**
 * Spiked covariance sigma1 * theta1 theta1' + sigma2 * Upsilon.
 *
 * Without a custom Upsilon the complement is isotropic, Upsilon = I - theta1 theta1',
 * giving eigenvalues sigma1 (once) and sigma2 (p - 1 times). A custom Upsilon must have
 * spectral norm at most 1 and annihilate theta1.
 */
class SpikedModel {
 public:
  SpikedModel(SparseUnitVector theta1, double sigma1, double sigma2,
              std::optional<SymmetricMatrix> upsilon = std::nullopt)
      : theta1_(std::move(theta1)), sigma1_(sigma1), sigma2_(sigma2), upsilon_(std::move(upsilon)) {
    detail::require(sigma2_ >= 0.0 && sigma1_ > sigma2_, ErrorCode::invalid_argument,
                    "spiked model needs sigma1 > sigma2 >= 0");
    if (upsilon_) {
      detail::require(upsilon_->dim() == theta1_.dim(), ErrorCode::dimension_mismatch,
                      "Upsilon dimension differs from theta1");
      const auto summary = spectral_summary(*upsilon_, 1);
      const double norm = std::max(std::abs(summary.eigenvalues[0]),
                                   std::abs(summary.eigenvalues[summary.eigenvalues.size() - 1]));
      detail::require(norm <= 1.0 + 1e-10, ErrorCode::invalid_argument, "Upsilon must have spectral norm <= 1");
      detail::require((upsilon_->matrix() * theta1_.to_dense()).norm() <= 1e-10, ErrorCode::invalid_argument,
                      "Upsilon must annihilate theta1");
    }
  }

  const SparseUnitVector& theta1() const noexcept { return theta1_; }
  double sigma1() const noexcept { return sigma1_; }
  double sigma2() const noexcept { return sigma2_; }
  Index p() const noexcept { return theta1_.dim(); }
  const std::optional<SymmetricMatrix>& upsilon() const noexcept { return upsilon_; }

  /// sigma1 / (sigma1 - sigma2).
  double sigma_tilde() const noexcept { return sigma1_ / (sigma1_ - sigma2_); }

 private:
  SparseUnitVector theta1_;
  double sigma1_;
  double sigma2_;
  std::optional<SymmetricMatrix> upsilon_;
};

inline SymmetricMatrix build_spiked(const SpikedModel& model) {
  const Eigen::VectorXd theta = model.theta1().to_dense();
  const Eigen::MatrixXd spike = theta * theta.transpose();
  const Index p = model.p();
  const Eigen::MatrixXd upsilon =
      model.upsilon() ? model.upsilon()->matrix() : Eigen::MatrixXd(Eigen::MatrixXd::Identity(p, p) - spike);
  return SymmetricMatrix(model.sigma1() * spike + model.sigma2() * upsilon);
}

/**
 * Draws i.i.d. rows from N(0, sigma) as Z * sigma^{1/2}, Z standard normal filled
 * row-major from mt19937_64. Eigenvalues down to -1e-10 * max(1, |lambda_1|) are
 * clamped to zero; anything more negative is rejected.
 */
class GaussianSampler {
 public:
  explicit GaussianSampler(const SymmetricMatrix& sigma) {
    const auto solver = detail::decompose(sigma.matrix(), true);
    const Index p = sigma.dim();
    Eigen::VectorXd ev = solver.eigenvalues();
    const double tol = 1e-10 * std::max(1.0, std::abs(ev[p - 1]));
    detail::require(ev[0] >= -tol, ErrorCode::not_psd,
                    "covariance has eigenvalue " + std::to_string(ev[0]) + " below zero");
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    root_ = solver.eigenvectors() * ev.asDiagonal() * solver.eigenvectors().transpose();
  }

  Index p() const noexcept { return root_.rows(); }

  Eigen::MatrixXd draw(Index n, std::uint64_t seed) const {
    detail::require(n >= 1, ErrorCode::invalid_argument, "sample size must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd z(n, p());
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p(); ++j) z(i, j) = normal(rng);
    return z * root_;
  }

 private:
  Eigen::MatrixXd root_;
};

inline Eigen::MatrixXd sample_gaussian(const SymmetricMatrix& sigma, Index n, std::uint64_t seed) {
  return GaussianSampler(sigma).draw(n, seed);
}

/// Observes each cell independently with probability delta; the mask stream is drawn
/// row-major from `seed` and never looks at the data values.
inline MaskedSample apply_mask(const Eigen::MatrixXd& x, double delta, std::uint64_t seed) {
  detail::require(delta > 0.0 && delta <= 1.0, ErrorCode::invalid_argument, "delta must lie in (0, 1]");
  if (delta == 1.0) return MaskedSample::fully_observed(x);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(delta);
  BoolMatrix mask(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) mask(i, j) = keep(rng);
  return MaskedSample(x, std::move(mask));
}

enum class ThetaMode { flat, seeded_random };

inline std::string_view to_string(ThetaMode mode) {
  return mode == ThetaMode::flat ? "flat" : "seeded_random";
}

/// s-sparse ground truth: flat puts 1/sqrt(s) on the first s coordinates; seeded_random
/// draws s coordinates uniformly and Gaussian values on them.
inline SparseUnitVector make_sparse_theta(Index p, Index s, ThetaMode mode, std::uint64_t seed = 0) {
  detail::require(s >= 1 && s <= p, ErrorCode::invalid_argument, "theta sparsity must lie in [1, p]");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
  if (mode == ThetaMode::flat) {
    v.head(s).setConstant(1.0);
    return SparseUnitVector::from_dense(v);
  }
  std::mt19937_64 rng(seed);
  std::vector<Index> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::normal_distribution<double> normal;
  for (Index t = 0; t < s; ++t) {
    double value = 0.0;
    while (value == 0.0) value = normal(rng);
    v[idx[t]] = value;
  }
  return SparseUnitVector::from_dense(v);
}

/// delta^-2: the multiplicative rate penalty of observing each entry with probability delta.
inline double delta_inflation(double delta) {
  detail::require(delta > 0.0 && delta <= 1.0, ErrorCode::invalid_argument, "delta must lie in (0, 1]");
  return 1.0 / (delta * delta);
}

}  // namespace spca
