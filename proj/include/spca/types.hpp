#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spca/error.hpp"

namespace spca {

using Index = Eigen::Index;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/**
 * Dense symmetric p x p matrix.
 *
 * Symmetry is enforced on construction by replacing M with (M + M^T) / 2, which
 * leaves an already symmetric input bit-for-bit unchanged.
 */
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;

  explicit SymmetricMatrix(const Eigen::MatrixXd& m) {
    detail::require(m.rows() >= 1 && m.rows() == m.cols(), ErrorCode::dimension_mismatch,
                    "symmetric matrix must be square and non-empty, got " +
                        std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    entries_ = (m + m.transpose()) * 0.5;
  }

  static SymmetricMatrix identity(Index p) { return SymmetricMatrix(Eigen::MatrixXd::Identity(p, p)); }
  static SymmetricMatrix zero(Index p) { return SymmetricMatrix(Eigen::MatrixXd::Zero(p, p)); }
  static SymmetricMatrix diagonal(const Eigen::VectorXd& d) {
    return SymmetricMatrix(Eigen::MatrixXd(d.asDiagonal()));
  }

  Index dim() const noexcept { return entries_.rows(); }
  const Eigen::MatrixXd& matrix() const noexcept { return entries_; }
  double operator()(Index j, Index k) const { return entries_(j, k); }

  /// Principal submatrix M[J, J] for an index set J.
  Eigen::MatrixXd principal(std::span<const Index> support) const {
    const auto k = static_cast<Index>(support.size());
    Eigen::MatrixXd sub(k, k);
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) sub(a, b) = entries_(support[a], support[b]);
    return sub;
  }

  double quadratic_form(const Eigen::VectorXd& v) const { return v.dot(entries_ * v); }

  friend bool operator==(const SymmetricMatrix& a, const SymmetricMatrix& b) {
    return a.entries_.rows() == b.entries_.rows() && a.entries_ == b.entries_;
  }

 private:
  Eigen::MatrixXd entries_;
};

/**
 * Observation matrix paired with its Boolean observation mask.
 *
 * Unobserved cells are stored as literal zeros, so the naive covariance of the
 * masked data is a plain scaled Gram matrix.
 */
class MaskedSample {
 public:
  MaskedSample(Eigen::MatrixXd data, BoolMatrix mask) : data_(std::move(data)), mask_(std::move(mask)) {
    detail::require(data_.rows() >= 1 && data_.cols() >= 1, ErrorCode::dimension_mismatch,
                    "masked sample needs n >= 1 and p >= 1");
    detail::require(data_.rows() == mask_.rows() && data_.cols() == mask_.cols(),
                    ErrorCode::dimension_mismatch, "data and mask dimensions differ");
    for (Index i = 0; i < data_.rows(); ++i)
      for (Index j = 0; j < data_.cols(); ++j)
        if (!mask_(i, j)) data_(i, j) = 0.0;
  }

  static MaskedSample fully_observed(Eigen::MatrixXd data) {
    BoolMatrix mask = BoolMatrix::Constant(data.rows(), data.cols(), true);
    return MaskedSample(std::move(data), std::move(mask));
  }

  Index n() const noexcept { return data_.rows(); }
  Index p() const noexcept { return data_.cols(); }
  const Eigen::MatrixXd& data() const noexcept { return data_; }
  const BoolMatrix& mask() const noexcept { return mask_; }

 private:
  Eigen::MatrixXd data_;
  BoolMatrix mask_;
};

/**
 * Unit-norm vector stored by its support.
 *
 * Invariants: sorted support, every stored value nonzero, Euclidean norm 1, and the
 * entry of largest magnitude (first one on ties) is positive.
 */
class SparseUnitVector {
 public:
  SparseUnitVector() = default;

  /// Builds from a dense vector, dropping entries with |v_j| <= drop_tol * max|v|,
  /// then renormalizing and fixing the sign.
  static SparseUnitVector from_dense(const Eigen::VectorXd& v, double drop_tol = 0.0) {
    detail::require(v.size() >= 1, ErrorCode::dimension_mismatch, "vector must be non-empty");
    const double peak = v.cwiseAbs().maxCoeff();
    detail::require(std::isfinite(peak) && peak > 0.0, ErrorCode::invalid_argument,
                    "cannot normalize a zero or non-finite vector");
    SparseUnitVector out;
    out.dim_ = v.size();
    for (Index j = 0; j < v.size(); ++j) {
      if (v[j] != 0.0 && std::abs(v[j]) > drop_tol * peak) {
        out.support_.push_back(j);
        out.values_.push_back(v[j]);
      }
    }
    out.normalize();
    return out;
  }

  static SparseUnitVector basis(Index dim, Index j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e[j] = 1.0;
    return from_dense(e);
  }

  Index dim() const noexcept { return dim_; }
  Index nnz() const noexcept { return static_cast<Index>(support_.size()); }
  const std::vector<Index>& support() const noexcept { return support_; }
  const std::vector<double>& values() const noexcept { return values_; }

  Eigen::VectorXd to_dense() const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    for (std::size_t a = 0; a < support_.size(); ++a) v[support_[a]] = values_[a];
    return v;
  }

  double dot(const SparseUnitVector& other) const {
    detail::require(dim_ == other.dim_, ErrorCode::dimension_mismatch, "dot product dimension mismatch");
    double acc = 0.0;
    std::size_t a = 0, b = 0;
    while (a < support_.size() && b < other.support_.size()) {
      if (support_[a] < other.support_[b]) {
        ++a;
      } else if (support_[a] > other.support_[b]) {
        ++b;
      } else {
        acc += values_[a] * other.values_[b];
        ++a;
        ++b;
      }
    }
    return acc;
  }

  friend bool operator==(const SparseUnitVector&, const SparseUnitVector&) = default;

 private:
  void normalize() {
    double sq = 0.0;
    for (double x : values_) sq += x * x;
    const double norm = std::sqrt(sq);
    std::size_t peak = 0;
    for (std::size_t a = 0; a < values_.size(); ++a) {
      values_[a] /= norm;
      if (std::abs(values_[a]) > std::abs(values_[peak])) peak = a;
    }
    if (values_[peak] < 0.0)
      for (double& x : values_) x = -x;
  }

  Index dim_ = 0;
  std::vector<Index> support_;
  std::vector<double> values_;
};

}  // namespace spca
