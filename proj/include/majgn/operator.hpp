#pragma once

// Finite-dimensional operator utilities: pseudoinverse application, spectral
// norms, condition numbers and the perturbation bound for injective operators.
//
// All norms are spectral (2-norms). Operators are real m x n matrices with
// m >= n; injectivity means full column rank.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "majgn/error.hpp"

namespace majgn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Relative rank tolerance: singular values at or below rank_tol * sigma_max
/// count as zero.
inline constexpr double kDefaultRankTol = 1e-12;

/// Real m x n matrix with m >= n and finite entries.
class DenseOperator {
 public:
  explicit DenseOperator(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() < entries_.cols()) {
      std::ostringstream os;
      os << "operator must have rows >= cols, got " << entries_.rows() << "x" << entries_.cols();
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
    if (entries_.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty operator");
    if (!entries_.allFinite()) throw Error(ErrorCode::InvalidArgument, "operator has non-finite entries");
  }

  static DenseOperator identity(Eigen::Index n) { return DenseOperator(Matrix::Identity(n, n)); }

  const Matrix& matrix() const noexcept { return entries_; }
  Eigen::Index rows() const noexcept { return entries_.rows(); }
  Eigen::Index cols() const noexcept { return entries_.cols(); }
  bool square() const noexcept { return rows() == cols(); }

 private:
  Matrix entries_;
};

/// Thin SVD of an operator with the singular values sorted nonincreasing.
class SpectralData {
 public:
  explicit SpectralData(const Matrix& a, double rank_tol = kDefaultRankTol)
      : svd_(a, Eigen::ComputeThinU | Eigen::ComputeThinV), rank_tol_(rank_tol) {}
  explicit SpectralData(const DenseOperator& a, double rank_tol = kDefaultRankTol)
      : SpectralData(a.matrix(), rank_tol) {}

  const Vector& singular_values() const { return svd_.singularValues(); }
  double sigma_max() const { return singular_values().size() ? singular_values()(0) : 0.0; }
  double sigma_min() const {
    const auto& s = singular_values();
    return s.size() ? s(s.size() - 1) : 0.0;
  }
  double rank_tol() const noexcept { return rank_tol_; }

  bool injective() const { return sigma_min() > rank_tol_ * sigma_max() && sigma_min() > 0.0; }

  /// Minimum-norm least-squares solve through the SVD factors.
  Vector solve(const Vector& y) const {
    const auto& s = singular_values();
    Vector coeffs = svd_.matrixU().transpose() * y;
    for (Eigen::Index i = 0; i < s.size(); ++i) coeffs(i) /= s(i);
    return svd_.matrixV() * coeffs;
  }

 private:
  Eigen::JacobiSVD<Matrix> svd_;
  double rank_tol_;
};

namespace detail {

inline void require_injective(const SpectralData& sd, const char* what) {
  if (!sd.injective()) {
    std::ostringstream os;
    os << what << ": smallest singular value " << sd.sigma_min() << " <= " << sd.rank_tol()
       << " * sigma_max (" << sd.sigma_max() << ")";
    throw Error(ErrorCode::RankDeficient, os.str());
  }
}

}  // namespace detail

/// Spectral norm ||A||.
inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return SpectralData(a).sigma_max();
}
inline double spectral_norm(const DenseOperator& a) { return spectral_norm(a.matrix()); }

/// x = A^+ y, the unique minimizer of ||Ax - y|| for injective A.
inline Vector pinv_apply(const DenseOperator& a, const Vector& y, double rank_tol = kDefaultRankTol) {
  if (y.size() != a.rows()) throw Error(ErrorCode::InvalidArgument, "pinv_apply: dimension mismatch");
  SpectralData sd(a, rank_tol);
  detail::require_injective(sd, "pinv_apply");
  return sd.solve(y);
}

/// ||A^+|| = 1 / sigma_min(A).
inline double pinv_norm(const DenseOperator& a, double rank_tol = kDefaultRankTol) {
  SpectralData sd(a, rank_tol);
  detail::require_injective(sd, "pinv_norm");
  return 1.0 / sd.sigma_min();
}

/// sigma_max / sigma_min for a square invertible operator.
inline double cond_number(const Matrix& m, double rank_tol = kDefaultRankTol) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::InvalidArgument, "cond_number: operator is not square");
  SpectralData sd(m, rank_tol);
  if (!sd.injective()) {
    std::ostringstream os;
    os << "cond_number: smallest singular value " << sd.sigma_min() << " is below tolerance";
    throw Error(ErrorCode::Singular, os.str());
  }
  return sd.sigma_max() / sd.sigma_min();
}
inline double cond_number(const DenseOperator& m, double rank_tol = kDefaultRankTol) {
  return cond_number(m.matrix(), rank_tol);
}

/// Outcome of the perturbation bound: `bound` is empty when the hypothesis
/// ||A^+|| ||A - B|| < 1 fails and no claim can be made.
struct PerturbationBound {
  bool injective = false;
  std::optional<double> bound;
  double contraction = 0.0;  // ||A^+|| ||A - B||

  bool feasible() const noexcept { return bound.has_value(); }
};

/// If ||A^+|| ||A - B|| < 1 then B is injective and
/// ||B^+|| <= ||A^+|| / (1 - ||A^+|| ||A - B||).
inline PerturbationBound perturbed_pinv_bound(const DenseOperator& a, const DenseOperator& b,
                                              double rank_tol = kDefaultRankTol) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::InvalidArgument, "perturbed_pinv_bound: shape mismatch");
  const double a_pinv = pinv_norm(a, rank_tol);
  const double gap = spectral_norm(Matrix(a.matrix() - b.matrix()));
  PerturbationBound out;
  out.contraction = a_pinv * gap;
  if (out.contraction < 1.0) {
    out.injective = true;
    out.bound = a_pinv / (1.0 - out.contraction);
  }
  return out;
}

}  // namespace majgn
