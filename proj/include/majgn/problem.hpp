#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "majgn/error.hpp"
#include "majgn/majorant.hpp"
#include "majgn/operator.hpp"

namespace majgn {

/// Zero-residual system F: R^n -> R^m (m >= n) with a hand-coded Jacobian.
///
/// When x_star is known, evaluations are restricted to the open ball
/// B(x_star, kappa); kappa = +inf means the whole space.
class ProblemInstance {
 public:
  using Map = std::function<Vector(const Vector&)>;
  using JacobianMap = std::function<Matrix(const Vector&)>;

  ProblemInstance(std::string name, Map F, JacobianMap jacobian, Eigen::Index dim_in, Eigen::Index dim_out,
                  std::optional<Vector> x_star = std::nullopt, double kappa = kInf,
                  std::optional<double> beta = std::nullopt)
      : name_(std::move(name)),
        F_(std::move(F)),
        jacobian_(std::move(jacobian)),
        dim_in_(dim_in),
        dim_out_(dim_out),
        x_star_(std::move(x_star)),
        kappa_(kappa),
        beta_(beta) {
    if (dim_in_ < 1 || dim_out_ < dim_in_)
      throw Error(ErrorCode::InvalidArgument, "problem dimensions must satisfy 1 <= n <= m");
    if (!(kappa_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "problem κ must be positive");
    if (x_star_) {
      if (x_star_->size() != dim_in_) throw Error(ErrorCode::InvalidArgument, "x_star has the wrong dimension");
      const double res = residual(*x_star_).norm();
      if (!(res <= 1e-10)) {
        std::ostringstream os;
        os << name_ << ": ||F(x_star)|| = " << res << " exceeds 1e-10";
        throw Error(ErrorCode::InvalidArgument, os.str());
      }
      const double b = pinv_norm(DenseOperator(this->jacobian(*x_star_)));
      if (!beta_) beta_ = b;
    }
  }

  const std::string& name() const noexcept { return name_; }
  Eigen::Index dim_in() const noexcept { return dim_in_; }
  Eigen::Index dim_out() const noexcept { return dim_out_; }
  const std::optional<Vector>& x_star() const noexcept { return x_star_; }
  double kappa() const noexcept { return kappa_; }
  /// ||F'(x_star)^+||, computed at construction when not supplied.
  std::optional<double> beta() const noexcept { return beta_; }

  bool in_domain(const Vector& x) const {
    if (x.size() != dim_in_ || !x.allFinite()) return false;
    if (!x_star_ || !std::isfinite(kappa_)) return true;
    return (x - *x_star_).norm() < kappa_;
  }

  Vector residual(const Vector& x) const {
    require_domain(x);
    Vector out = F_(x);
    if (out.size() != dim_out_) throw Error(ErrorCode::InvalidArgument, name_ + ": F returned the wrong dimension");
    return out;
  }

  Matrix jacobian(const Vector& x) const {
    require_domain(x);
    Matrix out = jacobian_(x);
    if (out.rows() != dim_out_ || out.cols() != dim_in_)
      throw Error(ErrorCode::InvalidArgument, name_ + ": Jacobian has the wrong shape");
    return out;
  }

  /// ||x - x_star||, if x_star is known.
  std::optional<double> error(const Vector& x) const {
    if (!x_star_) return std::nullopt;
    return (x - *x_star_).norm();
  }

 private:
  void require_domain(const Vector& x) const {
    if (in_domain(x)) return;
    std::ostringstream os;
    if (x.size() != dim_in_) {
      os << name_ << ": point has dimension " << x.size() << ", expected " << dim_in_;
    } else if (!x.allFinite()) {
      os << name_ << ": point has non-finite coordinates";
    } else {
      os << name_ << ": point at distance " << (x - *x_star_).norm() << " from x_star lies outside B(x_star, "
         << kappa_ << ")";
    }
    throw Error(ErrorCode::OutOfDomain, os.str());
  }

  std::string name_;
  Map F_;
  JacobianMap jacobian_;
  Eigen::Index dim_in_;
  Eigen::Index dim_out_;
  std::optional<Vector> x_star_;
  double kappa_;
  std::optional<double> beta_;
};

}  // namespace majgn
