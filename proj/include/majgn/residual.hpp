#pragma once

// Residual policies for the inexact step B(x_k) S_k = -g_k + r_k.
//
// Every emitted triple (r_k, P_k, theta_k) satisfies
//     ||P_k r_k|| <= theta_k ||P_k g_k||,   theta_k cond(P_k M_k) <= theta_bar,
// where g_k = F'(x_k)^* F(x_k) and M_k = F'(x_k)^* F'(x_k).

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <type_traits>
#include <variant>

#include "majgn/error.hpp"
#include "majgn/majorant.hpp"
#include "majgn/operator.hpp"

namespace majgn {

/// r = 0, theta = 0.
struct ExactSolve {};

/// Worst-case-scaled residual along a seeded pseudo-random direction d:
/// r = theta * relative_magnitude * (||P g|| / ||P d||) * d.
struct Synthetic {
  double relative_magnitude = 1.0;
  std::uint64_t direction_seed = 0;
};

/// Conjugate gradients on B S = -g, stopped as soon as the preconditioned
/// residual test passes. Falls back to a direct solve (r = 0) when theta is 0,
/// B is not symmetric, or max_inner iterations do not suffice.
struct TruncatedIterative {
  int max_inner = 200;
};

using ResidualMode = std::variant<ExactSolve, Synthetic, TruncatedIterative>;

struct IdentityPreconditioner {};
/// P = diag(M)^{-1}.
struct JacobiPreconditioner {};
struct CustomPreconditioner {
  std::function<Matrix(const Matrix& M)> make;
};

using Preconditioner = std::variant<IdentityPreconditioner, JacobiPreconditioner, CustomPreconditioner>;

/// Requested forcing term theta_k = requested * decay^k before the
/// theta_bar / cond(P_k M_k) cap. The default saturates the cap.
struct ThetaSchedule {
  double requested = kInf;
  double decay = 1.0;

  double at(int k) const { return requested * std::pow(decay, k); }
};

struct ResidualPolicy {
  ResidualMode mode = ExactSolve{};
  Preconditioner preconditioner = IdentityPreconditioner{};
  ThetaSchedule theta{};

  void validate() const {
    if (const auto* s = std::get_if<Synthetic>(&mode)) {
      if (!(s->relative_magnitude >= 0.0 && s->relative_magnitude <= 1.0))
        throw Error(ErrorCode::InvalidConfig, "synthetic relative magnitude must lie in [0, 1]");
    }
    if (const auto* t = std::get_if<TruncatedIterative>(&mode)) {
      if (t->max_inner < 1) throw Error(ErrorCode::InvalidConfig, "truncated solver needs max_inner >= 1");
    }
    if (!(theta.requested >= 0.0)) throw Error(ErrorCode::InvalidConfig, "requested θ must be >= 0");
    if (!(theta.decay > 0.0 && theta.decay <= 1.0)) throw Error(ErrorCode::InvalidConfig, "θ decay must lie in (0, 1]");
    if (const auto* c = std::get_if<CustomPreconditioner>(&preconditioner); c && !c->make)
      throw Error(ErrorCode::InvalidConfig, "custom preconditioner is empty");
  }
};

struct ResidualChoice {
  Vector r;
  double theta = 0.0;
  Matrix P;
  double cond_PM = 1.0;
  /// Set by TruncatedIterative: the step it produced, with r = B S + g.
  std::optional<Vector> step;
  int inner_iterations = 0;
  bool direct_fallback = false;
};

inline Matrix make_preconditioner(const Preconditioner& pre, const Matrix& M) {
  const auto n = M.rows();
  Matrix P = std::visit(
      [&](const auto& p) -> Matrix {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, IdentityPreconditioner>) {
          return Matrix::Identity(n, n);
        } else if constexpr (std::is_same_v<T, JacobiPreconditioner>) {
          const Vector d = M.diagonal();
          if ((d.array() <= 0.0).any()) throw Error(ErrorCode::PolicyInfeasible, "Jacobi preconditioner: nonpositive diagonal");
          return d.cwiseInverse().asDiagonal();
        } else {
          return p.make(M);
        }
      },
      pre);
  if (P.rows() != n || P.cols() != n) throw Error(ErrorCode::PolicyInfeasible, "preconditioner has the wrong shape");
  if (!P.allFinite() || !SpectralData(P).injective())
    throw Error(ErrorCode::PolicyInfeasible, "preconditioner is not invertible");
  return P;
}

namespace detail {

/// Seeded direction in [-1, 1)^n, built from raw mt19937_64 output so the
/// sequence does not depend on the standard library's distributions.
inline Vector seeded_direction(std::uint64_t seed, int k, Eigen::Index n) {
  std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k + 1));
  Vector d(n);
  for (int attempt = 0; attempt < 16; ++attempt) {
    for (Eigen::Index i = 0; i < n; ++i) d(i) = std::ldexp(static_cast<double>(rng() >> 11), -52) - 1.0;
    if (d.norm() > 0.0) return d;
  }
  d.setOnes();
  return d;
}

inline bool symmetric(const Matrix& A) {
  return (A - A.transpose()).norm() <= 1e-12 * std::max(1.0, A.norm());
}

}  // namespace detail

/// Chooses (r, theta, P) for one step. `k` seeds the synthetic direction and
/// indexes the theta schedule; `B` is only used by TruncatedIterative.
inline ResidualChoice make_residual(const ResidualPolicy& policy, int k, const Vector& g, const Matrix& M,
                                    const Matrix& B, const SolverRates& rates) {
  const auto n = g.size();
  ResidualChoice out;
  out.P = make_preconditioner(policy.preconditioner, M);
  const Matrix PM = out.P * M;
  {
    SpectralData sd(PM);
    out.cond_PM = sd.injective() ? sd.sigma_max() / sd.sigma_min() : kInf;
  }
  out.r = Vector::Zero(n);

  if (std::holds_alternative<ExactSolve>(policy.mode)) return out;

  const double requested = policy.theta.at(k);
  const double budget = rates.theta_bar / out.cond_PM;
  out.theta = std::min(requested, budget);
  const bool wants_inexact = rates.theta_bar > 0.0 && requested > 0.0;
  if (wants_inexact && !(out.theta > 0.0)) {
    std::ostringstream os;
    os << "θ budget ϑ/cond(PM) = " << rates.theta_bar << "/" << out.cond_PM << " underflows to 0";
    throw Error(ErrorCode::PolicyInfeasible, os.str());
  }

  const Vector Pg = out.P * g;
  if (const auto* syn = std::get_if<Synthetic>(&policy.mode)) {
    if (syn->relative_magnitude == 0.0 || out.theta == 0.0 || Pg.norm() == 0.0) return out;
    const Vector d = detail::seeded_direction(syn->direction_seed, k, n);
    const double pd = (out.P * d).norm();
    out.r = (out.theta * syn->relative_magnitude * Pg.norm() / pd) * d;
    // Rounding can push ||P r|| a hair above the target; pull it back.
    const double excess = (out.P * out.r).norm() / (out.theta * Pg.norm());
    if (excess > 1.0) out.r /= excess;
    return out;
  }

  const auto& trunc = std::get<TruncatedIterative>(policy.mode);
  const double target = out.theta * Pg.norm();
  const bool use_pcg = out.theta > 0.0 && detail::symmetric(B);
  if (use_pcg) {
    const bool precondition = detail::symmetric(out.P) && Eigen::LLT<Matrix>(out.P).info() == Eigen::Success;
    Vector S = Vector::Zero(n);
    Vector res = -g;  // -g - B S
    Vector z = precondition ? Vector(out.P * res) : res;
    Vector dir = z;
    double rz = res.dot(z);
    for (int it = 1; it <= trunc.max_inner; ++it) {
      const Vector Bd = B * dir;
      const double curv = dir.dot(Bd);
      if (!(curv > 0.0)) break;
      const double alpha = rz / curv;
      S += alpha * dir;
      res -= alpha * Bd;
      out.inner_iterations = it;
      const Vector r = B * S + g;
      if ((out.P * r).norm() <= target) {
        out.r = r;
        out.step = S;
        return out;
      }
      z = precondition ? Vector(out.P * res) : res;
      const double rz_next = res.dot(z);
      dir = z + (rz_next / rz) * dir;
      rz = rz_next;
    }
  }
  out.direct_fallback = true;
  out.r = Vector::Zero(n);
  return out;
}

}  // namespace majgn
