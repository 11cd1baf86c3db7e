#pragma once

// Inexact Gauss-Newton-like iteration
//
//     x_{k+1} = x_k + S_k,    B(x_k) S_k = -F'(x_k)^* F(x_k) + r_k,
//
// with a pluggable approximation B of M_k = F'(x_k)^* F'(x_k) and a residual
// policy choosing (r_k, P_k, theta_k). Each step records the observed
// omega-conditions ||B^{-1} M|| and ||B^{-1} M - I|| so that a run can be
// checked against the rates it was configured with.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "majgn/error.hpp"
#include "majgn/majorant.hpp"
#include "majgn/operator.hpp"
#include "majgn/problem.hpp"
#include "majgn/residual.hpp"

namespace majgn {

/// B(x) = M(x).
struct ExactB {};
/// B(x) = M(at): the modified method. An empty `at` is bound to x0 by solve().
struct FrozenB {
  std::optional<Vector> at;
};
/// B(x) = c M(x).
struct ScaledB {
  double c = 1.0;
};
struct CustomB {
  std::function<Matrix(const Vector& x, const Matrix& M)> make;
};

using BStrategy = std::variant<ExactB, FrozenB, ScaledB, CustomB>;

constexpr std::string_view b_strategy_name(const BStrategy& b) {
  switch (b.index()) {
    case 0: return "exact";
    case 1: return "frozen";
    case 2: return "scaled";
    default: return "custom";
  }
}

struct SolverConfig {
  SolverRates rates{};
  BStrategy b_strategy = ExactB{};
  ResidualPolicy residual_policy{};
  int max_iter = 100;
  double grad_tol = 1e-14;
  double step_tol = 1e-20;

  void validate() const {
    rates.validate();
    residual_policy.validate();
    if (max_iter < 1) throw Error(ErrorCode::InvalidConfig, "max_iter must be >= 1");
    if (!(grad_tol > 0.0) || !(step_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "tolerances must be positive");
    if (const auto* s = std::get_if<ScaledB>(&b_strategy); s && !(s->c > 0.0 && std::isfinite(s->c)))
      throw Error(ErrorCode::InvalidConfig, "scaled B needs c > 0");
    if (const auto* c = std::get_if<CustomB>(&b_strategy); c && !c->make)
      throw Error(ErrorCode::InvalidConfig, "custom B provider is empty");
  }
};

struct IterationRecord {
  int k = 0;
  Vector x;
  Vector grad;  // g_k = F'(x_k)^* F(x_k)
  Vector step;  // S_k
  Vector residual;  // r_k
  Matrix B;
  Matrix P;
  double theta = 0.0;
  double cond_PM = 1.0;
  double omega1_observed = 0.0;  // ||B^{-1} M||
  double omega2_observed = 0.0;  // ||B^{-1} M - I||
  std::optional<double> error;   // ||x_k - x_star||
  bool condition_violation = false;
  int inner_iterations = 0;
  bool direct_fallback = false;

  double grad_norm() const { return grad.norm(); }
  double step_norm() const { return step.norm(); }
};

enum class Termination { GradientTolerance, StepTolerance, MaxIterations };

constexpr std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::GradientTolerance: return "grad_tol";
    case Termination::StepTolerance: return "step_tol";
    case Termination::MaxIterations: return "max_iter";
  }
  return "max_iter";
}

struct Trace {
  std::string problem;
  Vector x0;
  std::vector<IterationRecord> steps;
  Vector x_final;
  std::optional<double> final_error;
  double final_grad_norm = 0.0;
  Termination reason = Termination::MaxIterations;

  std::size_t iterations() const noexcept { return steps.size(); }

  /// ||x_k - x_star|| for k = 0..iterations(), when x_star is known.
  std::vector<double> errors() const {
    std::vector<double> out;
    out.reserve(steps.size() + 1);
    for (const auto& s : steps) {
      if (!s.error) return {};
      out.push_back(*s.error);
    }
    if (!final_error) return {};
    out.push_back(*final_error);
    return out;
  }

  /// x_0 .. x_K.
  std::vector<Vector> iterates() const {
    std::vector<Vector> out;
    out.reserve(steps.size() + 1);
    for (const auto& s : steps) out.push_back(s.x);
    out.push_back(x_final);
    return out;
  }
};

/// A step failed; carries the iteration index and the trace up to it.
class IterationFailure : public Error {
 public:
  IterationFailure(const Error& cause, int iteration, Trace partial)
      : Error(cause.code(), "iteration " + std::to_string(iteration) + ": " + cause.what()),
        cause_(cause.code()),
        iteration_(iteration),
        partial_(std::move(partial)) {}

  ErrorCode cause() const noexcept { return cause_; }
  int iteration() const noexcept { return iteration_; }
  const Trace& partial() const noexcept { return partial_; }

 private:
  ErrorCode cause_;
  int iteration_;
  Trace partial_;
};

namespace detail {

inline Matrix gauss_newton_matrix(const Matrix& J) { return J.transpose() * J; }

inline Matrix approximation(const ProblemInstance& problem, const BStrategy& strategy, const Vector& x,
                            const Matrix& M) {
  return std::visit(
      [&](const auto& s) -> Matrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ExactB>) {
          return M;
        } else if constexpr (std::is_same_v<T, FrozenB>) {
          if (!s.at) throw Error(ErrorCode::InvalidConfig, "frozen B has no anchor point");
          return gauss_newton_matrix(problem.jacobian(*s.at));
        } else if constexpr (std::is_same_v<T, ScaledB>) {
          return s.c * M;
        } else {
          return s.make(x, M);
        }
      },
      strategy);
}

inline constexpr double kConditionSlack = 1e-10;

}  // namespace detail

/// One step from x. Returns x_{k+1} and the diagnostics of step k.
inline std::pair<Vector, IterationRecord> gn_step(const ProblemInstance& problem, const Vector& x,
                                                  const SolverConfig& config, int k = 0) {
  const Matrix J = problem.jacobian(x);
  const Vector F = problem.residual(x);
  {
    SpectralData sd(J);
    if (!sd.injective()) {
      std::ostringstream os;
      os << "Jacobian lost injectivity (sigma_min = " << sd.sigma_min() << ")";
      throw Error(ErrorCode::RankDeficient, os.str());
    }
  }
  const auto n = problem.dim_in();
  IterationRecord rec;
  rec.k = k;
  rec.x = x;
  rec.grad = J.transpose() * F;
  const Matrix M = detail::gauss_newton_matrix(J);
  rec.B = detail::approximation(problem, config.b_strategy, x, M);
  if (rec.B.rows() != n || rec.B.cols() != n || !rec.B.allFinite())
    throw Error(ErrorCode::SingularB, "B(x) must be a finite n x n matrix");
  if (!SpectralData(rec.B).injective()) throw Error(ErrorCode::SingularB, "B(x) is not invertible");

  const Eigen::PartialPivLU<Matrix> lu(rec.B);
  const Matrix BinvM = lu.solve(M);
  rec.omega1_observed = spectral_norm(BinvM);
  rec.omega2_observed = spectral_norm(Matrix(BinvM - Matrix::Identity(n, n)));
  rec.condition_violation = rec.omega1_observed > config.rates.omega1 + detail::kConditionSlack ||
                            rec.omega2_observed > config.rates.omega2 + detail::kConditionSlack;

  ResidualChoice choice = make_residual(config.residual_policy, k, rec.grad, M, rec.B, config.rates);
  rec.residual = std::move(choice.r);
  rec.theta = choice.theta;
  rec.P = std::move(choice.P);
  rec.cond_PM = choice.cond_PM;
  rec.inner_iterations = choice.inner_iterations;
  rec.direct_fallback = choice.direct_fallback;
  rec.step = choice.step ? *choice.step : Vector(lu.solve(Vector(rec.residual - rec.grad)));
  rec.error = problem.error(x);
  return {x + rec.step, std::move(rec)};
}

/// Iterates gn_step until the gradient or step tolerance is met or max_iter
/// steps were taken. Step failures surface as IterationFailure.
inline Trace solve(const ProblemInstance& problem, const Vector& x0, const SolverConfig& config) {
  config.validate();
  if (!problem.in_domain(x0)) throw Error(ErrorCode::OutOfDomain, "x0 lies outside the problem domain");

  SolverConfig cfg = config;
  if (auto* frozen = std::get_if<FrozenB>(&cfg.b_strategy); frozen && !frozen->at) frozen->at = x0;

  Trace trace;
  trace.problem = problem.name();
  trace.x0 = x0;
  Vector x = x0;
  trace.reason = Termination::MaxIterations;
  for (int k = 0; k < cfg.max_iter; ++k) {
    try {
      const double g = (problem.jacobian(x).transpose() * problem.residual(x)).norm();
      if (g <= cfg.grad_tol) {
        trace.reason = Termination::GradientTolerance;
        break;
      }
      auto [next, rec] = gn_step(problem, x, cfg, k);
      const double step = rec.step_norm();
      trace.steps.push_back(std::move(rec));
      x = std::move(next);
      if (step <= cfg.step_tol) {
        trace.reason = Termination::StepTolerance;
        break;
      }
    } catch (const Error& e) {
      trace.x_final = x;
      trace.final_error = problem.error(x);
      throw IterationFailure(e, k, std::move(trace));
    }
  }
  trace.x_final = x;
  trace.final_error = problem.error(x);
  try {
    trace.final_grad_norm = (problem.jacobian(x).transpose() * problem.residual(x)).norm();
  } catch (const Error& e) {
    throw IterationFailure(e, static_cast<int>(trace.steps.size()), std::move(trace));
  }
  if (trace.reason == Termination::MaxIterations && trace.final_grad_norm <= cfg.grad_tol)
    trace.reason = Termination::GradientTolerance;
  return trace;
}

/// ||P r|| <= theta ||P g|| and theta cond(PM) <= theta_bar, both with `slack`.
inline bool residual_contract_holds(const IterationRecord& rec, double theta_bar, double slack = 1e-12) {
  const double lhs = (rec.P * rec.residual).norm();
  const double rhs = rec.theta * (rec.P * rec.grad).norm();
  return lhs <= rhs + slack * std::max(1.0, rhs) && rec.theta * rec.cond_PM <= theta_bar + slack;
}

/// ||B S + g - r|| relative to ||g|| + ||B|| ||S||.
inline double step_consistency(const IterationRecord& rec) {
  const double scale = rec.grad.norm() + spectral_norm(rec.B) * rec.step.norm();
  if (scale == 0.0) return 0.0;
  return (rec.B * rec.step + rec.grad - rec.residual).norm() / scale;
}

/// Radius of a ball around x_star on which freezing B at any point of the ball
/// keeps ||B^{-1} M - I|| <= omega2 (and so ||B^{-1} M|| <= 1 + omega2).
///
/// With eps = f'(delta) + 1 >= beta ||F'(x) - F'(x_star)|| and c = cond(F'(x_star)),
///     ||M(x0)^{-1} M(x) - I|| <= 4 eps (c + eps) / (1 - eps)^2,
/// which is solved for eps = eps(omega2) and then for delta.
inline double frozen_ball_radius(const MajorantFunction& f, double jacobian_cond_at_star, double omega2) {
  if (!(omega2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "frozen_ball_radius: omega2 must be positive");
  const double c = jacobian_cond_at_star;
  const double a = 4.0 - omega2;
  const double b = 4.0 * c + 2.0 * omega2;
  const double eps = (-b + std::sqrt(b * b + 4.0 * a * omega2)) / (2.0 * a);
  const double nu = radius_nu(f).value;
  auto past = [&](double t) { return f.derivative(t) + 1.0 > eps; };
  double hi = std::isfinite(nu) ? nu : 1.0;
  while (!past(hi)) {
    if (hi > 1e300) return kInf;
    hi *= 2.0;
    if (hi >= f.domain_radius()) {
      hi = f.domain_radius();
      break;
    }
  }
  return detail::bisect_boundary(0.0, hi, past);
}

}  // namespace majgn
