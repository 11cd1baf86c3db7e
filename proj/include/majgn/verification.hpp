#pragma once

// Checks that confront a solver trace with the majorant guarantees:
// the per-point lemma inequalities, ||x_k - x_star|| <= t_k, the per-step
// bound with exponent p + 1, and the asymptotic linear rate.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "majgn/error.hpp"
#include "majgn/majorant.hpp"
#include "majgn/operator.hpp"
#include "majgn/problem.hpp"
#include "majgn/solver.hpp"

namespace majgn {

/// ||E_F(x, y)|| = ||F(y) - F(x) - F'(x)(y - x)||.
inline double linearization_error(const ProblemInstance& problem, const Vector& x, const Vector& y) {
  return (problem.residual(y) - problem.residual(x) - problem.jacobian(x) * (y - x)).norm();
}

/// e_f(t, u) = f(u) - f(t) - f'(t)(u - t).
inline double majorant_linearization_error(const MajorantFunction& f, double t, double u) {
  if (u == 0.0) return f.linearization_gap(t);
  return f.excess(u) - f.excess(t) - f.excess_derivative(t) * (u - t);
}

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

struct LemmaReport {
  double t = 0.0;  // ||x - x_star||
  InequalityCheck pinv;        // ||F'(x)^+|| <= beta / |f'(t)|
  InequalityCheck taylor;      // beta ||E_F(x, x_star)|| <= e_f(t, 0)
  InequalityCheck newton_step; // ||F'(x)^+ F(x)|| <= |n_f(t)| + t

  bool all_hold() const noexcept { return pinv.holds && taylor.holds && newton_step.holds; }
};

/// Evaluates the three point-wise inequalities at x with ||x - x_star|| < min(nu, kappa).
inline LemmaReport check_lemma_bounds(const ProblemInstance& problem, const MajorantFunction& f, const Vector& x,
                                      double nu = -1.0, double slack = 1e-9) {
  if (!problem.x_star()) throw Error(ErrorCode::InvalidArgument, "check_lemma_bounds needs a known x_star");
  if (nu <= 0.0) nu = radius_nu(f).value;
  const Vector& xs = *problem.x_star();
  LemmaReport rep;
  rep.t = (x - xs).norm();
  const double limit = std::min(nu, problem.kappa());
  if (!(rep.t < limit)) {
    std::ostringstream os;
    os << "||x - x_star|| = " << rep.t << " is not below min(ν, κ) = " << limit;
    throw Error(ErrorCode::OutOfRadius, os.str());
  }
  const double beta = *problem.beta();
  const DenseOperator J(problem.jacobian(x));
  const Vector F = problem.residual(x);
  auto check = [slack](double lhs, double rhs) { return InequalityCheck{lhs, rhs, lhs <= rhs + slack}; };

  rep.pinv = check(pinv_norm(J), beta / std::abs(f.derivative(rep.t)));
  const Vector E = problem.residual(xs) - F - J.matrix() * (xs - x);
  rep.taylor = check(beta * E.norm(), f.linearization_gap(rep.t));
  rep.newton_step = check(pinv_apply(J, F).norm(), std::abs(newton_map(f, rep.t)) + rep.t);
  return rep;
}

struct BoundRow {
  int k = 0;
  double error = 0.0;
  double t = 0.0;
  double slack = 0.0;  // t_k - error_k
  /// Per-step bound for the step k -> k+1; absent on the last row or when h3
  /// is not certified.
  std::optional<double> step_lhs;
  std::optional<double> step_rhs;
};

struct BoundReport {
  std::vector<BoundRow> rows;
  double t0 = 0.0;
  double p = 1.0;
  double tolerance = 0.0;

  bool majorant_holds = true;  // error_k <= t_k
  std::optional<int> majorant_first_violation;

  bool h3_certified = false;
  double step_constant = 0.0;  // |n_f(t0)| / t0^{p+1}
  bool step_bound_holds = true;
  std::optional<int> step_first_violation;

  double rate_bound = 0.0;  // omega1 theta + omega2
  std::optional<double> empirical_rate;  // max ratio over the finite window
  int rate_window = 0;
  bool rate_holds = true;
  bool monotone = true;

  /// Smale family only: the per-step bound without the (1+theta) omega1
  /// factor. Informational, never gating.
  std::optional<bool> smale_unweighted_holds;

  bool all_hold() const noexcept { return majorant_holds && step_bound_holds && rate_holds && monotone; }
};

struct CertifyOptions {
  /// Additive tolerance of the finite-window ratio proxy for the limsup.
  double rate_tolerance = 0.05;
  /// Slack on the exact inequalities, scaled by max(1, t0).
  double slack = 1e-12;
  int h3_grid = 1000;
  /// Tighter kappa than the problem's, e.g. the frozen-B ball.
  std::optional<double> kappa;
};

namespace detail {

/// Errors at or below this are at the rounding floor of x_star.
inline double error_floor(const ProblemInstance& problem) {
  const double scale = problem.x_star() ? problem.x_star()->norm() : 0.0;
  return 64.0 * std::numeric_limits<double>::epsilon() * scale + std::numeric_limits<double>::min();
}

}  // namespace detail

struct RatioWindow {
  std::vector<double> ratios;  // e_{k+1}/e_k while e_k sits above the floor
  int window = 0;
  std::optional<double> max_ratio;  // over the last `window` ratios
  bool monotone = true;
};

/// Finite-window proxy for limsup e_{k+1}/e_k: the largest ratio among the
/// last max(3, ceil(n/2)) iterates, n the number of errors above the rounding
/// floor.
inline RatioWindow ratio_window(std::span<const double> errors, double floor) {
  RatioWindow out;
  // A step that lands on the floor still counts; its ratio is tiny or zero.
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    if (errors[k] <= floor) break;
    if (!(errors[k + 1] < errors[k])) out.monotone = false;
    out.ratios.push_back(errors[k + 1] / errors[k]);
    if (errors[k + 1] <= floor) break;
  }
  if (!out.ratios.empty()) {
    const int n = static_cast<int>(out.ratios.size()) + 1;
    out.window = std::min(n, std::max(3, (n + 1) / 2)) - 1;
    out.max_ratio = *std::max_element(out.ratios.end() - out.window, out.ratios.end());
  }
  return out;
}

/// Recomputes {t_k} from t0 = ||x0 - x_star|| and checks the trace against the
/// majorant bound, the per-step bound (when h3 holds for p) and the rate.
/// Recorded errors are used as they appear in the trace.
inline BoundReport certify_trace(const Trace& trace, const ProblemInstance& problem, const MajorantFunction& f,
                                 const SolverRates& rates, double p, const CertifyOptions& opts = {}) {
  if (!problem.x_star()) throw Error(ErrorCode::InvalidArgument, "certify_trace needs a known x_star");
  rates.validate();
  const std::vector<double> errors = trace.errors();
  if (errors.empty()) throw Error(ErrorCode::InvalidArgument, "trace carries no errors");

  BoundReport rep;
  rep.p = p;
  rep.t0 = (trace.x0 - *problem.x_star()).norm();
  rep.tolerance = opts.slack * std::max(1.0, rep.t0);
  rep.rate_bound = rates.linear_rate();

  const auto nu = radius_nu(f).value;
  const double rho = std::min(radius_rho(f, rates, nu).value, nu);
  const double r = std::min({rho, problem.kappa(), opts.kappa.value_or(kInf)});
  if (!(rep.t0 < r)) {
    std::ostringstream os;
    os << "t0 = " << rep.t0 << " is not below r = " << r;
    throw Error(ErrorCode::OutOfRadius, os.str());
  }
  const int K = static_cast<int>(errors.size()) - 1;
  const std::vector<double> t = majorant_sequence(f, rates, rep.t0, K, rho);

  rep.h3_certified = rep.t0 > 0.0 && check_h3(f, p, opts.h3_grid, nu);
  if (rep.h3_certified) rep.step_constant = std::abs(newton_map(f, rep.t0)) / std::pow(rep.t0, p + 1.0);
  const bool smale = f.family() == Family::Smale && p == 1.0 && rep.h3_certified;
  if (smale) rep.smale_unweighted_holds = true;

  for (int k = 0; k <= K; ++k) {
    BoundRow row;
    row.k = k;
    row.error = errors[k];
    row.t = t[k];
    row.slack = t[k] - errors[k];
    if (row.slack < -rep.tolerance && rep.majorant_holds) {
      rep.majorant_holds = false;
      rep.majorant_first_violation = k;
    }
    if (rep.h3_certified && k < K) {
      const double e = errors[k];
      row.step_lhs = errors[k + 1];
      row.step_rhs = rates.newton_weight() * rep.step_constant * std::pow(e, p + 1.0) + rates.linear_rate() * e;
      if (*row.step_lhs > *row.step_rhs + rep.tolerance && rep.step_bound_holds) {
        rep.step_bound_holds = false;
        rep.step_first_violation = k;
      }
      if (smale) {
        const double unweighted = rep.step_constant * e * e + rates.linear_rate() * e;
        if (*row.step_lhs > unweighted + rep.tolerance) rep.smale_unweighted_holds = false;
      }
    }
    rep.rows.push_back(row);
  }

  const RatioWindow win = ratio_window(errors, detail::error_floor(problem));
  rep.monotone = win.monotone;
  rep.rate_window = win.window;
  rep.empirical_rate = win.max_ratio;
  if (win.max_ratio) rep.rate_holds = *win.max_ratio <= rep.rate_bound + opts.rate_tolerance;
  return rep;
}

/// Throws BoundViolated describing the first failed check.
inline void require_bounds(const BoundReport& rep) {
  if (rep.all_hold()) return;
  std::ostringstream os;
  if (!rep.majorant_holds) {
    const auto& row = rep.rows[*rep.majorant_first_violation];
    os << "||x_k - x_star|| <= t_k fails at k = " << row.k << ": " << row.error << " > " << row.t;
  } else if (!rep.step_bound_holds) {
    const auto& row = rep.rows[*rep.step_first_violation];
    os << "per-step bound fails at k = " << row.k << ": " << *row.step_lhs << " > " << *row.step_rhs;
  } else if (!rep.rate_holds) {
    os << "error ratio " << *rep.empirical_rate << " over the last " << rep.rate_window << " steps exceeds "
       << rep.rate_bound << " + tolerance";
  } else {
    os << "errors are not strictly decreasing";
  }
  throw Error(ErrorCode::BoundViolated, os.str());
}

/// Least-squares slope of log e_{k+1} against log e_k over the trailing run of
/// strictly decreasing errors above `floor` (at most the last 6 pairs).
inline double empirical_order(std::span<const double> errors, double floor = 0.0) {
  std::size_t end = errors.size();
  while (end > 0 && !(errors[end - 1] > floor)) --end;
  std::size_t begin = end;
  while (begin > 0 && errors[begin - 1] > floor && (begin == end || errors[begin - 1] > errors[begin])) --begin;
  if (end - begin < 4) {
    std::ostringstream os;
    os << "need at least 4 decreasing positive errors, have " << (end - begin);
    throw Error(ErrorCode::InsufficientData, os.str());
  }
  const std::size_t pairs = std::min<std::size_t>(end - begin - 1, 6);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = end - 1 - pairs; i + 1 < end; ++i) {
    const double x = std::log(errors[i]);
    const double y = std::log(errors[i + 1]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pairs);
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) throw Error(ErrorCode::InsufficientData, "errors do not spread in log scale");
  return (n * sxy - sx * sy) / denom;
}

inline double empirical_order(const Trace& trace, const ProblemInstance& problem) {
  const auto errors = trace.errors();
  return empirical_order(errors, detail::error_floor(problem));
}

}  // namespace majgn
