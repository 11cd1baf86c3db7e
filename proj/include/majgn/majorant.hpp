#pragma once

// Majorant functions, their Newton map, the convergence radii (nu, rho, r)
// and the scalar majorant sequence {t_k}.
//
// A majorant f on [0, R) with f(0) = 0 and f'(0) = -1 is stored through its
// nonlinear part phi(t) = f(t) + t. The Newton map
//
//     n_f(t) = t - f(t)/f'(t) = (t f'(t) - f(t)) / f'(t)
//
// is evaluated as gap(t) / f'(t) with gap(t) = t phi'(t) - phi(t), which
// avoids the cancellation of the two O(t) terms for small t.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "majgn/error.hpp"
#include "majgn/quadrature.hpp"

namespace majgn {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Forcing and approximation rates: theta_bar bounds theta_k cond(P_k M_k),
/// omega1 bounds ||B^{-1} M||, omega2 bounds ||B^{-1} M - I||.
struct SolverRates {
  double omega1 = 1.0;
  double omega2 = 0.0;
  double theta_bar = 0.0;

  static SolverRates gauss_newton() { return {1.0, 0.0, 0.0}; }

  /// omega1 * theta_bar + omega2, the asymptotic linear rate.
  double linear_rate() const noexcept { return omega1 * theta_bar + omega2; }
  /// (1 + theta_bar) * omega1, the weight on |n_f| in the majorant recursion.
  double newton_weight() const noexcept { return (1.0 + theta_bar) * omega1; }

  void validate() const {
    std::ostringstream os;
    if (!std::isfinite(omega1) || !std::isfinite(omega2) || !std::isfinite(theta_bar)) {
      os << "rates must be finite";
    } else if (theta_bar < 0.0 || theta_bar >= 1.0) {
      os << "ϑ = " << theta_bar << " violates 0 ≤ ϑ < 1";
    } else if (omega2 < 0.0) {
      os << "ω2 = " << omega2 << " violates ω2 ≥ 0";
    } else if (!(omega2 < omega1)) {
      os << "ω2 = " << omega2 << " ≥ ω1 = " << omega1 << " violates ω2 < ω1";
    } else if (!(linear_rate() < 1.0)) {
      os << "ω1ϑ+ω2 = " << linear_rate() << " ≥ 1";
    } else {
      return;
    }
    throw Error(ErrorCode::InvalidConfig, os.str());
  }
};

enum class Family { Holder, Smale, GeneralizedLipschitz, Custom };

constexpr std::string_view to_string(Family f) {
  switch (f) {
    case Family::Holder: return "holder";
    case Family::Smale: return "smale";
    case Family::GeneralizedLipschitz: return "glip";
    case Family::Custom: return "custom";
  }
  return "custom";
}

/// f(t) = K t^{p+1}/(p+1) - t. K absorbs beta.
struct HolderParams {
  double K = 1.0;
  double p = 1.0;

  void validate() const {
    if (!(K > 0.0) || !std::isfinite(K))
      throw Error(ErrorCode::InvalidConfig, "Hölder constant K must be positive and finite");
    if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidConfig, "Hölder exponent p must lie in (0, 1]");
  }
};

/// f(t) = t/(1 - gamma t) - 2t on [0, 1/gamma).
struct SmaleParams {
  double gamma = 1.0;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw Error(ErrorCode::InvalidConfig, "Smale γ must be positive and finite");
  }
};

/// One term c u^e of a power-sum kernel. e > -1 keeps it integrable at 0.
struct PowerTerm {
  double coef = 0.0;
  double exponent = 0.0;
};

/// Radial function L of a generalized Lipschitz condition. L need not be
/// monotone and may be singular (but integrable) at u = 0.
struct GeneralizedLipschitzParams {
  std::function<double(double)> L;
  double R = kInf;
  QuadratureOptions quadrature{};
  /// Set when L is a power sum; used for serialization.
  std::vector<PowerTerm> terms;

  static GeneralizedLipschitzParams power_sum(std::vector<PowerTerm> terms, double R = kInf) {
    for (const auto& term : terms) {
      if (!std::isfinite(term.coef) || !std::isfinite(term.exponent))
        throw Error(ErrorCode::InvalidConfig, "kernel terms must be finite");
      if (!(term.exponent > -1.0))
        throw Error(ErrorCode::InvalidConfig, "kernel exponent must exceed -1 to be integrable at 0");
    }
    GeneralizedLipschitzParams out;
    out.L = [terms](double u) {
      double s = 0.0;
      for (const auto& term : terms) s += term.coef * std::pow(u, term.exponent);
      return s;
    };
    out.R = R;
    out.terms = std::move(terms);
    return out;
  }
  static GeneralizedLipschitzParams constant(double K, double R = kInf) { return power_sum({{K, 0.0}}, R); }
  /// L(u) = K p u^{p-1}: the kernel whose majorant is the Hölder family.
  static GeneralizedLipschitzParams holder_like(double K, double p, double R = kInf) {
    return power_sum({{K * p, p - 1.0}}, R);
  }

  void validate() const {
    if (!L) throw Error(ErrorCode::InvalidConfig, "generalized Lipschitz kernel L is empty");
    if (!(R > 0.0)) throw Error(ErrorCode::InvalidConfig, "domain radius R must be positive");
    if (!(quadrature.abs_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "quadrature tolerance must be positive");
    const double hi = std::isfinite(R) ? R : 1e3;
    constexpr int kSamples = 200;
    for (int i = 0; i < kSamples; ++i) {
      // log-spaced over (0, hi), never touching the endpoints
      const double u = hi * std::pow(10.0, -10.0 + 10.0 * (i + 0.5) / kSamples);
      const double v = L(u);
      if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << "kernel L must be positive and finite on (0, R); L(" << u << ") = " << v;
        throw Error(ErrorCode::InvalidConfig, os.str());
      }
    }
  }
};

using MajorantParams = std::variant<std::monostate, HolderParams, SmaleParams, GeneralizedLipschitzParams>;

/// Scalar majorant f on [0, R). Immutable; all evaluations are pure.
class MajorantFunction {
 public:
  using Scalar = std::function<double(double)>;

  /// Builds f from its nonlinear part phi = f + t. `gap` is t phi' - phi; if
  /// empty it is formed from phi and phi' directly.
  MajorantFunction(Family family, Scalar phi, Scalar phi_prime, Scalar gap, double R,
                   MajorantParams params = {}, int h2_grid = 1000)
      : impl_(std::make_shared<Impl>(Impl{family, std::move(phi), std::move(phi_prime), std::move(gap), R,
                                          std::move(params)})) {
    if (!impl_->gap) {
      impl_->gap = [phi = impl_->phi, dphi = impl_->phi_prime](double t) { return t * dphi(t) - phi(t); };
    }
    if (!(R > 0.0)) throw Error(ErrorCode::InvalidArgument, "majorant domain radius must be positive");
    check_h1();
    check_h2(h2_grid);
  }

  /// Custom majorant from f and f'.
  static MajorantFunction custom(Scalar f, Scalar df, double R = kInf) {
    Scalar phi = [f](double t) { return f(t) + t; };
    Scalar dphi = [df](double t) { return df(t) + 1.0; };
    return MajorantFunction(Family::Custom, std::move(phi), std::move(dphi), {}, R);
  }

  /// Custom majorant from its nonlinear part, for callers that can evaluate
  /// phi = f + t without cancellation.
  static MajorantFunction custom_from_excess(Scalar phi, Scalar dphi, Scalar gap = {}, double R = kInf) {
    return MajorantFunction(Family::Custom, std::move(phi), std::move(dphi), std::move(gap), R);
  }

  double value(double t) const { return impl_->phi(t) - t; }
  double derivative(double t) const { return impl_->phi_prime(t) - 1.0; }
  double excess(double t) const { return impl_->phi(t); }
  double excess_derivative(double t) const { return impl_->phi_prime(t); }
  /// e_f(t, 0) = f(0) - f(t) - f'(t)(0 - t) = t f'(t) - f(t) >= 0.
  double linearization_gap(double t) const { return impl_->gap(t); }

  double domain_radius() const noexcept { return impl_->R; }
  Family family() const noexcept { return impl_->family; }
  const MajorantParams& params() const noexcept { return impl_->params; }

 private:
  struct Impl {
    Family family;
    Scalar phi;
    Scalar phi_prime;
    Scalar gap;
    double R;
    MajorantParams params;
  };

  void check_h1() const {
    const double f0 = value(0.0);
    const double df0 = derivative(0.0);
    if (!(std::abs(f0) <= 1e-12) || !(std::abs(df0 + 1.0) <= 1e-9)) {
      std::ostringstream os;
      os << "h1 violated: f(0) = " << f0 << ", f'(0) = " << df0 << " (need 0 and -1)";
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
  }

  double h2_horizon() const {
    if (std::isfinite(impl_->R)) return impl_->R;
    double h = 1.0;
    while (h < 1e6 && derivative(h) < 0.0) h *= 2.0;
    return 2.0 * h;
  }

  void check_h2(int grid) const {
    if (grid < 2) return;
    const double horizon = h2_horizon();
    double prev = derivative(0.0);
    for (int i = 1; i < grid; ++i) {
      const double t = horizon * static_cast<double>(i) / grid;
      const double cur = derivative(t);
      if (!(cur > prev)) {
        std::ostringstream os;
        os << "h2 violated: f' not strictly increasing near t = " << t << " (f' = " << prev << " then " << cur
           << ")";
        throw Error(ErrorCode::InvalidArgument, os.str());
      }
      prev = cur;
    }
  }

  std::shared_ptr<Impl> impl_;
};

inline MajorantFunction holder_majorant(const HolderParams& hp) {
  hp.validate();
  const double K = hp.K;
  const double p = hp.p;
  return MajorantFunction(
      Family::Holder, [K, p](double t) { return K * std::pow(t, p + 1.0) / (p + 1.0); },
      [K, p](double t) { return K * std::pow(t, p); },
      [K, p](double t) { return K * p * std::pow(t, p + 1.0) / (p + 1.0); }, kInf, hp);
}

/// Lipschitz majorant f(t) = K t^2/2 - t.
inline MajorantFunction lipschitz_majorant(double K) { return holder_majorant({K, 1.0}); }

inline MajorantFunction smale_majorant(const SmaleParams& sp) {
  sp.validate();
  const double g = sp.gamma;
  return MajorantFunction(
      Family::Smale, [g](double t) { return g * t * t / (1.0 - g * t); },
      [g](double t) {
        const double s = 1.0 - g * t;
        return g * t * (2.0 - g * t) / (s * s);
      },
      [g](double t) {
        const double s = 1.0 - g * t;
        return g * t * t / (s * s);
      },
      1.0 / g, sp);
}

/// f(t) = int_0^t L(u)(t - u) du - t, evaluated by adaptive quadrature:
/// f'(t) = int_0^t L - 1 and e_f(t, 0) = int_0^t u L(u) du.
inline MajorantFunction glip_majorant(const GeneralizedLipschitzParams& gp) {
  gp.validate();
  auto L = gp.L;
  auto opts = gp.quadrature;
  auto moment0 = [L, opts](double t) { return integrate_from_zero(L, t, opts); };
  auto moment1 = [L, opts](double t) {
    return integrate_from_zero([&L](double u) { return u * L(u); }, t, opts);
  };
  return MajorantFunction(
      Family::GeneralizedLipschitz, [moment0, moment1](double t) { return t * moment0(t) - moment1(t); },
      moment0, moment1, gp.R, gp);
}

/// n_f(t) = t - f(t)/f'(t), defined while f'(t) < 0; always <= 0 there.
inline double newton_map(const MajorantFunction& f, double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "newton_map: t must be >= 0");
  if (t >= f.domain_radius()) throw Error(ErrorCode::OutOfDomain, "newton_map: t outside [0, R)");
  const double d = f.derivative(t);
  if (!(d < 0.0)) {
    std::ostringstream os;
    os << "newton_map: f'(" << t << ") = " << d << " is not negative";
    throw Error(ErrorCode::OutOfDomain, os.str());
  }
  return f.linearization_gap(t) / d;
}

enum class RadiusMethod { ClosedForm, Bisection, Scan, Given };

constexpr std::string_view to_string(RadiusMethod m) {
  switch (m) {
    case RadiusMethod::ClosedForm: return "closed_form";
    case RadiusMethod::Bisection: return "bisection";
    case RadiusMethod::Scan: return "scan";
    case RadiusMethod::Given: return "given";
  }
  return "given";
}

struct RadiusEstimate {
  double value = 0.0;
  RadiusMethod method = RadiusMethod::Bisection;
};

/// nu, rho, kappa and r = min(kappa, rho), with the method behind each.
struct RadiusReport {
  double nu = 0.0;
  double rho = 0.0;
  double kappa = kInf;
  double r = 0.0;
  RadiusMethod nu_method = RadiusMethod::ClosedForm;
  RadiusMethod rho_method = RadiusMethod::ClosedForm;
  RadiusMethod kappa_method = RadiusMethod::Given;

  bool kappa_binds() const noexcept { return kappa < rho; }
};

namespace detail {

/// Bisection on a predicate that is false at lo and true at hi, down to
/// adjacent doubles or the requested relative width.
template <typename Pred>
double bisect_boundary(double lo, double hi, Pred&& is_past, double rel_tol = 1e-15) {
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi || (hi - lo) <= rel_tol * hi) break;
    (is_past(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// nu = sup{t in [0, R): f'(t) < 0}, by bracketing then bisection.
inline RadiusEstimate radius_nu(const MajorantFunction& f) {
  const double R = f.domain_radius();
  auto nonneg = [&f](double t) { return !(f.derivative(t) < 0.0); };
  double lo = 0.0;
  double hi = kInf;
  if (std::isfinite(R)) {
    for (int k = 1; k <= 60; ++k) {
      const double t = R * (1.0 - std::ldexp(1.0, -k));
      if (nonneg(t)) {
        hi = t;
        break;
      }
      lo = t;
    }
    if (!std::isfinite(hi)) return {R, RadiusMethod::Bisection};
  } else {
    double t = 1.0;
    while (!nonneg(t)) {
      lo = t;
      t *= 2.0;
      if (t > 1e300) return {kInf, RadiusMethod::Bisection};
    }
    hi = t;
  }
  return {detail::bisect_boundary(lo, hi, nonneg), RadiusMethod::Bisection};
}

/// Whether t -> |n_f(t)| / t^{p+1} is strictly increasing on a grid of
/// (0, nu): half the points log-spaced in [1e-4 nu, nu/2], half uniform.
inline bool check_h3(const MajorantFunction& f, double p, int grid = 1000, double nu = -1.0) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "check_h3: p must lie in [0, 1]");
  if (nu <= 0.0) nu = radius_nu(f).value;
  if (!std::isfinite(nu)) nu = 1e3;
  const int half = std::max(grid / 2, 2);
  std::vector<double> ts;
  ts.reserve(2 * half);
  for (int i = 0; i < half; ++i) ts.push_back(nu * std::pow(10.0, -4.0 + std::log10(5000.0) * i / (half - 1)));
  for (int i = 1; i <= half; ++i) ts.push_back(nu * static_cast<double>(i) / (half + 1));
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  double prev = -kInf;
  for (double t : ts) {
    const double d = f.derivative(t);
    if (!(d < 0.0)) break;  // at or beyond the numerical nu
    const double h = (f.linearization_gap(t) / -d) / std::pow(t, p + 1.0);
    if (!(h > prev)) return false;
    prev = h;
  }
  return true;
}

namespace detail {

/// g(t) = (1+theta) omega1 |n_f(t)|/t + omega1 theta + omega2 - 1; +inf where
/// f'(t) >= 0.
inline double rho_criterion(const MajorantFunction& f, const SolverRates& rates, double t) {
  const double d = f.derivative(t);
  if (!(d < 0.0)) return kInf;
  return rates.newton_weight() * (f.linearization_gap(t) / -d) / t + rates.linear_rate() - 1.0;
}

}  // namespace detail

/// rho = sup{delta in (0, nu): g < 0 on (0, delta)}. A single bisection when
/// h3 certifies that |n_f(t)|/t is increasing; otherwise a 10,000-point
/// log-spaced scan followed by bisection of the first sign change.
inline RadiusEstimate radius_rho(const MajorantFunction& f, const SolverRates& rates, double nu = -1.0) {
  rates.validate();
  if (nu <= 0.0) nu = radius_nu(f).value;
  auto g = [&](double t) { return detail::rho_criterion(f, rates, t); };
  auto past = [&](double t) { return !(g(t) < 0.0); };

  const double t_min = (std::isfinite(nu) ? nu : 1.0) * 1e-12;
  if (past(t_min)) {
    std::ostringstream os;
    os << "rho criterion is nonnegative at t = " << t_min << "; |n_f(t)|/t does not vanish at 0";
    throw Error(ErrorCode::NotFound, os.str());
  }

  if (check_h3(f, 0.0, 1000, nu)) {
    double lo = t_min;
    double hi = kInf;
    if (std::isfinite(nu)) {
      for (int k = 1; k <= 60; ++k) {
        const double t = nu * (1.0 - std::ldexp(1.0, -k));
        if (t <= lo) continue;
        if (past(t)) {
          hi = t;
          break;
        }
        lo = t;
      }
      if (!std::isfinite(hi)) return {nu, RadiusMethod::Bisection};
    } else {
      double t = 1.0;
      while (!past(t)) {
        lo = t;
        t *= 2.0;
        if (t > 1e300) return {kInf, RadiusMethod::Bisection};
      }
      hi = t;
    }
    return {detail::bisect_boundary(lo, hi, past), RadiusMethod::Bisection};
  }

  constexpr int kScanPoints = 10000;
  const double top = std::isfinite(nu) ? nu * (1.0 - 1e-9) : 1e6;
  const double log_lo = std::log(t_min);
  const double log_hi = std::log(top);
  double prev = t_min;
  for (int i = 1; i < kScanPoints; ++i) {
    const double t = std::exp(log_lo + (log_hi - log_lo) * i / (kScanPoints - 1));
    if (past(t)) return {detail::bisect_boundary(prev, t, past), RadiusMethod::Scan};
    prev = t;
  }
  return {std::isfinite(nu) ? nu : kInf, RadiusMethod::Scan};
}

/// Radii from the numeric routines for any majorant.
inline RadiusReport numeric_radius_report(const MajorantFunction& f, const SolverRates& rates, double kappa) {
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidConfig, "κ must be positive");
  RadiusReport out;
  const auto nu = radius_nu(f);
  const auto rho = radius_rho(f, rates, nu.value);
  out.nu = nu.value;
  out.nu_method = nu.method;
  out.rho = std::min(rho.value, nu.value);
  out.rho_method = rho.method;
  out.kappa = kappa;
  out.r = std::min(kappa, out.rho);
  return out;
}

/// r = min(kappa, [(1-w1 th-w2)(p+1) / (K(1-w1 th-w2 + p(1+w1-w2)))]^{1/p}),
/// nu = (1/K)^{1/p}.
inline RadiusReport holder_radius_closed_form(const HolderParams& hp, const SolverRates& rates, double kappa) {
  hp.validate();
  rates.validate();
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidConfig, "κ must be positive");
  const double b = 1.0 - rates.linear_rate();
  const double p = hp.p;
  RadiusReport out;
  out.nu = std::pow(1.0 / hp.K, 1.0 / p);
  out.rho = std::pow(b * (p + 1.0) / (hp.K * (b + p * (1.0 + rates.omega1 - rates.omega2))), 1.0 / p);
  out.kappa = kappa;
  out.r = std::min(kappa, out.rho);
  return out;
}

/// With a = (1+theta) omega1 and b = 1 - omega1 theta - omega2:
/// rho = (a + 4b - sqrt((a+4b)^2 - 8b^2)) / (4 b gamma), nu = (1 - 1/sqrt 2)/gamma.
inline RadiusReport smale_radius_closed_form(const SmaleParams& sp, const SolverRates& rates, double kappa) {
  sp.validate();
  rates.validate();
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidConfig, "κ must be positive");
  const double a = rates.newton_weight();
  const double b = 1.0 - rates.linear_rate();
  RadiusReport out;
  out.nu = (1.0 - 1.0 / std::sqrt(2.0)) / sp.gamma;
  out.rho = (a + 4.0 * b - std::sqrt((a + 4.0 * b) * (a + 4.0 * b) - 8.0 * b * b)) / (4.0 * b * sp.gamma);
  out.kappa = kappa;
  out.r = std::min(kappa, out.rho);
  return out;
}

/// Closed form when the family has one, numeric radii otherwise.
inline RadiusReport radius_report(const MajorantFunction& f, const SolverRates& rates, double kappa) {
  if (const auto* hp = std::get_if<HolderParams>(&f.params())) return holder_radius_closed_form(*hp, rates, kappa);
  if (const auto* sp = std::get_if<SmaleParams>(&f.params())) return smale_radius_closed_form(*sp, rates, kappa);
  return numeric_radius_report(f, rates, kappa);
}

/// t_0 .. t_{k_max} with t_{k+1} = (1+theta) omega1 |n_f(t_k)| + (omega1 theta + omega2) t_k.
/// Requires 0 <= t0 < rho; t0 = 0 yields the zero sequence. `rho` < 0 means
/// compute it.
inline std::vector<double> majorant_sequence(const MajorantFunction& f, const SolverRates& rates, double t0,
                                             int k_max, double rho = -1.0) {
  rates.validate();
  if (k_max < 0) throw Error(ErrorCode::InvalidArgument, "majorant_sequence: k_max must be >= 0");
  if (!(t0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "majorant_sequence: t0 must be >= 0");
  if (rho < 0.0) rho = radius_rho(f, rates).value;
  if (!(t0 < rho)) {
    std::ostringstream os;
    os << "t0 = " << t0 << " is not below ρ = " << rho;
    throw Error(ErrorCode::OutOfRadius, os.str());
  }
  std::vector<double> t(static_cast<std::size_t>(k_max) + 1, 0.0);
  t[0] = t0;
  for (int k = 0; k < k_max; ++k) {
    const double tk = t[k];
    t[k + 1] = tk > 0.0 ? rates.newton_weight() * std::abs(newton_map(f, tk)) + rates.linear_rate() * tk : 0.0;
  }
  return t;
}

}  // namespace majgn
