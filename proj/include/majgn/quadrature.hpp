#pragma once

// Adaptive Simpson quadrature over [0, t] for integrands that may carry an
// integrable singularity at 0 (e.g. u^{p-1} with 0 < p < 1).
//
// [0, t] is split into geometrically graded panels [t 2^{-j-1}, t 2^{-j}],
// each integrated by adaptive Simpson away from the singular endpoint. Panel
// contributions of an integrable power singularity decay geometrically; the
// remaining tail is added by geometric extrapolation once it drops below the
// tolerance.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "majgn/error.hpp"

namespace majgn {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  /// Tolerance relative to the magnitude of the integral; keeps small
  /// integrals (small t) accurate to more than abs_tol.
  double rel_tol = 1e-11;
  int max_depth = 48;
  int max_panels = 1100;
  std::size_t max_evaluations = 4'000'000;
};

namespace detail {

class SimpsonIntegrator {
 public:
  SimpsonIntegrator(const std::function<double(double)>& g, const QuadratureOptions& opts)
      : g_(g), opts_(opts) {}

  double panel(double a, double b, double tol) {
    const double fa = eval(a);
    const double fb = eval(b);
    const double m = 0.5 * (a + b);
    const double fm = eval(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return refine(a, b, fa, fm, fb, whole, tol, opts_.max_depth);
  }

  /// Plain Simpson estimate, no refinement.
  double rough(double a, double b) {
    return (b - a) / 6.0 * (eval(a) + 4.0 * eval(0.5 * (a + b)) + eval(b));
  }

  std::size_t evaluations() const noexcept { return evaluations_; }

 private:
  double eval(double u) {
    if (++evaluations_ > opts_.max_evaluations) {
      std::ostringstream os;
      os << "evaluation budget of " << opts_.max_evaluations << " exceeded";
      throw Error(ErrorCode::QuadratureFailure, os.str());
    }
    const double v = g_(u);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "integrand is not finite at u = " << u;
      throw Error(ErrorCode::QuadratureFailure, os.str());
    }
    return v;
  }

  double refine(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = eval(lm);
    const double frm = eval(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double both = left + right;
    const double delta = both - whole;
    if (std::abs(delta) <= 15.0 * tol ||
        std::abs(delta) <= 8.0 * std::numeric_limits<double>::epsilon() * std::abs(both)) {
      return both + delta / 15.0;
    }
    if (depth <= 0 || m <= a || b <= m) {
      std::ostringstream os;
      os << "adaptive refinement did not converge on [" << a << ", " << b << "]";
      throw Error(ErrorCode::QuadratureFailure, os.str());
    }
    return refine(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           refine(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
  }

  const std::function<double(double)>& g_;
  const QuadratureOptions& opts_;
  std::size_t evaluations_ = 0;
};

}  // namespace detail

/// Integral of g over [0, t]. g is never evaluated at 0.
inline double integrate_from_zero(const std::function<double(double)>& g, double t,
                                  const QuadratureOptions& opts = {}) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "integration bound must be finite and >= 0");
  if (t == 0.0) return 0.0;

  detail::SimpsonIntegrator simpson(g, opts);

  // Rough magnitude from the first panel sets the effective tolerance.
  double first = simpson.panel(0.5 * t, t, opts.abs_tol);
  const double tol = std::max(std::min(opts.abs_tol, opts.rel_tol * std::abs(first)),
                              std::numeric_limits<double>::min());
  if (tol < opts.abs_tol) first = simpson.panel(0.5 * t, t, 0.25 * tol);

  // Each panel gets a share of the tolerance proportional to its rough size,
  // so self-similar panels near a power singularity cost the same. The tail
  // is extrapolated with iterated Aitken steps on the partial sums, which
  // is exact for a sum of two geometric sequences.
  std::vector<double> sums{first};
  std::vector<double> aitken1, aitken2;
  auto aitken = [](const std::vector<double>& s) -> std::optional<double> {
    const std::size_t n = s.size();
    if (n < 3) return std::nullopt;
    const double d1 = s[n - 1] - s[n - 2];
    const double d2 = s[n - 1] - 2.0 * s[n - 2] + s[n - 3];
    if (d2 == 0.0 || !std::isfinite(d1 * d1 / d2)) return std::nullopt;
    return s[n - 1] - d1 * d1 / d2;
  };
  auto settled = [tol](const std::vector<double>& s) {
    const std::size_t n = s.size();
    return n >= 3 && std::abs(s[n - 1] - s[n - 2]) <= 0.25 * tol && std::abs(s[n - 2] - s[n - 3]) <= tol;
  };
  double prev = first;
  double hi = 0.5 * t;
  for (int j = 1; j < opts.max_panels; ++j) {
    const double lo = 0.5 * hi;
    const double sum = sums.back();
    if (lo < std::numeric_limits<double>::min()) return sum;
    const double rough = simpson.rough(lo, hi);
    const double share = std::max(std::abs(rough) / std::max(std::abs(first), std::numeric_limits<double>::min()),
                                  std::ldexp(1.0, -std::min(j + 1, 60)));
    const double cur = simpson.panel(lo, hi, std::max(0.25 * tol * share, std::numeric_limits<double>::min()));
    sums.push_back(sum + cur);
    hi = lo;
    if (prev != 0.0) {
      const double q = cur / prev;
      if (q >= 0.0 && q < 1.0 && std::abs(cur * q / (1.0 - q)) <= 0.25 * tol) return sums.back() + cur * q / (1.0 - q);
    } else if (cur == 0.0) {
      return sums.back();
    }
    prev = cur;
    if (const auto a = aitken(sums)) {
      aitken1.push_back(*a);
      if (settled(aitken1)) return aitken1.back();
      if (const auto b = aitken(aitken1)) {
        aitken2.push_back(*b);
        if (settled(aitken2)) return aitken2.back();
      }
    }
  }
  std::ostringstream os;
  os << "panel contributions did not decay over " << opts.max_panels
     << " graded panels (integrand may not be integrable at 0)";
  throw Error(ErrorCode::QuadratureFailure, os.str());
}

}  // namespace majgn
