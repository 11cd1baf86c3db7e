#pragma once

// Built-in zero-residual problems with known x_star, kappa, beta and
// analytically derived condition-class constants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "majgn/error.hpp"
#include "majgn/majorant.hpp"
#include "majgn/operator.hpp"
#include "majgn/problem.hpp"
#include "majgn/residual.hpp"

namespace majgn {

struct LipschitzClass {
  double K = 1.0;
};
struct HolderClass {
  double K = 1.0;
  double p = 1.0;
};
struct SmaleClass {
  double gamma = 1.0;
};
struct GeneralizedLipschitzClass {
  std::vector<PowerTerm> kernel;
  double R = kInf;
};

using ConditionClass = std::variant<LipschitzClass, HolderClass, SmaleClass, GeneralizedLipschitzClass>;

inline MajorantFunction majorant_for(const ConditionClass& cls) {
  return std::visit(
      [](const auto& c) -> MajorantFunction {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LipschitzClass>) {
          return lipschitz_majorant(c.K);
        } else if constexpr (std::is_same_v<T, HolderClass>) {
          return holder_majorant({c.K, c.p});
        } else if constexpr (std::is_same_v<T, SmaleClass>) {
          return smale_majorant({c.gamma});
        } else {
          return glip_majorant(GeneralizedLipschitzParams::power_sum(c.kernel, c.R));
        }
      },
      cls);
}

struct AnnotatedProblem {
  ProblemInstance instance;
  ConditionClass condition;
  /// Exponent p for which h3 holds for the annotated majorant.
  double h3_exponent = 1.0;
  std::string provenance;

  MajorantFunction majorant() const { return majorant_for(condition); }
};

namespace detail {

inline Vector vec1(double v) { return Vector::Constant(1, v); }

inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

/// 5x5 Householder reflection I - 2uu^T/(u^T u), u = (1, 2, 3, 4, 5).
inline Matrix reflection5() {
  Vector u(5);
  u << 1, 2, 3, 4, 5;
  return Matrix::Identity(5, 5) - 2.0 * u * u.transpose() / u.squaredNorm();
}

}  // namespace detail

/// F(x) = (x, x^2/2): x_star = 0, beta = 1, ||F'(x) - F'(y)|| = |x - y|.
inline AnnotatedProblem poly2_problem() {
  ProblemInstance inst(
      "poly2", [](const Vector& x) { return Vector((Vector(2) << x(0), 0.5 * x(0) * x(0)).finished()); },
      [](const Vector& x) { return Matrix((Matrix(2, 1) << 1.0, x(0)).finished()); }, 1, 2, detail::vec1(0.0), kInf,
      1.0);
  return {std::move(inst), LipschitzClass{1.0}, 1.0,
          "F'(x) = (1, x)^T so ||F'(x) - F'(y)|| = |x - y|; J(0) = (1, 0)^T gives beta = 1, hence K = beta * 1 = 1; "
          "the majorant condition holds with equality."};
}

/// F(x) = (e^x - 1, x): analytic, F^(n)(0) = (1, 0) for n >= 2, beta = 1/sqrt 2,
/// gamma = sup_n (beta / n!)^{1/(n-1)} = beta/2 = sqrt(2)/4 (attained at n = 2).
inline AnnotatedProblem exp2_problem() {
  const double beta = 1.0 / std::sqrt(2.0);
  const double gamma = std::sqrt(2.0) / 4.0;
  ProblemInstance inst(
      "exp2", [](const Vector& x) { return Vector((Vector(2) << std::expm1(x(0)), x(0)).finished()); },
      [](const Vector& x) { return Matrix((Matrix(2, 1) << std::exp(x(0)), 1.0).finished()); }, 1, 2,
      detail::vec1(0.0), 1.0 / gamma, beta);
  return {std::move(inst), SmaleClass{gamma}, 1.0,
          "F^(n)(0) = (1, 0) for n >= 2 and J(0) = (1, 1)^T so beta = 1/sqrt(2); beta/n! raised to 1/(n-1) is "
          "largest at n = 2, giving gamma = sqrt(2)/4; kappa = 1/gamma is the Smale majorant's domain."};
}

/// F(x) = (x, |x|^{1+p}/(1+p)): F'(x) = (1, sgn(x)|x|^p)^T is p-Hölder but not
/// Lipschitz at 0; ||F'(x) - F'(tau x)|| = (1 - tau^p)|x|^p exactly.
inline AnnotatedProblem holder_problem(double p = 0.5) {
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "holder problem needs p in (0, 1]");
  ProblemInstance inst(
      "holder-p",
      [p](const Vector& x) {
        return Vector((Vector(2) << x(0), std::pow(std::abs(x(0)), 1.0 + p) / (1.0 + p)).finished());
      },
      [p](const Vector& x) {
        return Matrix((Matrix(2, 1) << 1.0, detail::sgn(x(0)) * std::pow(std::abs(x(0)), p)).finished());
      },
      1, 2, detail::vec1(0.0), kInf, 1.0);
  std::ostringstream prov;
  prov << "F'(x) - F'(x_star + tau(x - x_star)) = (0, sgn(x)|x|^p (1 - tau^p)) for tau in [0, 1]; beta = 1, so the "
          "Hölder condition holds with K = 1, p = "
       << p << " and equality.";
  return {std::move(inst), HolderClass{1.0, p}, p, prov.str()};
}

/// R^3 -> R^5: F(x) = Q_{1:3} S v + s Q_{3:5} h(v), v = x - x_star, with Q an
/// orthogonal reflection, S = diag(2, 1, 0.2) and h(v) = (v2 v3, v1 v3, v1 v2).
/// sigma(F'(x_star)) = (2, 1, 0.2): beta = 5, cond = 10. F'(x) - F'(y) =
/// s Q_{3:5} H(x - y) with H(v) the hollow symmetric matrix of v, whose norm is
/// at most (2/sqrt 3)||v||, so K = beta s 2/sqrt 3.
inline AnnotatedProblem multi_nd_problem() {
  static constexpr double s = 0.2;
  const Matrix Q = detail::reflection5();
  const Matrix lin = Q.leftCols(3) * Vector((Vector(3) << 2.0, 1.0, 0.2).finished()).asDiagonal();
  const Matrix quad = Q.rightCols(3);
  const Vector x_star = (Vector(3) << 1.0, -1.0, 0.5).finished();
  auto F = [lin, quad, x_star](const Vector& x) {
    const Vector v = x - x_star;
    const Vector h = (Vector(3) << v(1) * v(2), v(0) * v(2), v(0) * v(1)).finished();
    return Vector(lin * v + s * quad * h);
  };
  auto J = [lin, quad, x_star](const Vector& x) {
    const Vector v = x - x_star;
    Matrix H(3, 3);
    H << 0.0, v(2), v(1), v(2), 0.0, v(0), v(1), v(0), 0.0;
    return Matrix(lin + s * quad * H);
  };
  const double beta = 5.0;
  const double K = beta * s * 2.0 / std::sqrt(3.0);
  ProblemInstance inst("multi-nd", F, J, 3, 5, x_star, kInf, beta);
  return {std::move(inst), LipschitzClass{K}, 1.0,
          "F'(x_star) has orthonormal-column factor times diag(2, 1, 0.2): beta = 5, cond = 10. The Jacobian "
          "variation is s Q H(v) with ||H(v)|| <= (2/sqrt 3)||v|| (largest root of l^3 - l - 2 v1 v2 v3 at "
          "|v1 v2 v3| = 3^{-3/2}), so K = 5 * 0.2 * 2/sqrt(3)."};
}

/// F(x) = (x, c1 |x|^{3/2}/(3/2) + c2 x|x|/2) with F'(x)_2 = sgn(x)(c1 |x|^{1/2} + c2 |x|).
/// The variation over [tau|x|, |x|] equals int L with L(u) = c1/(2 sqrt u) + c2,
/// a decreasing kernel singular at 0. t^{1/2} L(t) is nondecreasing, so h3
/// holds with p = 1/2.
inline AnnotatedProblem glip_sing_problem() {
  constexpr double c1 = 1.0;
  constexpr double c2 = 0.5;
  ProblemInstance inst(
      "glip-sing",
      [](const Vector& x) {
        const double a = std::abs(x(0));
        return Vector((Vector(2) << x(0), c1 * a * std::sqrt(a) / 1.5 + c2 * x(0) * x(0) / 2.0).finished());
      },
      [](const Vector& x) {
        const double a = std::abs(x(0));
        return Matrix((Matrix(2, 1) << 1.0, detail::sgn(x(0)) * (c1 * std::sqrt(a) + c2 * a)).finished());
      },
      1, 2, detail::vec1(0.0), kInf, 1.0);
  return {std::move(inst), GeneralizedLipschitzClass{{{0.5 * c1, -0.5}, {c2, 0.0}}, kInf}, 0.5,
          "beta = 1 and |h(x) - h(tau x)| = c1 |x|^{1/2}(1 - tau^{1/2}) + c2 |x|(1 - tau) = int_{tau|x|}^{|x|} "
          "(c1/(2 sqrt u) + c2) du with c1 = 1, c2 = 1/2."};
}

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"poly2", "exp2", "holder-p", "multi-nd", "glip-sing"};
  return names;
}

inline AnnotatedProblem builtin(const std::string& name) {
  if (name == "poly2") return poly2_problem();
  if (name == "exp2") return exp2_problem();
  if (name == "holder-p") return holder_problem(0.5);
  if (name == "multi-nd") return multi_nd_problem();
  if (name == "glip-sing") return glip_sing_problem();
  throw Error(ErrorCode::UnknownProblem, "no built-in problem named '" + name + "'");
}

/// c * prod_j x_j^{powers_j}.
struct Monomial {
  double coef = 0.0;
  std::vector<int> powers;
};

/// F_i(x) = sum of monomials of component i; the Jacobian is differentiated
/// term by term.
inline ProblemInstance polynomial_problem(std::string name, Eigen::Index dim_in,
                                          std::vector<std::vector<Monomial>> components,
                                          std::optional<Vector> x_star = std::nullopt, double kappa = kInf,
                                          std::optional<double> beta = std::nullopt) {
  for (const auto& comp : components)
    for (const auto& mono : comp) {
      if (static_cast<Eigen::Index>(mono.powers.size()) != dim_in)
        throw Error(ErrorCode::InvalidConfig, "monomial power list must have one entry per variable");
      if (std::any_of(mono.powers.begin(), mono.powers.end(), [](int e) { return e < 0; }))
        throw Error(ErrorCode::InvalidConfig, "monomial powers must be nonnegative");
    }
  const auto m = static_cast<Eigen::Index>(components.size());
  auto F = [components](const Vector& x) {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(components.size()));
    for (std::size_t i = 0; i < components.size(); ++i)
      for (const auto& mono : components[i]) {
        double term = mono.coef;
        for (std::size_t j = 0; j < mono.powers.size(); ++j) term *= std::pow(x(j), mono.powers[j]);
        out(i) += term;
      }
    return out;
  };
  auto J = [components, dim_in](const Vector& x) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(components.size()), dim_in);
    for (std::size_t i = 0; i < components.size(); ++i)
      for (const auto& mono : components[i])
        for (Eigen::Index j = 0; j < dim_in; ++j) {
          if (mono.powers[j] == 0) continue;
          double term = mono.coef * mono.powers[j] * std::pow(x(j), mono.powers[j] - 1);
          for (Eigen::Index l = 0; l < dim_in; ++l)
            if (l != j) term *= std::pow(x(l), mono.powers[l]);
          out(i, j) += term;
        }
    return out;
  };
  return ProblemInstance(std::move(name), F, J, dim_in, m, std::move(x_star), kappa, beta);
}

struct AnnotationReport {
  double max_violation = -kInf;  // max over samples of LHS - RHS
  Vector worst_x;
  double worst_tau = 0.0;
  int samples = 0;
  double sample_radius = 0.0;
};

/// Radius over which the annotation is sampled: min(kappa, R, 2 nu), pulled
/// inside open boundaries.
inline double annotation_sample_radius(const AnnotatedProblem& problem, const MajorantFunction& f) {
  const double nu = radius_nu(f).value;
  double s = std::min({problem.instance.kappa(), f.domain_radius(), 2.0 * nu});
  if (!std::isfinite(s)) s = 1.0;
  return s * (1.0 - 1e-6);
}

/// Samples (x, tau) in B(x_star, s) x [0, 1] and evaluates
///     beta ||F'(x) - F'(x_star + tau(x - x_star))||  <=  f'(||x - x_star||) - f'(tau ||x - x_star||).
/// Throws AnnotationInvalid with the witness when the violation exceeds `slack`.
inline AnnotationReport validate_annotation(const AnnotatedProblem& problem, int samples, std::uint64_t seed = 2024,
                                            double slack = 1e-9) {
  const auto& inst = problem.instance;
  if (!inst.x_star()) throw Error(ErrorCode::InvalidArgument, "validate_annotation needs a known x_star");
  const Vector& xs = *inst.x_star();
  const double beta = *inst.beta();
  const MajorantFunction f = problem.majorant();
  const Matrix J_star = inst.jacobian(xs);

  AnnotationReport rep;
  rep.sample_radius = annotation_sample_radius(problem, f);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = inst.dim_in();
  for (int i = 0; i < samples; ++i) {
    Vector d(n);
    for (Eigen::Index j = 0; j < n; ++j) d(j) = normal(rng);
    if (d.norm() == 0.0) d(0) = 1.0;
    d.normalize();
    const double dist = (i % 2 == 0) ? rep.sample_radius * unit(rng)
                                     : rep.sample_radius * std::pow(10.0, -6.0 * unit(rng));
    double tau = unit(rng);
    if (i % 10 == 0) tau = 0.0;
    if (i % 10 == 5) tau = 1.0;
    const Vector x = xs + dist * d;
    const Vector y = xs + tau * (x - xs);
    const double lhs = beta * spectral_norm(Matrix(inst.jacobian(x) - inst.jacobian(y)));
    const double t = (x - xs).norm();
    const double rhs = f.excess_derivative(t) - f.excess_derivative(tau * t);
    const double viol = lhs - rhs;
    if (viol > rep.max_violation) {
      rep.max_violation = viol;
      rep.worst_x = x;
      rep.worst_tau = tau;
    }
    ++rep.samples;
  }
  if (rep.max_violation > slack) {
    std::ostringstream os;
    os << problem.instance.name() << ": majorant condition fails by " << rep.max_violation << " at x = ("
       << rep.worst_x.transpose() << "), tau = " << rep.worst_tau;
    throw Error(ErrorCode::AnnotationInvalid, os.str());
  }
  return rep;
}

/// x_star + distance * d with d a unit direction drawn from `seed`.
inline Vector start_point(const ProblemInstance& problem, double distance, std::uint64_t seed) {
  if (!problem.x_star()) throw Error(ErrorCode::InvalidArgument, "start_point needs a known x_star");
  Vector d = detail::seeded_direction(seed, 0, problem.dim_in());
  d.normalize();
  return *problem.x_star() + distance * d;
}

}  // namespace majgn
