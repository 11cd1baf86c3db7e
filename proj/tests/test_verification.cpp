#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "majgn/problem_suite.hpp"
#include "majgn/verification.hpp"

using namespace majgn;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST(LinearizationError, LinearMapIsExact) {
  Matrix A(3, 2);
  A << 1, 2, -1, 0.5, 3, 1;
  const ProblemInstance lin(
      "linear", [A](const Vector& x) { return Vector(A * x); }, [A](const Vector&) { return A; }, 2, 3);
  Vector x(2), y(2);
  x << 0.4, -1.0;
  y << 2.0, 3.0;
  EXPECT_LE(linearization_error(lin, x, y), 1e-15);
}

TEST(LinearizationError, Poly2HandValue) {
  const auto p = builtin("poly2");
  EXPECT_DOUBLE_EQ(linearization_error(p.instance, scalar(0.5), scalar(0.0)), 0.125);
  EXPECT_EQ(linearization_error(p.instance, scalar(0.5), scalar(0.5)), 0.0);
}

TEST(MajorantLinearizationError, MatchesDefinition) {
  const auto f = lipschitz_majorant(1.0);
  const double t = 0.3, u = 0.1;
  const double direct = f.value(u) - (f.value(t) + f.derivative(t) * (u - t));
  EXPECT_NEAR(majorant_linearization_error(f, t, u), direct, 1e-15);
  EXPECT_NEAR(majorant_linearization_error(f, t, 0.0), 0.045, 1e-15);
}

TEST(CheckLemmaBounds, AtSolution) {
  const auto p = builtin("poly2");
  const auto rep = check_lemma_bounds(p.instance, p.majorant(), scalar(0.0));
  EXPECT_TRUE(rep.all_hold());
  EXPECT_DOUBLE_EQ(rep.pinv.lhs, rep.pinv.rhs);
  EXPECT_EQ(rep.taylor.lhs, 0.0);
  EXPECT_EQ(rep.taylor.rhs, 0.0);
  EXPECT_EQ(rep.newton_step.lhs, 0.0);
  EXPECT_EQ(rep.newton_step.rhs, 0.0);
}

TEST(CheckLemmaBounds, Poly2AtPointThree) {
  const auto p = builtin("poly2");
  const auto rep = check_lemma_bounds(p.instance, p.majorant(), scalar(0.3));
  EXPECT_NEAR(rep.pinv.rhs, 1.0 / 0.7, 1e-15);
  EXPECT_NEAR(rep.pinv.lhs, 1.0 / std::hypot(1.0, 0.3), 1e-15);
  EXPECT_TRUE(rep.pinv.holds);
  EXPECT_NEAR(rep.taylor.lhs, 0.045, 1e-15);
  EXPECT_NEAR(rep.taylor.rhs, 0.045, 1e-15);
  EXPECT_TRUE(rep.taylor.holds);
  EXPECT_TRUE(rep.newton_step.holds);
}

TEST(CheckLemmaBounds, OutOfRadius) {
  const auto p = builtin("poly2");
  try {
    check_lemma_bounds(p.instance, p.majorant(), scalar(1.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfRadius);
  }
}

TEST(CertifyTrace, Poly2AgainstHandRecursions) {
  const auto p = builtin("poly2");
  const auto f = p.majorant();
  SolverConfig c;
  c.grad_tol = 1e-300;
  c.max_iter = 6;
  const Trace tr = solve(p.instance, scalar(0.5), c);
  const auto rep = certify_trace(tr, p.instance, f, c.rates, 1.0);
  EXPECT_TRUE(rep.all_hold());
  EXPECT_TRUE(rep.h3_certified);
  // x+ = x^3/(2(1+x^2)), t+ = t^2/(2(1-t))
  double x = 0.5, t = 0.5;
  for (std::size_t k = 0; k < rep.rows.size() && k <= 6; ++k) {
    EXPECT_NEAR(rep.rows[k].t, t, 1e-15 + 1e-13 * t) << k;
    EXPECT_LE(std::abs(x), t) << k;
    EXPECT_LE(rep.rows[k].error, rep.rows[k].t) << k;
    x = x * x * x / (2 * (1 + x * x));
    t = t * t / (2 * (1 - t));
  }
}

TEST(CertifyTrace, StartAtSolutionIsVacuous) {
  const auto p = builtin("multi-nd");
  const Trace tr = solve(p.instance, *p.instance.x_star(), SolverConfig{});
  ASSERT_EQ(tr.errors().size(), 1u);
  const auto rep = certify_trace(tr, p.instance, p.majorant(), SolverRates::gauss_newton(), 1.0);
  EXPECT_TRUE(rep.all_hold());
  EXPECT_EQ(rep.rows.size(), 1u);
}

TEST(CertifyTrace, SyntheticRateBound) {
  const auto p = builtin("poly2");
  SolverConfig c;
  c.rates = {1.0, 0.0, 0.2};
  c.residual_policy.mode = Synthetic{1.0, 5};
  const Trace tr = solve(p.instance, scalar(0.5), c);
  const auto rep = certify_trace(tr, p.instance, p.majorant(), c.rates, 1.0);
  ASSERT_TRUE(rep.empirical_rate.has_value());
  EXPECT_LE(*rep.empirical_rate, 0.2 + 0.05);
  EXPECT_TRUE(rep.all_hold());
}

TEST(CertifyTrace, CorruptedErrorsViolate) {
  const auto p = builtin("poly2");
  Trace tr = solve(p.instance, scalar(0.5), SolverConfig{});
  for (auto& rec : tr.steps) *rec.error *= 10.0;
  *tr.final_error *= 10.0;
  const auto rep = certify_trace(tr, p.instance, p.majorant(), SolverRates::gauss_newton(), 1.0);
  EXPECT_FALSE(rep.majorant_holds);
  ASSERT_TRUE(rep.majorant_first_violation.has_value());
  EXPECT_EQ(*rep.majorant_first_violation, 0);
  try {
    require_bounds(rep);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoundViolated);
    EXPECT_NE(std::string(e.what()).find("k = 0"), std::string::npos);
  }
}

TEST(CertifyTrace, OutsideRadius) {
  const auto p = builtin("poly2");
  const Trace tr = solve(p.instance, scalar(0.7), SolverConfig{});
  try {
    certify_trace(tr, p.instance, p.majorant(), SolverRates::gauss_newton(), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfRadius);
  }
}

TEST(CertifyTrace, SmaleReportsUnweightedForm) {
  const auto p = builtin("exp2");
  const auto f = p.majorant();
  SolverConfig c;
  c.rates = {1.0, 0.0, 0.3};
  c.residual_policy.mode = Synthetic{1.0, 3};
  const auto radius = radius_report(f, c.rates, p.instance.kappa());
  const Trace tr = solve(p.instance, start_point(p.instance, 0.9 * radius.r, 1), c);
  const auto rep = certify_trace(tr, p.instance, f, c.rates, 1.0);
  EXPECT_TRUE(rep.all_hold());
  EXPECT_TRUE(rep.smale_unweighted_holds.has_value());
}

TEST(RatioWindow, WindowSize) {
  std::vector<double> e;
  for (int k = 0; k < 12; ++k) e.push_back(std::pow(0.5, k));
  const auto w = ratio_window(e, 0.0);
  EXPECT_EQ(w.ratios.size(), 11u);
  EXPECT_EQ(w.window, 5);
  EXPECT_DOUBLE_EQ(*w.max_ratio, 0.5);
  EXPECT_TRUE(w.monotone);
  const std::vector<double> bumpy{1.0, 0.5, 0.6, 0.1};
  EXPECT_FALSE(ratio_window(bumpy, 0.0).monotone);
}

TEST(EmpiricalOrder, PureGaussNewtonQuadratic) {
  const auto p = builtin("poly2");
  const Trace tr = solve(p.instance, scalar(0.5), SolverConfig{});
  EXPECT_GE(empirical_order(tr, p.instance), 1.8);
}

TEST(EmpiricalOrder, FrozenLinear) {
  const auto p = builtin("poly2");
  SolverConfig c;
  c.b_strategy = FrozenB{};
  c.rates = {1.5, 0.5, 0.0};
  const Trace tr = solve(p.instance, scalar(0.5), c);
  EXPECT_NEAR(empirical_order(tr, p.instance), 1.0, 0.1);
}

TEST(EmpiricalOrder, Geometric) {
  std::vector<double> e;
  for (int k = 0; k < 10; ++k) e.push_back(std::ldexp(1.0, -k));
  EXPECT_NEAR(empirical_order(e), 1.0, 1e-14);
}

TEST(EmpiricalOrder, InsufficientData) {
  const std::vector<double> e{1.0, 0.1, 0.01};
  try {
    empirical_order(e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::InsufficientData);
  }
  const std::vector<double> flat{1.0, 1.0, 1.0, 1.0, 1.0};
  EXPECT_THROW(empirical_order(flat), Error);
}

// Lemma inequalities at sampled points inside min(nu, kappa) for every catalog problem.
TEST(VerificationProperties, LemmaBoundsSampled) {
  for (const auto& name : builtin_names()) {
    const auto p = builtin(name);
    const auto f = p.majorant();
    const double nu = radius_nu(f).value;
    const double lim = std::min(nu, p.instance.kappa());
    for (int i = 0; i < 100; ++i) {
      const double dist = lim * (i + 0.5) / 100.0 * (1.0 - 1e-9);
      const Vector x = start_point(p.instance, dist, 1000 + i);
      const auto rep = check_lemma_bounds(p.instance, f, x, nu);
      EXPECT_TRUE(rep.all_hold()) << name << " i=" << i << " pinv " << rep.pinv.lhs << "/" << rep.pinv.rhs
                                  << " taylor " << rep.taylor.lhs << "/" << rep.taylor.rhs << " step "
                                  << rep.newton_step.lhs << "/" << rep.newton_step.rhs;
    }
  }
}
