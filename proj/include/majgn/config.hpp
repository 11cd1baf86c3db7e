#pragma once

// Run configuration: one JSON document, validated before any computation.
// The schema is described in configs/README.md.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "majgn/io.hpp"
#include "majgn/problem_suite.hpp"
#include "majgn/solver.hpp"

namespace majgn {

struct X0Absolute {
  Vector x;
};
/// x_star + fraction * r * d, d a unit direction drawn from the seed.
struct X0Fraction {
  double fraction = 0.5;
  std::optional<std::uint64_t> seed;
};

struct OutputPaths {
  std::string trace_csv = "trace.csv";
  std::string trace_json = "trace.json";
  std::string report_json = "report.json";
  std::string report_csv = "report.csv";
};

struct RunConfig {
  std::string name;
  std::optional<AnnotatedProblem> problem;
  /// Replaces the problem's annotation when set.
  std::optional<ConditionClass> majorant;
  std::optional<double> h3_exponent;
  std::optional<double> kappa;
  SolverConfig solver;
  std::variant<X0Absolute, X0Fraction> x0 = X0Fraction{};
  OutputPaths output;
  std::uint64_t seed = 0;
  bool inject_fault = false;

  ConditionClass condition() const {
    if (majorant) return *majorant;
    if (problem) return problem->condition;
    throw Error(ErrorCode::InvalidConfig, "no majorant: give \"majorant\" or a problem with a condition");
  }
  MajorantFunction majorant_function() const { return majorant_for(condition()); }
  const AnnotatedProblem& require_problem() const {
    if (!problem) throw Error(ErrorCode::InvalidConfig, "this command needs a \"problem\"");
    return *problem;
  }
};

/// Exponent p for which h3 holds: Hölder p, Lipschitz and Smale 1, and for a
/// power-sum kernel min(exponent + 1) capped at 1.
inline double default_h3_exponent(const ConditionClass& cls) {
  if (const auto* h = std::get_if<HolderClass>(&cls)) return h->p;
  if (const auto* g = std::get_if<GeneralizedLipschitzClass>(&cls)) {
    double p = 1.0;
    for (const auto& term : g->kernel) p = std::min(p, term.exponent + 1.0);
    return p;
  }
  return 1.0;
}

inline double h3_exponent_of(const RunConfig& cfg) {
  if (cfg.h3_exponent) return *cfg.h3_exponent;
  if (!cfg.majorant && cfg.problem) return cfg.problem->h3_exponent;
  return default_h3_exponent(cfg.condition());
}

/// omega1, omega2 that the B strategy guarantees: exact (1, 0), scaled
/// (1/c, |1 - 1/c|), frozen (1 + w, w) with w = frozen_omega2.
inline SolverRates implied_rates(const BStrategy& b, double theta_bar, double frozen_omega2 = 0.5) {
  SolverRates r;
  r.theta_bar = theta_bar;
  if (const auto* s = std::get_if<ScaledB>(&b)) {
    r.omega1 = 1.0 / s->c;
    r.omega2 = std::abs(1.0 - 1.0 / s->c);
  } else if (std::holds_alternative<FrozenB>(b)) {
    r.omega1 = 1.0 + frozen_omega2;
    r.omega2 = frozen_omega2;
  }
  return r;
}

/// min(kappa) over the problem, the config and, for frozen B, the ball on
/// which the frozen matrix keeps omega2.
inline double effective_kappa(const RunConfig& cfg, const MajorantFunction& f) {
  double k = cfg.kappa.value_or(kInf);
  if (cfg.problem) k = std::min(k, cfg.problem->instance.kappa());
  if (std::holds_alternative<FrozenB>(cfg.solver.b_strategy)) {
    const auto& inst = cfg.require_problem().instance;
    if (!inst.x_star()) throw Error(ErrorCode::InvalidConfig, "frozen B needs a known x_star");
    const SpectralData sd(inst.jacobian(*inst.x_star()));
    k = std::min(k, frozen_ball_radius(f, sd.sigma_max() / sd.sigma_min(), cfg.solver.rates.omega2));
  }
  return k;
}

inline RadiusReport config_radius(const RunConfig& cfg) {
  const MajorantFunction f = cfg.majorant_function();
  return radius_report(f, cfg.solver.rates, effective_kappa(cfg, f));
}

inline Vector resolve_x0(const RunConfig& cfg, const RadiusReport& radius) {
  const auto& inst = cfg.require_problem().instance;
  if (const auto* a = std::get_if<X0Absolute>(&cfg.x0)) {
    if (a->x.size() != inst.dim_in()) throw Error(ErrorCode::InvalidConfig, "x0 has the wrong dimension");
    return a->x;
  }
  const auto& fr = std::get<X0Fraction>(cfg.x0);
  if (!inst.x_star()) throw Error(ErrorCode::InvalidConfig, "x0 as a fraction of r needs a known x_star");
  if (fr.fraction == 0.0) return *inst.x_star();
  if (!std::isfinite(radius.r)) throw Error(ErrorCode::InvalidConfig, "x0 as a fraction of r needs a finite r");
  return start_point(inst, fr.fraction * radius.r, fr.seed.value_or(cfg.seed));
}

namespace detail {

inline const Json& require_key(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorCode::InvalidConfig, where + ": missing \"" + key + "\"");
  return j.at(key);
}

inline double get_number(const Json& j, const char* key, const std::string& where) {
  const Json& v = require_key(j, key, where);
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && (v == "inf" || v == "Infinity")) return kInf;
  throw Error(ErrorCode::InvalidConfig, where + ": \"" + key + "\" must be a number");
}

inline double get_number(const Json& j, const char* key, const std::string& where, double fallback) {
  return j.is_object() && j.contains(key) ? get_number(j, key, where) : fallback;
}

inline std::string get_string(const Json& j, const char* key, const std::string& where, std::string fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw Error(ErrorCode::InvalidConfig, where + ": \"" + key + "\" must be a string");
  return j.at(key).get<std::string>();
}

inline std::uint64_t get_seed(const Json& j, const char* key, const std::string& where, std::uint64_t fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw Error(ErrorCode::InvalidConfig, where + ": \"" + key + "\" must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

inline Vector get_vector(const Json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw Error(ErrorCode::InvalidConfig, where + " must be a nonempty array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw Error(ErrorCode::InvalidConfig, where + " must hold numbers");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

}  // namespace detail

inline ConditionClass parse_condition(const Json& j) {
  const std::string where = "majorant";
  const std::string family = detail::get_string(j, "family", where, "");
  ConditionClass cls;
  if (family == "holder") {
    cls = HolderClass{detail::get_number(j, "K", where), detail::get_number(j, "p", where)};
    const auto& h = std::get<HolderClass>(cls);
    HolderParams{h.K, h.p}.validate();
  } else if (family == "lipschitz") {
    cls = LipschitzClass{detail::get_number(j, "K", where)};
    HolderParams{std::get<LipschitzClass>(cls).K, 1.0}.validate();
  } else if (family == "smale") {
    cls = SmaleClass{detail::get_number(j, "gamma", where)};
    SmaleParams{std::get<SmaleClass>(cls).gamma}.validate();
  } else if (family == "glip") {
    GeneralizedLipschitzClass g;
    const Json& kernel = detail::require_key(j, "kernel", where);
    if (!kernel.is_array() || kernel.empty())
      throw Error(ErrorCode::InvalidConfig, "majorant: \"kernel\" must be a nonempty array of {coef, exponent}");
    for (const auto& term : kernel)
      g.kernel.push_back({detail::get_number(term, "coef", "kernel term"),
                          detail::get_number(term, "exponent", "kernel term")});
    g.R = detail::get_number(j, "R", where, kInf);
    GeneralizedLipschitzParams::power_sum(g.kernel, g.R).validate();
    cls = g;
  } else {
    throw Error(ErrorCode::InvalidConfig, "majorant: \"family\" must be holder, lipschitz, smale or glip");
  }
  return cls;
}

/// Inline polynomial problem: {"name", "dim_in", "components": [[{"coef",
/// "powers"}, ...], ...], "x_star", "kappa", "beta", "condition",
/// "h3_exponent"}.
inline AnnotatedProblem parse_polynomial_problem(const Json& j, const std::optional<ConditionClass>& fallback) {
  const std::string where = "problem";
  const std::string name = detail::get_string(j, "name", where, "polynomial");
  const double dim = detail::get_number(j, "dim_in", where);
  if (!(dim >= 1) || dim != std::floor(dim)) throw Error(ErrorCode::InvalidConfig, "problem: dim_in must be a positive integer");
  const auto n = static_cast<Eigen::Index>(dim);
  const Json& comps = detail::require_key(j, "components", where);
  if (!comps.is_array() || comps.empty()) throw Error(ErrorCode::InvalidConfig, "problem: components must be a nonempty array");
  std::vector<std::vector<Monomial>> components;
  for (const auto& comp : comps) {
    if (!comp.is_array()) throw Error(ErrorCode::InvalidConfig, "problem: each component is an array of monomials");
    std::vector<Monomial> monos;
    for (const auto& m : comp) {
      Monomial mono;
      mono.coef = detail::get_number(m, "coef", "monomial");
      const Json& powers = detail::require_key(m, "powers", "monomial");
      if (!powers.is_array()) throw Error(ErrorCode::InvalidConfig, "monomial: powers must be an array");
      for (const auto& e : powers) {
        if (!e.is_number_integer()) throw Error(ErrorCode::InvalidConfig, "monomial: powers must be integers");
        mono.powers.push_back(e.get<int>());
      }
      monos.push_back(std::move(mono));
    }
    components.push_back(std::move(monos));
  }
  std::optional<Vector> x_star;
  if (j.contains("x_star")) x_star = detail::get_vector(j.at("x_star"), "problem.x_star");
  const double kappa = detail::get_number(j, "kappa", where, kInf);
  std::optional<double> beta;
  if (j.contains("beta")) beta = detail::get_number(j, "beta", where);

  std::optional<ConditionClass> cls = fallback;
  if (j.contains("condition")) cls = parse_condition(j.at("condition"));
  if (!cls) throw Error(ErrorCode::InvalidConfig, "problem: inline problems need a \"condition\" or a top-level \"majorant\"");
  ProblemInstance inst = [&] {
    try {
      return polynomial_problem(name, n, std::move(components), x_star, kappa, beta);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, std::string("problem: ") + e.what());
    }
  }();
  const double p = detail::get_number(j, "h3_exponent", where, default_h3_exponent(*cls));
  return {std::move(inst), *cls, p, "inline polynomial problem"};
}

inline ResidualPolicy parse_residual(const Json& j, std::uint64_t seed) {
  const std::string where = "residual";
  ResidualPolicy policy;
  const std::string mode = detail::get_string(j, "mode", where, "exact");
  if (mode == "exact") {
    policy.mode = ExactSolve{};
  } else if (mode == "synthetic") {
    policy.mode = Synthetic{detail::get_number(j, "magnitude", where, 1.0), detail::get_seed(j, "seed", where, seed)};
  } else if (mode == "truncated") {
    policy.mode = TruncatedIterative{static_cast<int>(detail::get_number(j, "max_inner", where, 200))};
  } else {
    throw Error(ErrorCode::InvalidConfig, "residual: \"mode\" must be exact, synthetic or truncated");
  }
  const std::string pre = detail::get_string(j, "preconditioner", where, "identity");
  if (pre == "identity") {
    policy.preconditioner = IdentityPreconditioner{};
  } else if (pre == "jacobi") {
    policy.preconditioner = JacobiPreconditioner{};
  } else {
    throw Error(ErrorCode::InvalidConfig, "residual: \"preconditioner\" must be identity or jacobi");
  }
  policy.theta.requested = detail::get_number(j, "theta_requested", where, kInf);
  policy.theta.decay = detail::get_number(j, "theta_decay", where, 1.0);
  return policy;
}

inline BStrategy parse_b_strategy(const Json& j) {
  const std::string kind = j.is_string() ? j.get<std::string>() : detail::get_string(j, "kind", "b_strategy", "exact");
  if (kind == "exact") return ExactB{};
  if (kind == "frozen") return FrozenB{};
  if (kind == "scaled") return ScaledB{j.is_object() ? detail::get_number(j, "c", "b_strategy", 1.0) : 1.0};
  throw Error(ErrorCode::InvalidConfig, "b_strategy: \"kind\" must be exact, frozen or scaled");
}

/// Builds and validates a RunConfig. `seed_override` (from MAJGN_SEED) wins
/// over the document's "seed".
inline RunConfig parse_run_config(const Json& j, std::optional<std::uint64_t> seed_override = std::nullopt) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  RunConfig cfg;
  cfg.seed = seed_override.value_or(detail::get_seed(j, "seed", "config", 0));
  cfg.name = detail::get_string(j, "name", "config", "");
  if (j.contains("majorant")) cfg.majorant = parse_condition(j.at("majorant"));
  if (j.contains("h3_exponent")) cfg.h3_exponent = detail::get_number(j, "h3_exponent", "config");
  if (j.contains("kappa")) {
    cfg.kappa = detail::get_number(j, "kappa", "config");
    if (!(*cfg.kappa > 0.0)) throw Error(ErrorCode::InvalidConfig, "κ must be positive");
  }
  if (j.contains("problem")) {
    const Json& p = j.at("problem");
    if (p.is_string()) {
      cfg.problem = builtin(p.get<std::string>());
    } else if (p.is_object()) {
      cfg.problem = parse_polynomial_problem(p, cfg.majorant);
    } else {
      throw Error(ErrorCode::InvalidConfig, "problem must be a name or an inline definition");
    }
  }

  auto& s = cfg.solver;
  s.b_strategy = j.contains("b_strategy") ? parse_b_strategy(j.at("b_strategy")) : BStrategy{ExactB{}};
  const Json rates = j.value("rates", Json::object());
  const double theta = detail::get_number(rates, "theta", "rates", 0.0);
  s.rates = implied_rates(s.b_strategy, theta);
  s.rates.omega1 = detail::get_number(rates, "omega1", "rates", s.rates.omega1);
  s.rates.omega2 = detail::get_number(rates, "omega2", "rates", s.rates.omega2);
  s.residual_policy = parse_residual(j.value("residual", Json::object()), cfg.seed);
  s.max_iter = static_cast<int>(detail::get_number(j, "max_iter", "config", 100));
  s.grad_tol = detail::get_number(j, "grad_tol", "config", s.grad_tol);
  s.step_tol = detail::get_number(j, "step_tol", "config", s.step_tol);
  s.validate();

  if (j.contains("x0")) {
    const Json& x0 = j.at("x0");
    if (x0.is_array()) {
      cfg.x0 = X0Absolute{detail::get_vector(x0, "x0")};
    } else if (x0.is_object()) {
      X0Fraction fr;
      fr.fraction = detail::get_number(x0, "fraction", "x0");
      if (x0.contains("seed")) fr.seed = detail::get_seed(x0, "seed", "x0", 0);
      if (!(fr.fraction >= 0.0 && fr.fraction < 1.0))
        throw Error(ErrorCode::InvalidConfig, "x0.fraction must lie in [0, 1)");
      cfg.x0 = fr;
    } else {
      throw Error(ErrorCode::InvalidConfig, "x0 must be an array or {\"fraction\", \"seed\"}");
    }
  }
  if (j.contains("output")) {
    const Json& o = j.at("output");
    cfg.output.trace_csv = detail::get_string(o, "trace_csv", "output", cfg.output.trace_csv);
    cfg.output.trace_json = detail::get_string(o, "trace_json", "output", cfg.output.trace_json);
    cfg.output.report_json = detail::get_string(o, "report_json", "output", cfg.output.report_json);
    cfg.output.report_csv = detail::get_string(o, "report_csv", "output", cfg.output.report_csv);
  }
  cfg.inject_fault = j.value("inject_fault", false);
  return cfg;
}

}  // namespace majgn
