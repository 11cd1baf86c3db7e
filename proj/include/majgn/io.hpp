#pragma once

// Text output: numbers at 9 significant digits, independent of the locale,
// trace and report tables as CSV, full records as JSON.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <system_error>

#include <json.hpp>

#include "majgn/majorant.hpp"
#include "majgn/solver.hpp"
#include "majgn/verification.hpp"

namespace majgn {

using Json = nlohmann::json;

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // also folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

inline std::string format_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

/// JSON cannot carry inf; such values become strings.
inline Json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

inline Json json_vector(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(json_number(v(i)));
  return out;
}

inline Json json_matrix(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(json_vector(m.row(i).transpose()));
  return out;
}

inline constexpr const char* kTraceCsvHeader = "k,error,grad_norm,step_norm,theta,cond,omega1_obs,omega2_obs";

/// One row per step, plus a closing row for the final iterate whose step
/// columns are empty.
inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << kTraceCsvHeader << '\n';
  for (const auto& rec : trace.steps) {
    os << rec.k << ',' << format_number(rec.error) << ',' << format_number(rec.grad_norm()) << ','
       << format_number(rec.step_norm()) << ',' << format_number(rec.theta) << ',' << format_number(rec.cond_PM)
       << ',' << format_number(rec.omega1_observed) << ',' << format_number(rec.omega2_observed) << '\n';
  }
  os << trace.steps.size() << ',' << format_number(trace.final_error) << ',' << format_number(trace.final_grad_norm)
     << ",,,,,\n";
}

inline Json trace_to_json(const Trace& trace) {
  Json records = Json::array();
  for (const auto& rec : trace.steps) {
    Json r;
    r["k"] = rec.k;
    r["x"] = json_vector(rec.x);
    r["grad"] = json_vector(rec.grad);
    r["step"] = json_vector(rec.step);
    r["residual"] = json_vector(rec.residual);
    r["B"] = json_matrix(rec.B);
    r["P"] = json_matrix(rec.P);
    r["theta"] = json_number(rec.theta);
    r["cond"] = json_number(rec.cond_PM);
    r["omega1_obs"] = json_number(rec.omega1_observed);
    r["omega2_obs"] = json_number(rec.omega2_observed);
    r["error"] = rec.error ? json_number(*rec.error) : Json();
    r["condition_violation"] = rec.condition_violation;
    r["inner_iterations"] = rec.inner_iterations;
    r["direct_fallback"] = rec.direct_fallback;
    records.push_back(std::move(r));
  }
  Json out;
  out["problem"] = trace.problem;
  out["x0"] = json_vector(trace.x0);
  out["iterations"] = trace.iterations();
  out["termination"] = std::string(to_string(trace.reason));
  out["x_final"] = json_vector(trace.x_final);
  out["final_error"] = trace.final_error ? json_number(*trace.final_error) : Json();
  out["final_grad_norm"] = json_number(trace.final_grad_norm);
  out["records"] = std::move(records);
  return out;
}

inline constexpr const char* kReportCsvHeader = "k,error,t,slack,step_lhs,step_rhs";

inline void write_report_csv(std::ostream& os, const BoundReport& rep) {
  os << kReportCsvHeader << '\n';
  for (const auto& row : rep.rows) {
    os << row.k << ',' << format_number(row.error) << ',' << format_number(row.t) << ',' << format_number(row.slack)
       << ',' << format_number(row.step_lhs) << ',' << format_number(row.step_rhs) << '\n';
  }
}

inline Json report_to_json(const BoundReport& rep) {
  Json rows = Json::array();
  for (const auto& row : rep.rows) {
    Json r;
    r["k"] = row.k;
    r["error"] = json_number(row.error);
    r["t"] = json_number(row.t);
    r["slack"] = json_number(row.slack);
    r["step_lhs"] = row.step_lhs ? json_number(*row.step_lhs) : Json();
    r["step_rhs"] = row.step_rhs ? json_number(*row.step_rhs) : Json();
    rows.push_back(std::move(r));
  }
  Json out;
  out["all_hold"] = rep.all_hold();
  out["t0"] = json_number(rep.t0);
  out["p"] = json_number(rep.p);
  out["tolerance"] = json_number(rep.tolerance);
  out["majorant_holds"] = rep.majorant_holds;
  out["majorant_first_violation"] = rep.majorant_first_violation ? Json(*rep.majorant_first_violation) : Json();
  out["h3_certified"] = rep.h3_certified;
  out["step_constant"] = json_number(rep.step_constant);
  out["step_bound_holds"] = rep.step_bound_holds;
  out["step_first_violation"] = rep.step_first_violation ? Json(*rep.step_first_violation) : Json();
  out["rate_bound"] = json_number(rep.rate_bound);
  out["empirical_rate"] = rep.empirical_rate ? json_number(*rep.empirical_rate) : Json();
  out["rate_window"] = rep.rate_window;
  out["rate_holds"] = rep.rate_holds;
  out["monotone"] = rep.monotone;
  out["smale_unweighted_holds"] = rep.smale_unweighted_holds ? Json(*rep.smale_unweighted_holds) : Json();
  out["rows"] = std::move(rows);
  return out;
}

inline Json radius_to_json(const RadiusReport& rep) {
  Json out;
  out["nu"] = json_number(rep.nu);
  out["rho"] = json_number(rep.rho);
  out["kappa"] = json_number(rep.kappa);
  out["r"] = json_number(rep.r);
  out["nu_method"] = std::string(to_string(rep.nu_method));
  out["rho_method"] = std::string(to_string(rep.rho_method));
  out["kappa_method"] = std::string(to_string(rep.kappa_method));
  out["kappa_binds"] = rep.kappa_binds();
  return out;
}

inline void write_radius_table(std::ostream& os, const RadiusReport& rep) {
  os << "quantity  value       method\n";
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.resize(w, ' ');
    return s;
  };
  auto line = [&](const char* name, double v, RadiusMethod m) {
    os << pad(name, 10) << pad(format_number(v), 12) << to_string(m) << '\n';
  };
  line("nu", rep.nu, rep.nu_method);
  line("rho", rep.rho, rep.rho_method);
  line("kappa", rep.kappa, rep.kappa_method);
  os << "r         " << format_number(rep.r) << (rep.kappa_binds() ? "  (kappa binds)" : "  (rho binds)") << '\n';
}

}  // namespace majgn
