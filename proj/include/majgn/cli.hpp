#pragma once

// Commands behind the majgn executable. Each returns the process exit code:
// 0 ok, 2 invalid configuration, 3 solver error, 4 bound violated.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstring>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "majgn/config.hpp"
#include "majgn/io.hpp"
#include "majgn/solver.hpp"
#include "majgn/verification.hpp"

namespace majgn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitBoundViolated = 4;

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BoundViolated: return kExitBoundViolated;
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownProblem:
    case ErrorCode::AnnotationInvalid:
    case ErrorCode::OutOfRadius:
    case ErrorCode::NotFound: return kExitInvalidConfig;
    default: return kExitSolver;
  }
}

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidConfig, "cannot open " + path + " for writing");
  f << content;
}

inline std::string trace_csv(const Trace& trace) {
  std::ostringstream os;
  write_trace_csv(os, trace);
  return os.str();
}

inline void write_trace_files(const RunConfig& cfg, const Trace& trace) {
  write_file(cfg.output.trace_csv, trace_csv(trace));
  write_file(cfg.output.trace_json, trace_to_json(trace).dump(2) + "\n");
}

struct Solved {
  RadiusReport radius;
  MajorantFunction f;
  Vector x0;
  Trace trace;
};

inline Solved run_solver(const RunConfig& cfg) {
  const auto& problem = cfg.require_problem();
  MajorantFunction f = cfg.majorant_function();
  RadiusReport radius = radius_report(f, cfg.solver.rates, effective_kappa(cfg, f));
  Vector x0 = resolve_x0(cfg, radius);
  Trace trace = solve(problem.instance, x0, cfg.solver);
  return {radius, std::move(f), std::move(x0), std::move(trace)};
}

}  // namespace detail

inline int cmd_radius(const RunConfig& cfg, std::ostream& out, bool as_json = false) {
  const RadiusReport rep = config_radius(cfg);
  if (as_json) {
    out << radius_to_json(rep).dump(2) << '\n';
  } else {
    write_radius_table(out, rep);
  }
  return kExitOk;
}

inline int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::optional<detail::Solved> solved;
  try {
    solved = detail::run_solver(cfg);
  } catch (const IterationFailure& e) {
    detail::write_trace_files(cfg, e.partial());
    err << "solver failed at iteration " << e.iteration() << ": " << e.what() << '\n';
    return kExitSolver;
  }
  const detail::Solved& s = *solved;
  detail::write_trace_files(cfg, s.trace);
  out << "problem      " << cfg.require_problem().instance.name() << '\n';
  out << "iterations   " << s.trace.iterations() << '\n';
  out << "final_error  " << format_number(s.trace.final_error) << '\n';
  out << "termination  " << to_string(s.trace.reason) << '\n';
  if (s.trace.iterations() == 0) out << "converged immediately: x0 already meets the gradient tolerance\n";
  const auto errors = s.trace.errors();
  if (!errors.empty()) {
    const RatioWindow win = ratio_window(errors, majgn::detail::error_floor(cfg.require_problem().instance));
    if (win.max_ratio)
      out << "observed_ratio " << format_number(*win.max_ratio) << " (last " << win.window << " steps, bound "
          << format_number(cfg.solver.rates.linear_rate()) << ")\n";
  }
  return kExitOk;
}

inline int cmd_certify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto& problem = cfg.require_problem();
  if (!problem.instance.x_star()) throw Error(ErrorCode::InvalidConfig, "certify needs a problem with known x_star");
  std::optional<detail::Solved> solved;
  try {
    solved = detail::run_solver(cfg);
  } catch (const IterationFailure& e) {
    detail::write_trace_files(cfg, e.partial());
    err << "solver failed at iteration " << e.iteration() << ": " << e.what() << '\n';
    return kExitSolver;
  }
  detail::Solved& s = *solved;
  if (cfg.inject_fault) {
    for (auto& rec : s.trace.steps)
      if (rec.error) *rec.error *= 10.0;
    if (s.trace.final_error) *s.trace.final_error *= 10.0;
  }
  detail::write_trace_files(cfg, s.trace);

  CertifyOptions opts;
  opts.kappa = s.radius.kappa;
  const BoundReport rep = certify_trace(s.trace, problem.instance, s.f, cfg.solver.rates, h3_exponent_of(cfg), opts);
  detail::write_file(cfg.output.report_json, report_to_json(rep).dump(2) + "\n");
  {
    std::ostringstream os;
    write_report_csv(os, rep);
    detail::write_file(cfg.output.report_csv, os.str());
  }
  out << "problem        " << problem.instance.name() << '\n';
  out << "iterations     " << s.trace.iterations() << '\n';
  out << "t0             " << format_number(rep.t0) << "  (r = " << format_number(s.radius.r) << ")\n";
  out << "error <= t_k   " << (rep.majorant_holds ? "holds" : "VIOLATED") << '\n';
  if (rep.h3_certified)
    out << "per-step bound " << (rep.step_bound_holds ? "holds" : "VIOLATED") << "  (p = " << format_number(rep.p)
        << ")\n";
  else
    out << "per-step bound skipped (h3 not certified for p = " << format_number(rep.p) << ")\n";
  out << "rate           " << (rep.rate_holds ? "holds" : "VIOLATED");
  if (rep.empirical_rate) out << "  (" << format_number(*rep.empirical_rate) << " vs " << format_number(rep.rate_bound) << ")";
  out << '\n';
  out << "monotone       " << (rep.monotone ? "yes" : "no") << '\n';
  try {
    require_bounds(rep);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return kExitBoundViolated;
  }
  return kExitOk;
}

/// Command-line values that override the JSON document.
struct Overrides {
  std::optional<std::string> problem;
  std::optional<std::string> family;
  std::optional<double> K, p, gamma;
  std::optional<double> omega1, omega2, theta;
  std::optional<double> kappa;
  std::optional<std::string> b_strategy;
  std::optional<double> c;
  std::optional<std::string> residual;
  std::optional<double> magnitude;
  std::optional<std::vector<double>> x0;
  std::optional<double> x0_fraction;
  std::optional<int> max_iter;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> trace_csv, trace_json, report_json, report_csv;
  bool inject_fault = false;

  void apply(Json& j) const {
    if (problem) j["problem"] = *problem;
    if (family) j["majorant"] = Json{{"family", *family}};
    auto set_majorant = [&j](const char* key, const std::optional<double>& v) {
      if (v) j["majorant"][key] = *v;
    };
    set_majorant("K", K);
    set_majorant("p", p);
    set_majorant("gamma", gamma);
    if (omega1) j["rates"]["omega1"] = *omega1;
    if (omega2) j["rates"]["omega2"] = *omega2;
    if (theta) j["rates"]["theta"] = *theta;
    if (kappa) j["kappa"] = *kappa;
    if ((b_strategy || c) && j.contains("b_strategy") && j["b_strategy"].is_string())
      j["b_strategy"] = Json{{"kind", j["b_strategy"]}};
    if (b_strategy) j["b_strategy"]["kind"] = *b_strategy;
    if (c) j["b_strategy"]["c"] = *c;
    if (residual) j["residual"]["mode"] = *residual;
    if (magnitude) j["residual"]["magnitude"] = *magnitude;
    if (x0) j["x0"] = *x0;
    if (x0_fraction) j["x0"] = Json{{"fraction", *x0_fraction}};
    if (max_iter) j["max_iter"] = *max_iter;
    if (seed) j["seed"] = *seed;
    if (trace_csv) j["output"]["trace_csv"] = *trace_csv;
    if (trace_json) j["output"]["trace_json"] = *trace_json;
    if (report_json) j["output"]["report_json"] = *report_json;
    if (report_csv) j["output"]["report_csv"] = *report_csv;
    if (inject_fault) j["inject_fault"] = true;
  }
};

inline Json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::InvalidConfig, "cannot read config " + path);
  try {
    return Json::parse(f);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

/// MAJGN_SEED, when set to a nonnegative integer.
inline std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("MAJGN_SEED");
  if (!v || !*v) return std::nullopt;
  std::uint64_t seed = 0;
  const auto [ptr, ec] = std::from_chars(v, v + std::strlen(v), seed);
  if (ec != std::errc() || *ptr != '\0') throw Error(ErrorCode::InvalidConfig, "MAJGN_SEED must be a nonnegative integer");
  return seed;
}

/// Runs `fn`, turning library and JSON errors into exit codes on `err`.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const IterationFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const Json::exception& e) {
    err << "error: invalid config: " << e.what() << '\n';
    return kExitInvalidConfig;
  }
}

enum class Command { Radius, Run, Certify };

inline int dispatch(Command cmd, const RunConfig& cfg, std::ostream& out, std::ostream& err, bool json) {
  switch (cmd) {
    case Command::Radius: return cmd_radius(cfg, out, json);
    case Command::Run: return cmd_run(cfg, out, err);
    case Command::Certify: return cmd_certify(cfg, out, err);
  }
  return kExitUsage;
}

namespace detail {

/// "rates.theta" -> "/rates/theta".
inline Json::json_pointer dotted(const std::string& path) {
  std::string p = "/" + path;
  std::replace(p.begin(), p.end(), '.', '/');
  return Json::json_pointer(p);
}

}  // namespace detail

struct MatrixRow {
  std::size_t index = 0;
  std::string label;
  int exit_code = 0;
  std::string output;
  std::string error;
};

/// Expands {"command", "base", "runs", "grid", "output_dir"} into one config
/// per (run, grid point) and executes them on `jobs` threads. Each run is
/// isolated; results come back in expansion order.
inline std::vector<MatrixRow> run_matrix(const Json& doc, int jobs, std::optional<std::uint64_t> seed_override) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "matrix document must be a JSON object");
  const std::string command = doc.value("command", std::string("certify"));
  Command cmd;
  if (command == "radius") cmd = Command::Radius;
  else if (command == "run") cmd = Command::Run;
  else if (command == "certify") cmd = Command::Certify;
  else throw Error(ErrorCode::InvalidConfig, "matrix: \"command\" must be radius, run or certify");

  const Json base = doc.value("base", Json::object());
  Json runs = doc.value("runs", Json::array());
  if (runs.empty()) runs.push_back(Json::object());
  std::vector<std::pair<std::string, std::vector<Json>>> axes;
  if (doc.contains("grid")) {
    for (const auto& [key, values] : doc.at("grid").items()) {
      if (!values.is_array() || values.empty())
        throw Error(ErrorCode::InvalidConfig, "matrix: grid axis " + key + " must be a nonempty array");
      axes.emplace_back(key, std::vector<Json>(values.begin(), values.end()));
    }
  }
  const std::string out_dir = doc.value("output_dir", std::string());

  std::vector<std::pair<std::string, Json>> configs;
  for (const auto& run : runs) {
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
      Json cfg = base;
      cfg.merge_patch(run);
      std::string label = run.value("name", std::string());
      for (std::size_t a = 0; a < axes.size(); ++a) {
        cfg[detail::dotted(axes[a].first)] = axes[a].second[idx[a]];
        label += (label.empty() ? "" : " ") + axes[a].first + "=" + axes[a].second[idx[a]].dump();
      }
      const std::string stem = out_dir.empty() ? std::string() : out_dir + "/run" + std::to_string(configs.size());
      cfg["output"]["trace_csv"] = stem.empty() ? "" : stem + "_trace.csv";
      cfg["output"]["trace_json"] = stem.empty() ? "" : stem + "_trace.json";
      cfg["output"]["report_json"] = stem.empty() ? "" : stem + "_report.json";
      cfg["output"]["report_csv"] = stem.empty() ? "" : stem + "_report.csv";
      configs.emplace_back(label, std::move(cfg));
      std::size_t a = 0;
      while (a < axes.size() && ++idx[a] == axes[a].second.size()) idx[a++] = 0;
      if (a == axes.size()) break;
    }
  }

  std::vector<MatrixRow> rows(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      std::ostringstream out, err;
      MatrixRow& row = rows[i];
      row.index = i;
      row.label = configs[i].first;
      row.exit_code = guarded(err, [&] {
        const RunConfig cfg = parse_run_config(configs[i].second, seed_override);
        return dispatch(cmd, cfg, out, err, false);
      });
      row.output = out.str();
      row.error = err.str();
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(configs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

inline int cmd_matrix(const Json& doc, int jobs, std::ostream& out, std::ostream& err,
                      std::optional<std::uint64_t> seed_override = std::nullopt) {
  const auto rows = run_matrix(doc, jobs, seed_override);
  int worst = kExitOk;
  out << "index,exit,label\n";
  for (const auto& row : rows) {
    out << row.index << ',' << row.exit_code << ",\"" << row.label << "\"\n";
    if (!row.error.empty()) err << "[" << row.index << "] " << row.error;
    worst = std::max(worst, row.exit_code);
  }
  return worst;
}

/// Entry point behind main(): parses argv, merges flags over the JSON config
/// and runs the selected command.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Inexact Gauss-Newton solver with majorant convergence radii"};
  app.require_subcommand(1);
  Overrides ov;
  std::string config_path;
  bool json = false;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON config file");
    sub->add_option("--problem", ov.problem, "built-in problem name");
    sub->add_option("--family", ov.family, "majorant family: holder, lipschitz, smale, glip");
    sub->add_option("--K", ov.K, "Hölder/Lipschitz constant");
    sub->add_option("--p", ov.p, "Hölder exponent");
    sub->add_option("--gamma", ov.gamma, "Smale gamma");
    sub->add_option("--omega1", ov.omega1);
    sub->add_option("--omega2", ov.omega2);
    sub->add_option("--theta", ov.theta, "residual budget theta_bar");
    sub->add_option("--kappa", ov.kappa);
    sub->add_option("--seed", ov.seed);
  };
  auto add_solver = [&](CLI::App* sub) {
    sub->add_option("--b", ov.b_strategy, "B strategy: exact, frozen, scaled");
    sub->add_option("--scale", ov.c, "scale c for --b scaled");
    sub->add_option("--residual", ov.residual, "residual mode: exact, synthetic, truncated");
    sub->add_option("--magnitude", ov.magnitude, "synthetic residual magnitude in [0, 1]");
    sub->add_option("--x0", ov.x0, "absolute start point")->expected(1, -1);
    sub->add_option("--x0-fraction", ov.x0_fraction, "start at this fraction of r from x_star");
    sub->add_option("--max-iter", ov.max_iter);
    sub->add_option("--trace-csv", ov.trace_csv);
    sub->add_option("--trace-json", ov.trace_json);
  };

  auto* radius = app.add_subcommand("radius", "print nu, rho, kappa and r");
  add_common(radius);
  radius->add_flag("--json", json, "print JSON instead of a table");
  auto* run = app.add_subcommand("run", "solve and write the trace");
  add_common(run);
  add_solver(run);
  auto* certify = app.add_subcommand("certify", "solve and check the trace against the majorant bounds");
  add_common(certify);
  add_solver(certify);
  certify->add_option("--report-json", ov.report_json);
  certify->add_option("--report-csv", ov.report_csv);
  certify->add_flag("--inject-fault", ov.inject_fault, "scale recorded errors by 10 before checking");
  auto* matrix = app.add_subcommand("matrix", "run a batch of configs in parallel");
  matrix->add_option("-c,--config", config_path, "matrix JSON document")->required();
  matrix->add_option("-j,--jobs", jobs, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  return guarded(err, [&] {
    const auto seed = ov.seed ? ov.seed : env_seed();
    if (matrix->parsed()) return cmd_matrix(load_json_file(config_path), jobs, out, err, seed);
    Json doc = config_path.empty() ? Json::object() : load_json_file(config_path);
    ov.apply(doc);
    const RunConfig cfg = parse_run_config(doc, seed);
    const Command cmd = radius->parsed() ? Command::Radius : run->parsed() ? Command::Run : Command::Certify;
    return dispatch(cmd, cfg, out, err, json);
  });
}

}  // namespace majgn::cli
