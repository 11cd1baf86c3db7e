// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: majgn_acceptance [golden_dir] [--update-golden]

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "majgn/cli.hpp"
#include "majgn/majgn.hpp"

using namespace majgn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> failures;

  void fail(const std::string& what) {
    pass = false;
    if (failures.size() < 5) failures.push_back(what);
  }
};

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::string fmt(double v) { return format_number(v); }

// 1. Numeric rho against the Hölder and Smale closed forms.
Outcome closed_form_radii() {
  Outcome o;
  int combos = 0;
  double worst = 0.0;
  for (double theta : {0.0, 0.2, 0.4})
    for (double w1 : {0.8, 1.0, 1.3})
      for (double w2 : {0.0, 0.1, 0.3}) {
        const SolverRates r{w1, w2, theta};
        if (!(w2 < w1) || r.linear_rate() >= 1.0) continue;
        for (const HolderParams hp : {HolderParams{1.0, 1.0}, HolderParams{2.5, 0.5}, HolderParams{0.7, 0.8}}) {
          ++combos;
          const double numeric = numeric_radius_report(holder_majorant(hp), r, kInf).rho;
          const double closed = holder_radius_closed_form(hp, r, kInf).rho;
          worst = std::max(worst, rel_diff(numeric, closed));
          if (rel_diff(numeric, closed) > 1e-8)
            o.fail("holder K=" + fmt(hp.K) + " p=" + fmt(hp.p) + ": " + fmt(numeric) + " vs " + fmt(closed));
        }
        for (double gamma : {0.5, 1.5}) {
          ++combos;
          const double numeric = numeric_radius_report(smale_majorant({gamma}), r, kInf).rho;
          const double closed = smale_radius_closed_form({gamma}, r, kInf).rho;
          worst = std::max(worst, rel_diff(numeric, closed));
          if (rel_diff(numeric, closed) > 1e-8)
            o.fail("smale gamma=" + fmt(gamma) + ": " + fmt(numeric) + " vs " + fmt(closed));
        }
      }
  const auto gn = SolverRates::gauss_newton();
  const double classic = numeric_radius_report(lipschitz_majorant(1.0), gn, kInf).r;
  if (std::abs(classic - 2.0 / 3.0) > 1e-8 * 2.0 / 3.0) o.fail("K=1, p=1 pure GN: r = " + fmt(classic));
  if (combos < 20) o.fail("only " + std::to_string(combos) + " combinations");
  o.detail = std::to_string(combos) + " combinations, max rel diff " + fmt(worst) + ", K=1 p=1 r=" + fmt(classic);
  return o;
}

// 2. Decreasing kernel L(u) = K p u^{p-1} reproduces Hölder nu and rho.
Outcome glip_equivalence() {
  Outcome o;
  double worst = 0.0;
  for (const SolverRates r : {SolverRates::gauss_newton(), SolverRates{1.0, 0.1, 0.2}})
    for (double p : {0.5, 0.75, 1.0}) {
      const double K = 1.3;
      const auto glip = numeric_radius_report(glip_majorant(GeneralizedLipschitzParams::holder_like(K, p)), r, kInf);
      const auto closed = holder_radius_closed_form({K, p}, r, kInf);
      const double d = std::max(rel_diff(glip.nu, closed.nu), rel_diff(glip.rho, closed.rho));
      worst = std::max(worst, d);
      if (d > 1e-7) o.fail("p=" + fmt(p) + " nu " + fmt(glip.nu) + "/" + fmt(closed.nu) + " rho " + fmt(glip.rho) + "/" +
                           fmt(closed.rho));
    }
  o.detail = "p in {0.5, 0.75, 1}, max rel diff " + fmt(worst);
  return o;
}

struct MatrixCase {
  std::string label;
  bool lipschitz = false;
  bool pure_gn = false;
  bool synthetic = false;
  BoundReport report;
  std::optional<double> order;
};

struct MatrixResult {
  std::vector<MatrixCase> cases;
  std::vector<std::string> errors;
};

// Catalog x {exact, frozen, scaled 1.25} x {exact solve, synthetic 0/0.1/0.3} x {0.5 r, 0.9 r}.
MatrixResult run_matrix() {
  MatrixResult res;
  const std::vector<Json> strategies{"exact", "frozen", Json{{"kind", "scaled"}, {"c", 1.25}}};
  struct Residual {
    const char* mode;
    double theta;
  };
  const std::vector<Residual> residuals{{"exact", 0.0}, {"synthetic", 0.0}, {"synthetic", 0.1}, {"synthetic", 0.3}};
  std::uint64_t seed = 100;
  for (const auto& name : builtin_names())
    for (const auto& b : strategies)
      for (const auto& rs : residuals)
        for (double frac : {0.5, 0.9}) {
          Json doc{{"problem", name},
                   {"b_strategy", b},
                   {"rates", {{"theta", rs.theta}}},
                   {"residual", {{"mode", rs.mode}}},
                   {"seed", ++seed}};
          MatrixCase c;
          c.label = name + " b=" + b.dump() + " residual=" + rs.mode + " theta=" + fmt(rs.theta) + " x0=" + fmt(frac) + "r";
          try {
            const RunConfig cfg = parse_run_config(doc);
            const auto& prob = cfg.require_problem();
            const auto f = cfg.majorant_function();
            const auto radius = radius_report(f, cfg.solver.rates, effective_kappa(cfg, f));
            const Vector x0 = start_point(prob.instance, frac * radius.r, cfg.seed);
            const Trace tr = solve(prob.instance, x0, cfg.solver);
            CertifyOptions opts;
            opts.kappa = radius.kappa;
            c.report = certify_trace(tr, prob.instance, f, cfg.solver.rates, h3_exponent_of(cfg), opts);
            c.lipschitz = std::holds_alternative<LipschitzClass>(prob.condition);
            c.pure_gn = std::holds_alternative<ExactB>(cfg.solver.b_strategy) && std::string(rs.mode) == "exact";
            c.synthetic = std::string(rs.mode) == "synthetic";
            if (c.pure_gn) {
              try {
                c.order = empirical_order(tr, prob.instance);
              } catch (const Error&) {
              }
            }
            res.cases.push_back(std::move(c));
          } catch (const std::exception& e) {
            res.errors.push_back(c.label + ": " + e.what());
          }
        }
  return res;
}

// 3. ||x_k - x*|| <= t_k everywhere in the matrix.
Outcome majorant_domination(const MatrixResult& m) {
  Outcome o;
  for (const auto& e : m.errors) o.fail(e);
  double min_slack = kInf;
  std::size_t rows = 0;
  for (const auto& c : m.cases) {
    for (const auto& row : c.report.rows) {
      ++rows;
      min_slack = std::min(min_slack, row.slack);
    }
    if (!c.report.majorant_holds) o.fail(c.label + " first violation at k=" + std::to_string(*c.report.majorant_first_violation));
  }
  if (min_slack < -1e-12) o.fail("min slack " + fmt(min_slack));
  o.detail = std::to_string(m.cases.size()) + " runs, " + std::to_string(rows) + " iterates, min t_k - e_k = " +
             fmt(min_slack);
  return o;
}

// 4. Per-step bound wherever check_h3 certifies the exponent.
Outcome per_step_bound(const MatrixResult& m) {
  Outcome o;
  for (const auto& e : m.errors) o.fail(e);
  int certified = 0, skipped = 0;
  for (const auto& c : m.cases) {
    if (!c.report.h3_certified) {
      ++skipped;
      continue;
    }
    ++certified;
    if (!c.report.step_bound_holds) o.fail(c.label + " first violation at k=" + std::to_string(*c.report.step_first_violation));
  }
  if (certified == 0) o.fail("no run had h3 certified");
  o.detail = std::to_string(certified) + " runs checked, " + std::to_string(skipped) + " without h3";
  return o;
}

// 5. Orders, finite-window ratios and the scalar sequence ratio limit.
Outcome rate_bounds(const MatrixResult& m) {
  Outcome o;
  for (const auto& e : m.errors) o.fail(e);
  double min_order = kInf;
  int windows = 0;
  std::map<std::string, int> orders;
  for (const auto& c : m.cases) {
    if (c.lipschitz && c.pure_gn) {
      const std::string problem = c.label.substr(0, c.label.find(' '));
      orders[problem] += c.order ? 1 : 0;
      if (c.order) {
        min_order = std::min(min_order, *c.order);
        if (*c.order < 1.8) o.fail(c.label + " order " + fmt(*c.order));
      }
    }
    if (c.synthetic && c.report.empirical_rate) {
      ++windows;
      if (!c.report.rate_holds)
        o.fail(c.label + " ratio " + fmt(*c.report.empirical_rate) + " > " + fmt(c.report.rate_bound) + " + 0.05");
    }
  }
  int total_orders = 0;
  std::string per_problem;
  for (const auto& [problem, n] : orders) {
    total_orders += n;
    per_problem += (per_problem.empty() ? "" : ", ") + problem + " " + std::to_string(n);
  }
  if (total_orders == 0) o.fail("no Lipschitz pure GN run produced an order estimate");

  double worst_seq = 0.0;
  int seqs = 0;
  const std::vector<MajorantFunction> fs{holder_majorant({1.0, 1.0}), holder_majorant({2.0, 0.5}),
                                         smale_majorant({1.0})};
  for (const auto& f : fs)
    for (const SolverRates r : {SolverRates::gauss_newton(), SolverRates{1.0, 0.0, 0.2}, SolverRates{0.8, 0.2, 0.3},
                                SolverRates{1.5, 0.5, 0.1}}) {
      const double rho = radius_rho(f, r).value;
      const auto t = majorant_sequence(f, r, 0.5 * rho, 400, rho);
      double ratio = -1.0;
      for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        if (t[k + 1] >= t[k]) o.fail("sequence not strictly decreasing");
        if (!(t[k] > 0.0 && t[k] < rho)) o.fail("sequence left (0, rho)");
        if (t[k + 1] < 1e-250) break;
        ratio = t[k + 1] / t[k];
      }
      ++seqs;
      const double d = std::abs(ratio - r.linear_rate());
      worst_seq = std::max(worst_seq, d);
      if (d > 1e-6) o.fail("t_{k+1}/t_k = " + fmt(ratio) + " vs " + fmt(r.linear_rate()));
    }
  o.detail = std::to_string(total_orders) + " orders (" + per_problem + "; min " + fmt(min_order) + "), " + std::to_string(windows) +
             " ratio windows, " + std::to_string(seqs) + " sequences (max |ratio - rate| " + fmt(worst_seq) + ")";
  return o;
}

// 6. Perturbation bound for the pseudo-inverse on random matrices.
Outcome perturbation_lemma() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 6);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> frac(0.0, 0.999);
  int feasible = 0;
  double worst = -kInf;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = dim(rng);
    const int rows = n + std::uniform_int_distribution<int>(0, 3)(rng);
    Matrix A(rows, n), E(rows, n);
    for (auto& v : A.reshaped()) v = normal(rng);
    for (auto& v : E.reshaped()) v = normal(rng);
    if (!SpectralData(A).injective()) continue;
    const DenseOperator a(A);
    // scale E so that ||A^+|| ||E|| lands in [0, 1)
    E *= frac(rng) / (pinv_norm(a) * spectral_norm(E));
    const DenseOperator b(Matrix(A + E));
    const auto bound = perturbed_pinv_bound(a, b);
    if (!bound.feasible()) {
      o.fail("trial " + std::to_string(trial) + " infeasible with contraction " + fmt(bound.contraction));
      continue;
    }
    ++feasible;
    if (!SpectralData(b.matrix()).injective()) {
      o.fail("trial " + std::to_string(trial) + ": B not injective");
      continue;
    }
    const double lhs = pinv_norm(b);
    worst = std::max(worst, lhs - *bound.bound);
    if (lhs > *bound.bound * (1.0 + 1e-12)) o.fail("trial " + std::to_string(trial) + ": " + fmt(lhs) + " > " + fmt(*bound.bound));
  }
  if (feasible < 1000) o.fail(std::to_string(feasible) + " of 1000 cases checked");
  o.detail = std::to_string(feasible) + " cases, max ||B^+|| - bound = " + fmt(worst);
  return o;
}

// 7. Lemma inequalities at 100 points inside min(nu, kappa) per catalog problem.
Outcome lemma_samples() {
  Outcome o;
  int points = 0;
  for (const auto& name : builtin_names()) {
    const auto p = builtin(name);
    const auto f = p.majorant();
    const double nu = radius_nu(f).value;
    const double lim = std::min(nu, p.instance.kappa());
    for (int i = 0; i < 100; ++i) {
      const double dist = lim * (i + 0.5) / 100.0 * (1.0 - 1e-9);
      try {
        const auto rep = check_lemma_bounds(p.instance, f, start_point(p.instance, dist, 5000 + i), nu, 1e-9);
        ++points;
        if (!rep.all_hold()) o.fail(name + " at distance " + fmt(dist));
      } catch (const std::exception& e) {
        o.fail(name + ": " + e.what());
      }
    }
  }
  o.detail = std::to_string(points) + " points over " + std::to_string(builtin_names().size()) + " problems";
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// 8. cmd_run writes byte-identical CSVs for a fixed seed, matching the goldens.
Outcome determinism(const std::optional<fs::path>& golden_dir, bool update) {
  Outcome o;
  const std::vector<std::pair<std::string, Json>> runs{
      {"poly2_gn", Json{{"problem", "poly2"}, {"x0", {0.5}}}},
      {"multi_nd_synthetic",
       Json{{"problem", "multi-nd"}, {"residual", {{"mode", "synthetic"}}}, {"rates", {{"theta", 0.3}}}, {"seed", 7}}},
      {"exp2_frozen", Json{{"problem", "exp2"}, {"b_strategy", "frozen"}, {"x0", {{"fraction", 0.9}}}}},
  };
  const fs::path tmp = fs::temp_directory_path() / "majgn_acceptance";
  fs::create_directories(tmp);
  int matched = 0;
  for (const auto& [name, base] : runs) {
    std::string csv[2];
    for (int rep = 0; rep < 2; ++rep) {
      Json doc = base;
      const fs::path out = tmp / (name + "_" + std::to_string(rep) + ".csv");
      doc["output"] = {{"trace_csv", out.string()}, {"trace_json", ""}};
      std::ostringstream sout, serr;
      const int code = cli::guarded(serr, [&] { return cli::cmd_run(parse_run_config(doc), sout, serr); });
      if (code != 0) o.fail(name + " exit " + std::to_string(code) + ": " + serr.str());
      csv[rep] = slurp(out);
      fs::remove(out);
    }
    if (csv[0].empty() || csv[0] != csv[1]) o.fail(name + ": runs differ");
    if (golden_dir) {
      const fs::path g = *golden_dir / (name + ".csv");
      if (update) {
        std::ofstream(g, std::ios::binary) << csv[0];
      } else if (!fs::exists(g)) {
        o.fail("missing golden " + g.string());
      } else if (slurp(g) != csv[0]) {
        o.fail(name + ": differs from " + g.string());
      } else {
        ++matched;
      }
    }
  }
  fs::remove_all(tmp);
  o.detail = std::to_string(runs.size()) + " configs run twice";
  if (golden_dir) o.detail += ", " + std::to_string(matched) + " golden files matched";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::optional<fs::path> golden_dir;
  bool update = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--update-golden") update = true;
    else golden_dir = fs::path(a);
  }

  const MatrixResult matrix = run_matrix();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"closed-form radii", closed_form_radii},
      {"generalized Lipschitz equivalence", glip_equivalence},
      {"majorant domination", [&] { return majorant_domination(matrix); }},
      {"per-step bound", [&] { return per_step_bound(matrix); }},
      {"rate bounds", [&] { return rate_bounds(matrix); }},
      {"pseudo-inverse perturbation", perturbation_lemma},
      {"sampled lemma inequalities", lemma_samples},
      {"deterministic output", [&] { return determinism(golden_dir, update); }},
  };
  bool all = true;
  int idx = 0;
  for (const auto& [name, fn] : criteria) {
    ++idx;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << idx << ". " << name << ": " << o.detail << '\n';
    for (const auto& f : o.failures) std::cout << "        " << f << '\n';
  }
  std::cout << (all ? "all acceptance criteria pass" : "acceptance FAILED") << '\n';
  return all ? 0 : 1;
}
