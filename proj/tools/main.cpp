// Command line driver: solve, measures, sweep, simulate, optimize and
// compare-cases over a scenario file.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "retrialqbd/experiments.hpp"
#include "retrialqbd/scenario.hpp"

namespace fs = std::filesystem;
using namespace rqbd;

namespace {

constexpr const char* kWorkersEnv = "RETRIALQBD_WORKERS";

int default_workers() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring " << kWorkersEnv << "='" << env << "'\n";
  }
  return 1;
}

struct Common {
  std::string scenario;
  std::string out;
  double epsilon = 0.0;
  bool strict_blocks = false;
  bool strict_sums = false;
  std::optional<std::uint64_t> seed;
  int workers = default_workers();
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--scenario", c.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "Output directory (overrides the scenario's out key)");
  app->add_option("--epsilon", c.epsilon, "Tail-mass tolerance for the truncation level")
      ->check(CLI::PositiveNumber);
  app->add_flag("--strict-paper-blocks", c.strict_blocks,
                "Use the printed failure coefficients and retrial-success range");
  app->add_flag("--strict-paper-sums", c.strict_sums, "Use the printed measure summation ranges");
  app->add_option("--seed", c.seed, "Seed for simulation and annealing");
  app->add_option("--workers", c.workers,
                  std::string("Worker threads (default from ") + kWorkersEnv + ", else 1)")
      ->check(CLI::PositiveNumber);
}

Scenario resolve(const Common& c) {
  Scenario s = load_scenario(c.scenario);
  if (!c.out.empty()) s.out = c.out;
  if (c.epsilon > 0.0) s.epsilon = c.epsilon;
  if (c.strict_blocks) s.generator.strict_paper_blocks = true;
  if (c.strict_sums) s.measures.strict_paper_sums = true;
  if (c.seed) {
    s.simulate.config.seed = *c.seed;
    s.optimize.sa.seed = *c.seed;
  }
  fs::create_directories(s.out);
  return s;
}

std::ofstream open_out(const Scenario& s, const std::string& name) {
  const fs::path p = fs::path(s.out) / name;
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void write_resolved(const Scenario& s) {
  auto os = open_out(s, "scenario.resolved.scn");
  os << format_scenario(s);
}

void write_report(const Scenario& s, const std::string& command, const std::string& body) {
  auto os = open_out(s, "report.txt");
  os << "command: " << command << "\nscenario: " << s.source << "\n\n" << body
     << "\n# resolved scenario\n"
     << format_scenario(s);
}

/// Bounds every report must satisfy; returns the violated ones.
std::vector<std::string> check_report(const MeasureReport& r) {
  std::vector<std::string> bad;
  const auto prob = [&](const std::string& name, double v) {
    if (!(v >= -1e-10 && v <= 1.0 + 1e-10)) bad.push_back(name + " = " + format_number(v));
  };
  prob("P_d", r.p_drop);
  prob("P_b", r.p_block);
  prob("P_b_immediate", r.p_block_immediate);
  prob("P_c_avail", r.p_c_avail);
  prob("P_loss_c_failure", r.p_loss_c_failure);
  for (const auto& [name, values] : r.arrays())
    for (std::size_t i = 0; i < values.size(); ++i)
      prob(name + "[" + std::to_string(i) + "]", values[i]);
  double orbit = 0.0;
  for (double v : r.p_orbit) orbit += v;
  if (std::abs(orbit - 1.0) > 1e-8) bad.push_back("sum P_orbit = " + format_number(orbit));
  if (r.eb > r.channels + 1e-10) bad.push_back("EB > S");
  if (r.en > r.channels + 1e-10) bad.push_back("EN > S");
  if (r.ec > r.truncation + r.channels + 1e-10) bad.push_back("EC > M + S");
  return bad;
}

/// Exit status accumulated over a command.
struct Status {
  int code = 0;
  void warn(const std::string& what) {
    std::cerr << "invariant: " << what << '\n';
    code = 3;
  }
};

void check_point(Status& st, const std::string& where, const PointSolution& p, double eps) {
  if (!p.truncation.met)
    st.warn(where + ": tail mass " + format_number(p.truncation.tail_mass) + " not below " +
            format_number(eps) + " at M = " + std::to_string(p.truncation.truncation));
  for (const std::string& w : p.truncation.warnings) std::cerr << "warning: " << where << ": " << w << '\n';
  for (const std::string& b : check_report(p.report)) st.warn(where + ": " + b);
}

std::string summary_csv(const Scenario& s, const PointSolution& p) {
  std::ostringstream os;
  const StationaryDistribution& z = p.truncation.distribution;
  os << "key,value\n"
     << "name," << s.name << '\n'
     << "epsilon," << format_number(s.epsilon) << '\n'
     << "truncation," << p.truncation.truncation << '\n'
     << "tail_mass," << format_number(p.truncation.tail_mass) << '\n'
     << "tail_criterion_met," << (p.truncation.met ? "true" : "false") << '\n'
     << "dimension," << p.dimension << '\n'
     << "levels," << z.levels.size() << '\n'
     << "residual," << format_number(z.residual) << '\n'
     << "total_mass," << format_number(z.total_mass()) << '\n'
     << "boundary_rcond," << format_number(z.boundary_rcond) << '\n'
     << "min_entry_before_clamp," << format_number(z.min_entry_before_clamp) << '\n'
     << "generator_row_sum_residual," << format_number(p.row_sum_residual) << '\n';
  return os.str();
}

int run_solve(const Common& c, bool summary) {
  const Scenario s = resolve(c);
  write_resolved(s);
  const PointSolution p = solve_point(s.model, solve_settings(s));
  Status st;
  check_point(st, "solve", p, s.epsilon);
  {
    auto os = open_out(s, "measures.csv");
    p.report.write_long_csv(os);
  }
  {
    auto os = open_out(s, "measures_wide.csv");
    os << MeasureReport::csv_header() << '\n' << p.report.csv_row() << '\n';
  }
  std::ostringstream body;
  if (summary) {
    const std::string sum = summary_csv(s, p);
    open_out(s, "summary.csv") << sum;
    auto os = open_out(s, "truncation_curve.csv");
    os << "M,tail_mass\n";
    for (const auto& [m, t] : p.truncation.curve) os << m << ',' << format_number(t) << '\n';
    body << "# summary\n" << sum << '\n';
  }
  body << "# measures\n";
  p.report.write_table(body);
  write_report(s, summary ? "solve" : "measures", body.str());
  if (!summary) p.report.write_table(std::cout);
  std::cerr << "M = " << p.truncation.truncation << ", tail mass "
            << format_number(p.truncation.tail_mass) << ", residual "
            << format_number(p.truncation.distribution.residual) << '\n';
  return st.code;
}

int run_sweep_cmd(const Common& c) {
  const Scenario s = resolve(c);
  if (!s.sweep) throw ScenarioError(s.source, 0, "sweep.variable", "the scenario has no sweep");
  write_resolved(s);
  const std::vector<SweepRow> rows =
      run_sweep(s.model, *s.sweep, s.cases, solve_settings(s), c.workers);
  Status st;
  const std::string name = "sweep_" + sweep_variable_name(s.sweep->variable) + ".csv";
  std::ostringstream csv;
  csv << sweep_csv_header() << '\n';
  for (const SweepRow& r : rows) {
    csv << sweep_csv_row(s.sweep->variable, r) << '\n';
    const std::string where = "case " + case_name(r.case_id) + " at " + format_number(r.value);
    if (!r.met) st.warn(where + ": tail criterion not met");
    for (const std::string& b : check_report(r.report)) st.warn(where + ": " + b);
  }
  open_out(s, name) << csv.str();
  write_report(s, "sweep", "# " + name + "\n" + csv.str());
  return st.code;
}

int run_compare_cases(const Common& c) {
  const Scenario s = resolve(c);
  write_resolved(s);
  // With a sweep the cases are compared at its middle point.
  ModelParams base = s.model;
  std::string at = "base";
  const auto at_point = [&](CaseId id) {
    if (!s.sweep) return build_case(base, id);
    return build_case(apply_sweep(base, s.sweep->variable, s.sweep->values[s.sweep->values.size() / 2]),
                      id);
  };
  if (s.sweep)
    at = sweep_variable_name(s.sweep->variable) + "=" +
         format_number(s.sweep->values[s.sweep->values.size() / 2]);
  std::vector<PointSolution> points(s.cases.size());
  const SolveSettings settings = solve_settings(s);
  parallel_for(s.cases.size(), c.workers,
               [&](std::size_t i) { points[i] = solve_point(at_point(s.cases[i]), settings); });
  Status st;
  std::ostringstream csv;
  csv << "case,point,met," << MeasureReport::csv_header() << '\n';
  for (std::size_t i = 0; i < points.size(); ++i) {
    csv << case_name(s.cases[i]) << ',' << at << ',' << (points[i].truncation.met ? "true" : "false")
        << ',' << points[i].report.csv_row() << '\n';
    check_point(st, "case " + case_name(s.cases[i]), points[i], s.epsilon);
  }
  open_out(s, "cases.csv") << csv.str();
  write_report(s, "compare-cases", "# cases.csv\n" + csv.str());
  return st.code;
}

int run_simulate_cmd(const Common& c) {
  const Scenario s = resolve(c);
  write_resolved(s);
  SimConfig cfg = s.simulate.config;
  cfg.workers = c.workers;
  Status st;
  std::ostringstream body;
  std::ofstream trace;
  for (CaseId id : s.cases) {
    const std::string tag = s.cases.size() == 1 ? "" : "_" + case_name(id);
    const ModelParams m = build_case(s.model, id);
    const SimEstimates est = simulate(m, cfg);
    {
      auto os = open_out(s, "simulation" + tag + ".csv");
      os << "measure,mean,half_width,lower,upper,replications\n";
      const std::vector<std::pair<std::string, SimEstimate>> items = {
          {"EB", est.eb},         {"ER", est.er},
          {"EN", est.en},         {"P_d", est.p_drop},
          {"P_b", est.p_block},   {"P_b_immediate", est.p_block_immediate},
          {"P_c_avail", est.p_c_avail}, {"lambda_H_out", est.lambda_h_out},
          {"theta_r_succ", est.theta_r_succ}};
      for (const auto& [name, e] : items)
        os << name << ',' << format_number(e.mean) << ',' << format_number(e.half_width) << ','
           << format_number(e.mean - e.half_width) << ',' << format_number(e.mean + e.half_width)
           << ',' << est.replications << '\n';
    }
    {
      auto os = open_out(s, "replications" + tag + ".csv");
      os << "replication,EB,ER,EN,P_d,P_b,P_b_immediate,P_c_avail,lambda_H_out,theta_r_succ,"
            "events,failures,handoff_arrivals,new_arrivals\n";
      for (std::size_t r = 0; r < est.runs.size(); ++r) {
        const SimReplication& x = est.runs[r];
        os << r << ',' << format_number(x.eb) << ',' << format_number(x.er) << ','
           << format_number(x.en) << ',' << format_number(x.p_drop) << ','
           << format_number(x.p_block) << ',' << format_number(x.p_block_immediate) << ','
           << format_number(x.p_c_avail) << ',' << format_number(x.lambda_h_out) << ','
           << format_number(x.theta_r_succ) << ',' << x.events << ',' << x.failures << ','
           << x.handoff_arrivals << ',' << x.new_arrivals << '\n';
      }
    }
    if (s.simulate.compare) {
      const PointSolution p = solve_point(m, solve_settings(s));
      check_point(st, "case " + case_name(id), p, s.epsilon);
      std::ostringstream csv;
      csv << "measure,analytic,mean,half_width,inside_ci\n";
      for (const SimComparison& k : compare_simulation(p.report, est)) {
        csv << k.measure << ',' << format_number(k.analytic) << ',' << format_number(k.estimate.mean)
            << ',' << format_number(k.estimate.half_width) << ',' << (k.inside ? "true" : "false")
            << '\n';
        if (!k.inside)
          std::cerr << "note: case " << case_name(id) << ' ' << k.measure
                    << " analytic value outside the 95% interval\n";
      }
      open_out(s, "comparison" + tag + ".csv") << csv.str();
      body << "# comparison" << tag << ".csv (M = " << p.truncation.truncation << ")\n"
           << csv.str() << '\n';
    }
  }
  write_report(s, "simulate", body.str());
  return st.code;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

int run_optimize_cmd(const Common& c) {
  const Scenario s = resolve(c);
  write_resolved(s);
  const std::vector<OptimizeCell> cells = run_optimize(s, c.workers);
  Status st;
  std::ostringstream csv;
  csv << "case,lambda,failure_rate,mu,mu_r,f,EB,EN,M,tail_mass,evaluations,solves,converged,"
         "initial_temperature,grad_mu,grad_mu_r,grid_mu,grid_mu_r,grid_f,grid_rel_gap,"
         "ref_mu,ref_mu_r,ref_f,f_at_ref,dev_mu,dev_mu_r,dev_f,dev_f_rel\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const OptimizeCell& k = cells[i];
    const CostValue& v = k.at_optimum;
    if (!v.met) st.warn("optimum tail criterion not met");
    std::optional<double> gx, gy, gf, gap, rx, ry, rf, fr, dx, dy, df, dfr;
    if (k.grid) {
      gx = k.grid->x;
      gy = k.grid->y;
      gf = k.grid->f;
      gap = (k.sa.f - k.grid->f) / std::abs(k.grid->f);
    }
    if (k.reference) {
      rx = k.reference->mu;
      ry = k.reference->mu_r;
      rf = k.reference->f;
      dx = k.sa.x - *rx;
      dy = k.sa.y - *ry;
      df = k.sa.f - *rf;
      dfr = *df / std::abs(*rf);
      if (k.at_reference) fr = k.at_reference->f;
    }
    csv << case_name(k.case_id) << ',' << format_number(k.lambda) << ','
        << format_number(k.failure_rate) << ',' << format_number(k.sa.x) << ','
        << format_number(k.sa.y) << ',' << format_number(k.sa.f) << ',' << format_number(v.eb)
        << ',' << format_number(v.en) << ',' << v.truncation << ',' << format_number(v.tail_mass)
        << ',' << k.sa.evaluations << ',' << k.solves << ',' << (k.sa.converged ? "true" : "false")
        << ',' << format_number(k.sa.initial_temperature) << ','
        << format_number(k.gradient.first) << ',' << format_number(k.gradient.second) << ','
        << fmt_opt(gx) << ',' << fmt_opt(gy) << ',' << fmt_opt(gf) << ',' << fmt_opt(gap) << ','
        << fmt_opt(rx) << ',' << fmt_opt(ry) << ',' << fmt_opt(rf) << ',' << fmt_opt(fr) << ','
        << fmt_opt(dx) << ',' << fmt_opt(dy) << ',' << fmt_opt(df) << ',' << fmt_opt(dfr) << '\n';
    std::ostringstream trace_name;
    trace_name << "trace_" << case_name(k.case_id) << '_' << i << ".csv";
    auto os = open_out(s, cells.size() == 1 ? "trace.csv" : trace_name.str());
    write_trace_csv(os, k.sa);
  }
  open_out(s, "optimize.csv") << csv.str();
  std::ostringstream body;
  body << "# optimize.csv\n" << csv.str();

  // Text table: a block per (case, lambda_f), rows mu*, mu_r*, f*, a column per lambda.
  const OptimizeSpec& o = s.optimize;
  if (!o.table_lambdas.empty()) {
    std::ostringstream t;
    const auto cell = [&](CaseId id, double lam, double lf) -> const OptimizeCell* {
      for (const OptimizeCell& k : cells)
        if (k.case_id == id && k.lambda == lam && k.failure_rate == lf) return &k;
      return nullptr;
    };
    for (CaseId id : s.cases) {
      for (double lf : o.table_failure_rates) {
        t << "case " << case_name(id) << ", lambda_f = " << format_number(lf) << '\n';
        t << std::left << std::setw(8) << "lambda";
        for (double lam : o.table_lambdas) t << std::right << std::setw(12) << format_number(lam);
        t << '\n';
        const std::pair<const char*, int> rows[] = {{"mu*", 0}, {"mu_r*", 1}, {"f", 2}};
        for (const auto& [label, which] : rows) {
          t << std::left << std::setw(8) << label;
          for (double lam : o.table_lambdas) {
            const OptimizeCell* k = cell(id, lam, lf);
            std::ostringstream v;
            if (k) v << std::fixed << std::setprecision(4)
                     << (which == 0 ? k->sa.x : which == 1 ? k->sa.y : k->sa.f);
            t << std::right << std::setw(12) << (k ? v.str() : "-");
          }
          t << '\n';
        }
        t << '\n';
      }
    }
    open_out(s, "table.txt") << t.str();
    body << "\n# table.txt\n" << t.str();
  }
  write_report(s, "optimize", body.str());
  return st.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Performability of a MAP/PH/S retrial cell with guard channels and channel failures"};
  app.require_subcommand(1);
  Common c;
  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {
      {"solve", "Stationary solution summary, truncation curve and measures"},
      {"measures", "Measures of the stationary solution"},
      {"sweep", "Measures along the scenario's sweep for every listed case"},
      {"simulate", "Discrete-event simulation, compared with the analytic solution"},
      {"optimize", "Simulated-annealing cost minimization (optionally a table of cells)"},
      {"compare-cases", "Measures of the listed case reductions side by side"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const Cmd& k : cmds) {
    CLI::App* sub = app.add_subcommand(k.name, k.help);
    add_common(sub, c);
    subs[k.name] = sub;
  }
  CLI11_PARSE(app, argc, argv);
  try {
    if (subs["solve"]->parsed()) return run_solve(c, true);
    if (subs["measures"]->parsed()) return run_solve(c, false);
    if (subs["sweep"]->parsed()) return run_sweep_cmd(c);
    if (subs["simulate"]->parsed()) return run_simulate_cmd(c);
    if (subs["optimize"]->parsed()) return run_optimize_cmd(c);
    if (subs["compare-cases"]->parsed()) return run_compare_cases(c);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << (c.scenario.empty() ? "" : c.scenario + ": ") << e.what() << '\n';
    return 1;
  }
  return 1;
}
