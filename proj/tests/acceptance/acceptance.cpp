// Acceptance checks. Prints one "criterion N: PASS|FAIL ..." line per
// criterion and exits nonzero when any selected criterion fails.
//
//   acceptance [--only N] [--out DIR] [--workers N]

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/oracle.hpp"
#include "retrialqbd/experiments.hpp"
#include "retrialqbd/measures.hpp"
#include "retrialqbd/optimizer.hpp"
#include "retrialqbd/scenario.hpp"
#include "retrialqbd/simulator.hpp"
#include "retrialqbd/solver.hpp"

using namespace rqbd;

namespace {

const std::string kScenarios = RQBD_SCENARIO_DIR;
std::filesystem::path g_out = "acceptance_out";
int g_workers = 1;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string g(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

GeneratorOptions backend(PhaseBackend b, bool strict = false) {
  GeneratorOptions o{b};
  o.strict_paper_blocks = strict;
  return o;
}

// 1. Case V of the baseline.
void rate_matching(Verdict& v) {
  const Scenario s = load_scenario(kScenarios + "/baseline.scn");
  const ModelParams m = build_case(s.model, CaseId::V);
  const ArrivalIntensities a = arrival_intensities(m.arrivals);
  const double theta = m.theta();
  const double mu_n = ph_fundamental_rate(m.service_new);
  v.detail << "theta=" << g(theta) << " mu_N=" << g(mu_n) << " lambda_H=" << g(a.handoff)
           << " lambda_N=" << g(a.fresh);
  v.require(m.arrivals.phases() == 1 && m.service_new.phases() == 1 &&
                m.service_handoff.phases() == 1 && m.retrial.phases() == 1,
            "single phases");
  v.require(std::abs(theta - 4.0 / 3.0) < 1e-9, "theta");
  v.require(std::abs(mu_n - 1.0) < 1e-9, "mu_N");
  v.require(std::abs(a.handoff - 1.0) < 0.01, "lambda_H");
  v.require(std::abs(a.fresh - 1.0) < 0.01, "lambda_N");
}

// 2. Generator rows sum to zero.
void row_sums(Verdict& v) {
  double worst = 0.0;
  int generators = 0;
  const ModelParams base = load_scenario(kScenarios + "/baseline.scn").model;
  for (PhaseBackend b : {PhaseBackend::Aggregated, PhaseBackend::Tracked})
    for (bool strict : {false, true})
      for (int M = 0; M <= 4; ++M) {
        worst = std::max(worst, build_generator(base, M, backend(b, strict)).max_row_sum_residual());
        ++generators;
      }
  std::mt19937 rng(2024);
  const int random_models = 12;
  for (int t = 0; t < random_models; ++t) {
    const ModelParams m = oracle::random_model(rng);
    for (PhaseBackend b : {PhaseBackend::Aggregated, PhaseBackend::Tracked}) {
      worst = std::max(worst, build_generator(m, 1 + t % 4, backend(b, t % 2 == 1)).max_row_sum_residual());
      ++generators;
    }
  }
  v.detail << generators << " generators (baseline M<=4, " << random_models
           << " random models), max |row sum|=" << g(worst);
  v.require(worst < 1e-9, "row sums");
}

// 3. Recursion against a dense solve of the same truncated generator.
void dense_agreement(Verdict& v) {
  struct Instance {
    std::string name;
    ModelParams model;
    int M;
    GeneratorOptions options;
    std::optional<oracle::ExpModel> exp;  // compared with the enumerated chain as well
  };
  oracle::ExpModel scalar;
  scalar.S = 1;
  scalar.G = 0;
  scalar.lambda_n = 0.7;
  scalar.theta = 1.3;
  scalar.leave = 0.25;
  oracle::ExpModel two;
  two.S = 2;
  two.G = 1;
  two.lambda_h = 0.5;
  two.lambda_n = 0.8;
  two.mu_h = 1.2;
  two.mu_n = 0.7;
  two.theta = 2.0;
  two.leave = 0.4;
  two.lambda_f = 0.3;
  two.mu_r = 0.9;
  const ModelParams base = load_scenario(kScenarios + "/baseline.scn").model;
  std::mt19937 rng(77);
  std::vector<Instance> instances{
      {"M/M/1 retrial", scalar.params(), 40, backend(PhaseBackend::Aggregated), scalar},
      {"2-channel failures", two.params(), 20, backend(PhaseBackend::Aggregated), two},
      {"baseline", base, 6, backend(PhaseBackend::Aggregated), std::nullopt},
      {"baseline tracked", base, 2, backend(PhaseBackend::Tracked), std::nullopt},
      {"baseline case V", build_case(base, CaseId::V), 30, backend(PhaseBackend::Aggregated),
       std::nullopt},
      {"random", oracle::random_model(rng), 8, backend(PhaseBackend::Aggregated), std::nullopt},
  };
  double worst_z = 0.0, worst_m = 0.0;
  Index largest = 0;
  for (const Instance& in : instances) {
    const BlockTridiagonalGenerator q = build_generator(in.model, in.M, in.options);
    largest = std::max(largest, q.total_dimension());
    v.require(q.total_dimension() <= 20000, in.name + " dimension");
    const StationaryDistribution a = solve_stationary(q), b = dense_oracle_solve(q);
    double dz = (a.flatten() - b.flatten()).cwiseAbs().maxCoeff();
    if (in.exp) {
      const oracle::Chain c = oracle::build_chain(*in.exp, in.M);
      const Eigen::RowVectorXd want = oracle::dense_stationary(c.q);
      const RowVector got = a.flatten();
      for (std::size_t s = 0; s < c.states.size(); ++s)
        dz = std::max(dz, std::abs(want(s) - got(oracle::library_index(q, c.states[s]))));
    }
    const MeasureReport ra = evaluate_measures(q, a), rb = evaluate_measures(q, b);
    double dm = 0.0;
    const auto sa = ra.scalars(), sb = rb.scalars();
    for (std::size_t i = 0; i < sa.size(); ++i) {
      if (sa[i].first == "residual") continue;  // solver diagnostic, not a measure
      dm = std::max(dm, std::abs(sa[i].second - sb[i].second) / std::max(1.0, std::abs(sb[i].second)));
    }
    const auto aa = ra.arrays(), ab = rb.arrays();
    for (std::size_t i = 0; i < aa.size(); ++i)
      for (std::size_t j = 0; j < aa[i].second.size(); ++j)
        dm = std::max(dm, std::abs(aa[i].second[j] - ab[i].second[j]));
    v.require(dz < 1e-8, in.name + " z");
    v.require(dm < 1e-8, in.name + " measures");
    worst_z = std::max(worst_z, dz);
    worst_m = std::max(worst_m, dm);
  }
  v.detail << instances.size() << " instances (largest dimension " << largest
           << "), max |dz|=" << g(worst_z) << " max measure gap=" << g(worst_m);
}

// 4. Simulation confidence intervals cover the analytic values.
void simulation(Verdict& v) {
  const Scenario s = load_scenario(kScenarios + "/baseline.scn");
  const PointSolution p = solve_point(s.model, solve_settings(s));
  SimConfig c = s.simulate.config;
  c.horizon = 1e5;
  c.replications = 30;
  c.workers = g_workers;
  const SimEstimates e = simulate(s.model, c);
  const MeasureReport& r = p.report;
  const auto check = [&](const char* name, const SimEstimate& est, double value) {
    v.detail << " " << name << "=" << g(value) << " in " << g(est.mean) << "+-" << g(est.half_width);
    v.require(est.covers(value), name);
  };
  v.detail << "M=" << p.truncation.truncation << ", 30 x 1e5:";
  check("EB", e.eb, r.eb);
  check("ER", e.er, r.er);
  check("P_d", e.p_drop, r.p_drop);
  check("P_b", e.p_block, r.p_block);
}

bool monotone(const std::vector<double>& y, int direction, double tol) {
  for (std::size_t i = 1; i < y.size(); ++i)
    if (direction * (y[i] - y[i - 1]) < -tol) return false;
  return true;
}

// 5. Monotone responses of Case I sweeps.
void sweeps(Verdict& v) {
  struct Check {
    std::string measure;
    int direction;  // +1 nondecreasing, -1 nonincreasing
  };
  struct Sweep {
    std::string file;
    std::vector<Check> checks;
  };
  const std::vector<Sweep> plan{
      {"sweep_mu_n", {{"EB", -1}, {"ER", -1}}},
      {"sweep_mu_h", {{"lambda_H_out", +1}}},
      {"sweep_lambda_h_scale", {{"P_d", +1}, {"P_b", +1}}},
      {"sweep_lambda_f", {{"P_loss_c_failure", +1}, {"P_c_avail", -1}}},
      {"sweep_mu_r", {{"P_loss_c_failure", -1}, {"P_c_avail", +1}}},
      {"sweep_theta", {{"theta_r_succ", +1}, {"P_leave_no_service", -1}}},
  };
  std::filesystem::create_directories(g_out);
  for (const Sweep& sw : plan) {
    const Scenario s = load_scenario(kScenarios + "/" + sw.file + ".scn");
    v.require(s.sweep && s.sweep->values.size() >= 6, sw.file + " has 6 points");
    const std::vector<SweepRow> rows = run_sweep(s.model, *s.sweep, {CaseId::I},
                                                 solve_settings(s), g_workers);
    std::ofstream csv(g_out / (sw.file + ".csv"), std::ios::binary);
    csv << sweep_csv_header() << "\n";
    for (const SweepRow& row : rows) csv << sweep_csv_row(s.sweep->variable, row) << "\n";
    for (const SweepRow& row : rows) v.require(row.met, sw.file + " tail criterion");
    for (const Check& c : sw.checks) {
      std::vector<double> y;
      for (const SweepRow& row : rows)
        for (const auto& [name, value] : row.report.scalars())
          if (name == c.measure) y.push_back(value);
      const bool ok = y.size() == rows.size() && monotone(y, c.direction, 1e-6);
      v.detail << " " << c.measure << (c.direction > 0 ? " up " : " down ") << "in "
               << sweep_variable_name(s.sweep->variable) << ": " << (ok ? "ok" : "violated") << " ["
               << g(y.front()) << " .. " << g(y.back()) << "]";
      v.require(ok, c.measure + " vs " + sweep_variable_name(s.sweep->variable));
    }
  }
}

// 6. Case I against Case V at the middle of the mu_N sweep.
void case_ordering(Verdict& v) {
  const Scenario s = load_scenario(kScenarios + "/sweep_mu_n.scn");
  const double mid = s.sweep->values[s.sweep->values.size() / 2];
  const ModelParams m = apply_sweep(s.model, s.sweep->variable, mid);
  const SolveSettings settings = solve_settings(s);
  const PointSolution one = solve_point(build_case(m, CaseId::I), settings);
  const PointSolution five = solve_point(build_case(m, CaseId::V), settings);
  v.detail << "mu_N=" << g(mid) << " EB I=" << g(one.report.eb) << " V=" << g(five.report.eb)
           << " ER I=" << g(one.report.er) << " V=" << g(five.report.er);
  v.require(one.report.eb - five.report.eb > 1e-4, "EB(I) > EB(V)");
  v.require(one.report.er - five.report.er > 1e-4, "ER(I) > ER(V)");
}

// 7. Truncation criterion.
void truncation(Verdict& v) {
  const Scenario s = load_scenario(kScenarios + "/baseline.scn");
  TailCache cache;
  int prev = 0;
  bool monotone_levels = true;
  v.detail << "M(eps):";
  for (double eps = 1e-2; eps > 0.99e-5; eps /= 2.0) {
    const TruncationResult t = choose_truncation(s.model, s.generator, eps, s.truncation, &cache);
    v.require(t.met && t.tail_mass < eps, "tail below eps=" + g(eps));
    if (t.truncation < prev) monotone_levels = false;
    prev = t.truncation;
    v.detail << " " << g(eps) << "->" << t.truncation;
  }
  const TruncationResult t = choose_truncation(s.model, s.generator, 1e-5, s.truncation, &cache);
  v.detail << "; eps=1e-5: M=" << t.truncation << " tail=" << g(t.tail_mass);
  v.require(t.met && t.tail_mass < 1e-5, "baseline tail below 1e-5");
  v.require(monotone_levels, "halving eps never decreases M");
}

// 8. Optimizer.
void optimizer(Verdict& v) {
  const auto bowl = [](double x, double y) { return (x - 3) * (x - 3) + (y - 2) * (y - 2); };
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SaConfig c;
    c.seed = seed;
    const SaResult r = simulated_annealing(bowl, c);
    worst = std::max(worst, std::hypot(r.x - 3, r.y - 2));
  }
  v.detail << "quadratic: max distance " << g(worst);
  v.require(worst < 1e-3, "quadratic minimum");

  const Scenario s = load_scenario(kScenarios + "/optimize.scn");
  const OptimizeCell cell =
      optimize_cell(s, CaseId::I, s.optimize.lambda, s.optimize.failure_rate, true);
  const double gap = (cell.sa.f - cell.grid->f) / std::abs(cell.grid->f);
  v.detail << "; cost at lambda=" << g(s.optimize.lambda) << " lambda_f=" << g(s.optimize.failure_rate)
           << ": SA f*=" << g(cell.sa.f) << " at (" << g(cell.sa.x) << ", " << g(cell.sa.y)
           << "), grid f=" << g(cell.grid->f) << " at (" << g(cell.grid->x) << ", " << g(cell.grid->y)
           << "), gap " << g(100 * gap) << "%";
  v.require(gap <= 0.01, "SA within 1% of the grid");

  const Scenario t = load_scenario(kScenarios + "/table.scn");
  const std::vector<OptimizeCell> cells = run_optimize(t, g_workers);
  std::filesystem::create_directories(g_out);
  std::ofstream csv(g_out / "table_deviations.csv", std::ios::binary);
  csv << "lambda,failure_rate,mu,mu_r,f,ref_mu,ref_mu_r,ref_f,f_at_ref,dev_mu,dev_mu_r,dev_f_rel\n";
  int reported = 0;
  double worst_f = 0.0;
  for (const OptimizeCell& c : cells) {
    if (!c.reference || !c.at_reference) continue;
    const ReferenceOptimum& r = *c.reference;
    const double dev_f = (c.sa.f - r.f) / r.f;
    worst_f = std::max(worst_f, std::abs(dev_f));
    csv << format_number(c.lambda) << "," << format_number(c.failure_rate) << ","
        << format_number(c.sa.x) << "," << format_number(c.sa.y) << "," << format_number(c.sa.f)
        << "," << format_number(r.mu) << "," << format_number(r.mu_r) << "," << format_number(r.f)
        << "," << format_number(c.at_reference->f) << "," << format_number(c.sa.x - r.mu) << ","
        << format_number(c.sa.y - r.mu_r) << "," << format_number(dev_f) << "\n";
    ++reported;
  }
  v.detail << "; reference table: " << reported << "/" << cells.size()
           << " cells reported, max |f - f_ref|/f_ref=" << g(worst_f);
  v.require(reported == static_cast<int>(cells.size()) && reported >= 28, "deviations for every cell");
}

// 9. No failures.
void zero_failure(Verdict& v) {
  const Scenario s = load_scenario(kScenarios + "/baseline.scn");
  ModelParams m = s.model;
  m.failure_rate = 0.0;
  const PointSolution p = solve_point(m, solve_settings(s));
  double worst = std::abs(p.report.en);
  for (std::size_t i = 1; i < p.report.p_failed.size(); ++i)
    worst = std::max(worst, std::abs(p.report.p_failed[i]));
  v.detail << "M=" << p.truncation.truncation << " EN=" << g(p.report.en)
           << " max P_loss_c_failure(i>=1)=" << g(worst);
  v.require(std::abs(p.report.en) < 1e-12, "EN");
  v.require(worst < 1e-12, "P_loss_c_failure(i>=1)");
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (a == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else if (a == "--workers" && i + 1 < argc) {
      g_workers = std::max(1, std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--only N] [--out DIR] [--workers N]\n";
      return 2;
    }
  }
  if (const char* w = std::getenv("RETRIALQBD_WORKERS"); w && g_workers == 1)
    g_workers = std::max(1, std::atoi(w));

  const std::vector<std::function<void(Verdict&)>> criteria{
      rate_matching, row_sums,   dense_agreement, simulation,  sweeps,
      case_ordering, truncation, optimizer,       zero_failure};
  bool all = true;
  for (std::size_t n = 1; n <= criteria.size(); ++n) {
    if (only != 0 && static_cast<std::size_t>(only) != n) continue;
    Verdict v;
    try {
      criteria[n - 1](v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " [error: " << e.what() << "]";
    }
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << " " << v.detail.str()
              << std::endl;
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
