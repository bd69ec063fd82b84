#include "retrialqbd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace rqbd {

SolveSettings solve_settings(const Scenario& s) {
  SolveSettings out;
  out.epsilon = s.epsilon;
  out.generator = s.generator;
  out.truncation = s.truncation;
  out.fixed_truncation = s.fixed_truncation;
  out.measures = s.measures;
  return out;
}

PointSolution solve_point(const ModelParams& model, const SolveSettings& settings, int hint) {
  PointSolution p;
  if (settings.fixed_truncation) {
    TruncationResult& t = p.truncation;
    t.truncation = *settings.fixed_truncation;
    t.distribution =
        solve_model(model, t.truncation, settings.generator, settings.truncation.solver);
    t.tail_mass = t.distribution.tail_mass;
    t.met = t.tail_mass < settings.epsilon;
    t.curve = {{t.truncation, t.tail_mass}};
  } else {
    TruncationOptions opt = settings.truncation;
    opt.initial = std::clamp(hint, 1, opt.max_truncation);
    p.truncation = choose_truncation(model, settings.generator, settings.epsilon, opt);
  }
  const BlockTridiagonalGenerator q =
      build_generator(model, p.truncation.truncation, settings.generator);
  p.report = evaluate_measures(q, p.truncation.distribution, settings.measures);
  p.dimension = q.total_dimension();
  p.row_sum_residual = q.max_row_sum_residual();
  return p;
}

ModelParams build_case(const ModelParams& base, CaseId c) {
  ModelParams m = base;
  const auto exp_retrial = [&] {
    return exponential_retrial(base.theta(), leave_probability(base.retrial));
  };
  const auto exp_services = [&] {
    m.service_new = exponential_ph(ph_fundamental_rate(base.service_new));
    m.service_handoff = exponential_ph(ph_fundamental_rate(base.service_handoff));
  };
  const auto poisson = [&] {
    const ArrivalIntensities a = arrival_intensities(base.arrivals);
    m.arrivals = poisson_map(a.handoff, a.fresh);
  };
  switch (c) {
    case CaseId::I:
      break;
    case CaseId::II:
      m.retrial = exp_retrial();
      break;
    case CaseId::III:
      m.retrial = exp_retrial();
      exp_services();
      break;
    case CaseId::IV:
      poisson();
      exp_services();
      break;
    case CaseId::V:
      poisson();
      exp_services();
      m.retrial = exp_retrial();
      break;
  }
  validate_model(m);
  return m;
}

ModelParams apply_sweep(const ModelParams& base, SweepVariable v, double value) {
  ModelParams m = base;
  switch (v) {
    case SweepVariable::LambdaHScale:
      m.arrivals = scale_handoff_arrivals(base.arrivals, value);
      break;
    case SweepVariable::MuN:
      m.service_new = scale_ph(base.service_new, value);
      break;
    case SweepVariable::MuH:
      m.service_handoff = scale_ph(base.service_handoff, value);
      break;
    case SweepVariable::Theta:
      m.retrial = scale_ph(base.retrial, value);
      break;
    case SweepVariable::LambdaF:
      m.failure_rate = value;
      break;
    case SweepVariable::MuR:
      m.repair_rate = value;
      break;
  }
  validate_model(m);
  return m;
}

std::vector<SweepRow> run_sweep(const ModelParams& base, const SweepSpec& sweep,
                                const std::vector<CaseId>& cases, const SolveSettings& settings,
                                int workers) {
  if (sweep.values.empty()) throw std::invalid_argument("sweep has no values");
  const std::size_t n = sweep.values.size();
  std::vector<SweepRow> rows(cases.size() * n);
  // Last M found per case; neighbouring points need similar truncations.
  std::vector<std::atomic<int>> hints(cases.size());
  for (auto& h : hints) h = 1;
  parallel_for(rows.size(), workers, [&](std::size_t job) {
    const std::size_t ci = job / n;
    const double value = sweep.values[job % n];
    const ModelParams m = apply_sweep(build_case(base, cases[ci]), sweep.variable, value);
    const PointSolution p = solve_point(m, settings, hints[ci].load());
    hints[ci] = p.truncation.truncation;
    SweepRow& r = rows[job];
    r.case_id = cases[ci];
    r.value = value;
    r.truncation = p.truncation.truncation;
    r.tail_mass = p.truncation.tail_mass;
    r.met = p.truncation.met;
    r.report = p.report;
  });
  return rows;
}

std::string sweep_csv_header() {
  return "case,variable,value,met," + MeasureReport::csv_header();
}

std::string sweep_csv_row(const SweepVariable v, const SweepRow& row) {
  std::ostringstream os;
  os << case_name(row.case_id) << ',' << sweep_variable_name(v) << ',' << format_number(row.value)
     << ',' << (row.met ? "true" : "false") << ',' << row.report.csv_row();
  return os.str();
}

std::vector<SimComparison> compare_simulation(const MeasureReport& a, const SimEstimates& s) {
  const std::vector<std::pair<std::string, std::pair<double, SimEstimate>>> items = {
      {"EB", {a.eb, s.eb}},
      {"ER", {a.er, s.er}},
      {"EN", {a.en, s.en}},
      {"P_d", {a.p_drop, s.p_drop}},
      {"P_b", {a.p_block, s.p_block}},
      {"P_b_immediate", {a.p_block_immediate, s.p_block_immediate}},
      {"P_c_avail", {a.p_c_avail, s.p_c_avail}},
      {"lambda_H_out", {a.lambda_h_out, s.lambda_h_out}},
      {"theta_r_succ", {a.theta_r_succ, s.theta_r_succ}},
  };
  std::vector<SimComparison> out;
  for (const auto& [name, pair] : items)
    out.push_back({name, pair.first, pair.second, pair.second.covers(pair.first)});
  return out;
}

CostProblem cost_problem(const Scenario& s, const ModelParams& base, double lambda,
                         double failure_rate) {
  CostProblem p;
  p.base = with_load(base, lambda, failure_rate);
  p.weights = s.optimize.weights;
  p.epsilon = s.epsilon;
  p.generator = s.generator;
  p.truncation = s.truncation;
  p.split = s.optimize.split;
  p.nominal_ratio = s.optimize.nominal_ratio;
  return p;
}

OptimizeCell optimize_cell(const Scenario& s, CaseId c, double lambda, double failure_rate,
                           bool with_grid) {
  OptimizeCell cell;
  cell.case_id = c;
  cell.lambda = lambda;
  cell.failure_rate = failure_rate;
  CostObjective objective(cost_problem(s, build_case(s.model, c), lambda, failure_rate));
  const Objective2 f = [&](double x, double y) { return objective(x, y); };
  cell.sa = simulated_annealing(f, s.optimize.sa);
  cell.at_optimum = objective.evaluate(cell.sa.x, cell.sa.y);
  cell.gradient = numerical_gradient(f, cell.sa.x, cell.sa.y);
  if (with_grid) cell.grid = grid_search(f, *s.optimize.sa.box, s.optimize.grid_points);
  for (const ReferenceOptimum& r : s.optimize.reference) {
    if (std::abs(r.lambda - lambda) < 1e-9 && std::abs(r.failure_rate - failure_rate) < 1e-9) {
      cell.reference = r;
      try {
        cell.at_reference = objective.evaluate(r.mu, r.mu_r);
      } catch (const CostError&) {
        // Left empty; the report marks the reference point as unsolvable.
      }
      break;
    }
  }
  cell.solves = objective.solves();
  return cell;
}

std::vector<OptimizeCell> run_optimize(const Scenario& s, int workers) {
  const OptimizeSpec& o = s.optimize;
  struct Job {
    CaseId c;
    double lambda, failure_rate;
  };
  std::vector<Job> jobs;
  for (CaseId c : s.cases) {
    if (o.table_lambdas.empty()) {
      jobs.push_back({c, o.lambda, o.failure_rate});
      continue;
    }
    for (double lf : o.table_failure_rates)
      for (double lam : o.table_lambdas) jobs.push_back({c, lam, lf});
  }
  std::vector<OptimizeCell> cells(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    cells[i] = optimize_cell(s, jobs[i].c, jobs[i].lambda, jobs[i].failure_rate,
                             o.grid_points > 0);
  });
  return cells;
}

}  // namespace rqbd
