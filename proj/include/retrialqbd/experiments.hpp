#pragma once

// Experiment orchestration on top of a scenario: single solves, case
// reductions, parameter sweeps, simulation cross-checks and cost
// optimization runs.

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "retrialqbd/measures.hpp"
#include "retrialqbd/optimizer.hpp"
#include "retrialqbd/scenario.hpp"
#include "retrialqbd/simulator.hpp"
#include "retrialqbd/solver.hpp"

namespace rqbd {

/// Runs fn(0..n-1) on up to `workers` threads; the first exception is
/// rethrown after all threads finish.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::min<std::size_t>(std::max(workers, 1), std::max<std::size_t>(n, 1));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct SolveSettings {
  double epsilon = 1e-5;
  GeneratorOptions generator{PhaseBackend::Aggregated};
  TruncationOptions truncation;
  std::optional<int> fixed_truncation;
  MeasureOptions measures;
};

SolveSettings solve_settings(const Scenario& s);

struct PointSolution {
  TruncationResult truncation;  // search record and the distribution at the chosen M
  MeasureReport report;
  Index dimension = 0;
  double row_sum_residual = 0.0;
};

/// Chooses M (or uses the fixed one) and evaluates the measures. `hint` only
/// seeds the search.
PointSolution solve_point(const ModelParams& model, const SolveSettings& settings, int hint = 1);

/// Table 1 reductions of a full MAP/PH/PH model: II exponential retrials,
/// III also exponential services, IV Poisson arrivals with exponential
/// services and PH retrials, V Poisson and all exponential. Exponentials keep
/// the fundamental rates; the retrial abandonment share is preserved.
ModelParams build_case(const ModelParams& base, CaseId c);

/// The model with one intensity set to `value`: lambda_h_scale multiplies
/// C_H, mu_n / mu_h / theta rescale the PH to that fundamental rate,
/// lambda_f and mu_r are set directly.
ModelParams apply_sweep(const ModelParams& base, SweepVariable v, double value);

struct SweepRow {
  CaseId case_id = CaseId::I;
  double value = 0.0;
  int truncation = 0;
  double tail_mass = 0.0;
  bool met = false;
  MeasureReport report;
};

/// One row per (case, value), cases outermost. Runs the points on a worker pool.
std::vector<SweepRow> run_sweep(const ModelParams& base, const SweepSpec& sweep,
                                const std::vector<CaseId>& cases, const SolveSettings& settings,
                                int workers);

std::string sweep_csv_header();
std::string sweep_csv_row(const SweepVariable v, const SweepRow& row);

/// Compared quantity of a simulation against the analytic value.
struct SimComparison {
  std::string measure;
  double analytic = 0.0;
  SimEstimate estimate;
  bool inside = false;
};

std::vector<SimComparison> compare_simulation(const MeasureReport& analytic,
                                              const SimEstimates& sim);

/// SA (and optional grid oracle) at one (case, lambda, lambda_f) cell.
struct OptimizeCell {
  CaseId case_id = CaseId::I;
  double lambda = 0.0;
  double failure_rate = 0.0;
  SaResult sa;
  CostValue at_optimum;
  std::size_t solves = 0;
  std::pair<double, double> gradient{0.0, 0.0};  // at the SA optimum
  std::optional<GridResult> grid;
  std::optional<ReferenceOptimum> reference;
  std::optional<CostValue> at_reference;  // cost evaluated at the reference point
};

CostProblem cost_problem(const Scenario& s, const ModelParams& base, double lambda,
                         double failure_rate);

OptimizeCell optimize_cell(const Scenario& s, CaseId c, double lambda, double failure_rate,
                           bool with_grid);

/// Every (case, lambda, lambda_f) cell of the optimize block.
std::vector<OptimizeCell> run_optimize(const Scenario& s, int workers);

}  // namespace rqbd
