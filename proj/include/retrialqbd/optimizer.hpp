#pragma once

// Expected cost over (service, repair) intensities and a simulated-annealing
// minimizer.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "retrialqbd/generator.hpp"
#include "retrialqbd/solver.hpp"

namespace rqbd {

/// f = c_eb EB + c_en EN + c_s mu + c_r mu_r.
struct CostSpec {
  double c_eb = 10.0;
  double c_en = 15.0;
  double c_s = 15.0;
  double c_r = 20.0;

  void validate() const;
};

/// How a total service intensity mu is split between handoff and new calls.
enum class ServiceSplit {
  Nominal,   // mu_H : mu_N = nominal_ratio : 1
  Computed,  // ratio of the base model's fundamental rates
};

struct Box {
  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;

  void validate() const;
  bool contains(double x, double y) const;
};

struct CostProblem {
  ModelParams base;
  CostSpec weights;
  double epsilon = 1e-5;
  GeneratorOptions generator{PhaseBackend::Aggregated};
  TruncationOptions truncation;
  ServiceSplit split = ServiceSplit::Nominal;
  double nominal_ratio = 1.85;
};

/// The base model with total arrival intensity `lambda` and failure rate `failure_rate`.
ModelParams with_load(const ModelParams& base, double lambda, double failure_rate);

/// mu_H / mu_N used by the problem.
double service_ratio(const CostProblem& problem);

/// Model at the point: services rescaled to sum to mu, repair rate mu_r.
ModelParams cost_model(const CostProblem& problem, double mu, double mu_r);

/// Raised when the chain cannot be solved at a point.
class CostError : public std::runtime_error {
 public:
  CostError(double mu, double mu_r, const std::string& what);
  double mu, mu_r;
};

struct CostValue {
  double f = 0.0;
  double eb = 0.0;
  double en = 0.0;
  int truncation = 0;
  double tail_mass = 0.0;
  bool met = false;
};

/// Solves the chain at the smallest M meeting epsilon. `hint` only seeds the
/// search and does not change the result.
CostValue evaluate_cost(const CostProblem& problem, double mu, double mu_r, int hint = 1);

/// Memoized cost on a 4-decimal grid; the value at a point is the value at
/// its rounded coordinates. Not thread-safe.
class CostObjective {
 public:
  explicit CostObjective(CostProblem problem);

  /// Throws CostError when the point cannot be evaluated.
  double operator()(double mu, double mu_r);
  const CostValue& evaluate(double mu, double mu_r);
  std::size_t solves() const { return solves_; }
  const CostProblem& problem() const { return problem_; }

 private:
  CostProblem problem_;
  std::map<std::pair<long long, long long>, CostValue> memo_;
  std::size_t solves_ = 0;
  int hint_ = 1;
};

using Objective2 = std::function<double(double, double)>;

struct SaConfig {
  double x0 = 1.0, y0 = 1.0;
  /// Proposal standard deviation as a fraction of the current coordinate.
  double step_scale = 0.05;
  /// Coordinates below this magnitude use it for the step size.
  double step_floor = 1e-2;
  /// Every cooling interval the step multiplier doubles when more than half
  /// of the proposals were accepted and halves below a fifth.
  bool adapt_steps = true;
  /// Greedy compass search from the best point once annealing stops.
  bool final_refinement = true;
  /// Refinement stops below this absolute step.
  double refinement_tolerance = 1e-5;
  /// Evaluations of max_evaluations held back for the refinement.
  int refinement_budget = 200;
  /// Nonpositive selects the mean |delta f| over `pilot_samples` proposals.
  double initial_temperature = 0.0;
  int pilot_samples = 20;
  double cooling = 0.95;
  int cooling_interval = 50;  // evaluations per cooling step
  /// Annealing stops once, over the last `patience` proposals, the best value
  /// improved by less than this and the current value moved by less.
  double stop_threshold = 1e-5;
  int patience = 500;
  int max_evaluations = 10000;
  std::uint64_t seed = 1;
  /// Optional feasible box; without one, proposals are reflected at zero.
  std::optional<Box> box;

  void validate() const;
};

struct SaStep {
  int iteration = 0;
  double x = 0.0, y = 0.0;  // proposal
  double f = 0.0;           // objective at the proposal (nan if rejected as non-finite)
  double temperature = 0.0;  // 0 during the final refinement
  bool accepted = false;
  double uniform = -1.0;  // draw compared with exp(-df/T) for worsening moves, else -1
  double current_f = 0.0;
  double best_f = 0.0;
};

struct SaResult {
  double x = 0.0, y = 0.0, f = 0.0;
  int evaluations = 0;
  int nonfinite = 0;
  double initial_temperature = 0.0;
  bool converged = false;  // stopped by the improvement threshold
  int refinement_evaluations = 0;
  std::vector<SaStep> trace;
  std::vector<std::string> log;
};

SaResult simulated_annealing(const Objective2& objective, const SaConfig& config);

/// CSV "iteration,mu,mu_r,f,T,accepted,uniform,current_f,best_f".
void write_trace_csv(std::ostream& os, const SaResult& result);

struct GridResult {
  double x = 0.0, y = 0.0, f = 0.0;
  int points = 0;
  int failures = 0;
};

/// Minimum over an n x n grid with endpoints on the box edges.
GridResult grid_search(const Objective2& objective, const Box& box, int n = 50);

/// Central-difference gradient used to classify a point as stationary.
std::pair<double, double> numerical_gradient(const Objective2& objective, double x, double y,
                                             double h = 1e-3);

}  // namespace rqbd
