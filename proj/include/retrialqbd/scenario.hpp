#pragma once

// Line-oriented scenario files: `key = value` pairs, `#` comments, matrices
// written as `[a, b; c, d]` and vectors as `[a, b]`.

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "retrialqbd/generator.hpp"
#include "retrialqbd/measures.hpp"
#include "retrialqbd/optimizer.hpp"
#include "retrialqbd/simulator.hpp"
#include "retrialqbd/solver.hpp"

namespace rqbd {

/// Parse or validation failure, located by file, line and field where known.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& path, int line, const std::string& field,
                const std::string& what);
  std::string path;
  int line;  // 0 when the error is not tied to a line
  std::string field;
};

enum class CaseId { I = 1, II, III, IV, V };

std::string case_name(CaseId c);
/// Accepts roman numerals "I".."V" (case-insensitive) or digits "1".."5".
CaseId parse_case(const std::string& text);

enum class SweepVariable { LambdaHScale, MuN, MuH, Theta, LambdaF, MuR };

/// Scenario spelling: lambda_h_scale, mu_n, mu_h, theta, lambda_f, mu_r.
std::string sweep_variable_name(SweepVariable v);
SweepVariable parse_sweep_variable(const std::string& text);

struct SweepSpec {
  SweepVariable variable = SweepVariable::MuN;
  std::vector<double> values;
};

/// A printed optimum used as a reference row for deviations.
struct ReferenceOptimum {
  double lambda = 0.0;
  double failure_rate = 0.0;
  double mu = 0.0;
  double mu_r = 0.0;
  double f = 0.0;
};

struct OptimizeSpec {
  double lambda = 2.0;
  double failure_rate = 10.0;
  CostSpec weights;
  ServiceSplit split = ServiceSplit::Nominal;
  double nominal_ratio = 1.85;
  SaConfig sa;
  /// Grid-search oracle points per axis; 0 disables it. Needs a box.
  int grid_points = 0;
  /// (lambda, lambda_f) table cells; empty runs the single cell above.
  std::vector<double> table_lambdas;
  std::vector<double> table_failure_rates;
  std::vector<ReferenceOptimum> reference;
};

struct SimulateSpec {
  SimConfig config;
  /// Also solve the chain and flag measures outside their intervals.
  bool compare = true;
};

struct Scenario {
  std::string name = "scenario";
  std::string source;  // path the scenario was read from
  ModelParams model;

  double epsilon = 1e-5;
  GeneratorOptions generator{PhaseBackend::Aggregated};
  TruncationOptions truncation;
  /// Solve at this M instead of searching.
  std::optional<int> fixed_truncation;
  MeasureOptions measures;

  std::optional<SweepSpec> sweep;
  std::vector<CaseId> cases{CaseId::I};
  SimulateSpec simulate;
  OptimizeSpec optimize;
  std::string out = "out";
};

/// Unset model keys default to reference_model(0.5).
Scenario parse_scenario(std::istream& in, const std::string& path = "<input>");
Scenario load_scenario(const std::string& path);

/// Resolved scenario text; parsing it again yields the same scenario.
std::string format_scenario(const Scenario& s);

/// Row-syntax literal with round-trip precision.
std::string format_matrix(const Matrix& m);
std::string format_vector(const Eigen::Ref<const RowVector>& v);

}  // namespace rqbd
