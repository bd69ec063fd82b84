#pragma once

// Stationary distribution of the truncated level-dependent QBD by backward
// rate-matrix recursion, plus a dense direct solve used as an oracle and the
// tail-mass driven choice of the truncation level.

#include <map>
#include <string>
#include <vector>

#include "retrialqbd/generator.hpp"

namespace rqbd {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverOptions {
  /// Entries in [-clamp_tolerance, 0) are set to zero; anything more
  /// negative is an error.
  double clamp_tolerance = 1e-12;
  /// Throw when the achieved ||zQ||_inf exceeds this (<= 0 disables).
  double residual_tolerance = 1e-8;
};

/// R(l) for l = 0..M-1. Only rows of R(l) that can be nonzero (rows where
/// Q_{l,l+1} has entries) are stored.
struct RateMatrixFamily {
  std::vector<std::vector<Index>> support;  // row indices of R(l) stored
  std::vector<Matrix> rows;                 // |support| x N_{l+1}
  std::vector<Index> level_rows;            // N_l

  int levels() const { return static_cast<int>(rows.size()); }
  /// x R(l) for a row vector x of length N_l.
  RowVector apply(int level, const RowVector& x) const;
  Matrix dense(int level) const;
  double min_entry() const;
};

struct StationaryDistribution {
  int truncation = 0;
  std::vector<RowVector> levels;  // z(0)..z(M)
  double residual = 0.0;          // ||zQ||_inf
  double tail_mass = 0.0;         // z(M) e
  double boundary_rcond = 0.0;    // reciprocal condition estimate of the boundary system
  double min_entry_before_clamp = 0.0;

  double total_mass() const;
  Index dimension() const;
  RowVector flatten() const;
};

RateMatrixFamily rate_matrices(const BlockTridiagonalGenerator& q);

StationaryDistribution boundary_and_normalize(const BlockTridiagonalGenerator& q,
                                              const RateMatrixFamily& r,
                                              const SolverOptions& options = {});

/// rate_matrices followed by boundary_and_normalize.
StationaryDistribution solve_stationary(const BlockTridiagonalGenerator& q,
                                        const SolverOptions& options = {});

inline constexpr Index kDenseOracleCap = 20'000;

/// Solves zQ = 0, ze = 1 on the densely assembled truncated generator.
StationaryDistribution dense_oracle_solve(const BlockTridiagonalGenerator& q,
                                          const SolverOptions& options = {});

/// ||zQ||_inf for per-level vectors z.
double stationary_residual(const BlockTridiagonalGenerator& q, const std::vector<RowVector>& z);

struct TruncationOptions {
  int initial = 1;
  int max_truncation = 256;
  SolverOptions solver;
};

struct TruncationResult {
  int truncation = 0;
  double tail_mass = 0.0;
  bool met = false;  // tail_mass < epsilon
  std::vector<std::pair<int, double>> curve;  // every (M, tail mass) evaluated, sorted by M
  std::vector<std::string> warnings;
  StationaryDistribution distribution;  // solution at `truncation`
};

/// Tail masses already computed for a model, keyed by M. Shared between
/// searches with different epsilon.
using TailCache = std::map<int, double>;

/// Smallest M with z(M)e < epsilon, by doubling then bisection.
TruncationResult choose_truncation(const ModelParams& model, const GeneratorOptions& generator,
                                   double epsilon, const TruncationOptions& options = {},
                                   TailCache* cache = nullptr);

/// Builds the generator at truncation M and solves it.
StationaryDistribution solve_model(const ModelParams& model, int truncation,
                                   const GeneratorOptions& generator = {},
                                   const SolverOptions& options = {});

}  // namespace rqbd
