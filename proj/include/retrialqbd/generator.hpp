#pragma once

// State-space enumeration and assembly of the level-dependent block
// tridiagonal generator. Levels are orbit sizes. Within a level, states are
// grouped into cells (busy k, new-in-service j, failed i) ordered
// lexicographically in (k, j, i); each cell carries a phase block over
// (MAP phase, new-call service phases, handoff service phases, retrial phases).

#include <iosfwd>
#include <vector>

#include "retrialqbd/kron.hpp"
#include "retrialqbd/stochastic.hpp"

namespace rqbd {

struct Cell {
  int busy = 0;    // k
  int fresh = 0;   // j, new calls in service
  int failed = 0;  // i

  int handoff() const { return busy - fresh; }
  bool operator==(const Cell&) const = default;
};

enum class PhaseBackend {
  /// Every call and retrial carries its own phase (W^n phase blocks).
  Tracked,
  /// Calls of the same class are exchangeable; a phase block only records how
  /// many calls sit in each phase. Phases unreachable from a PH's initial
  /// vector are omitted.
  Aggregated,
};

struct GeneratorOptions {
  PhaseBackend backend = PhaseBackend::Tracked;
  /// Reproduce the printed failure coefficients and retrial-success range.
  bool strict_paper_blocks = false;
  Index dimension_cap = kDefaultDimensionCap;
};

/// Admission rules shared by the generator, the measures and the simulator.
namespace policy {

/// An idle working channel exists.
inline bool idle_channel(const Cell& c, int channels) { return c.failed < channels - c.busy; }
/// Every idle channel has failed (at least one channel is idle and failed).
inline bool all_idle_failed(const Cell& c, int channels) {
  return c.busy < channels && c.failed == channels - c.busy;
}
inline bool handoff_admitted(const Cell& c, int channels) { return idle_channel(c, channels); }
inline bool new_admitted(const Cell& c, int channels, int guard) {
  return c.busy < channels - guard && idle_channel(c, channels);
}
/// Blocked new call that joins the orbit (lost instead when all idle failed).
inline bool new_joins_orbit(const Cell& c, int channels, int guard) {
  return c.busy >= channels - guard && !all_idle_failed(c, channels);
}
/// Retrial attempt succeeds. The policy rule treats retrials as new calls; the
/// printed block range admits them whenever an idle working channel exists,
/// as long as the new-call count stays within S - G.
inline bool retrial_succeeds(const Cell& c, int channels, int guard, bool strict_paper) {
  return strict_paper ? idle_channel(c, channels) && c.fresh < channels - guard
                      : new_admitted(c, channels, guard);
}
/// Multiplier applied to k * lambda_f in a cell. 1 under the uniform rule; the
/// printed blocks use 2 in mixed cells and j at k = S.
double failure_multiplier(const Cell& c, int channels, int guard, bool strict_paper);

}  // namespace policy

struct LevelLayout {
  int level = 0;
  std::vector<Cell> cells;
  std::vector<Index> block_size;
  std::vector<Index> offset;
  Index dimension = 0;

  /// Index of cell (k, j, i), or -1 if inadmissible.
  int find(const Cell& c) const;
  /// Offset of a cell that must exist; throws std::logic_error otherwise.
  Index offset_of(const Cell& c) const;
};

/// Admissible cells of one level with their phase-block sizes.
LevelLayout enumerate_level(const ModelParams& model, int level,
                            const GeneratorOptions& options = {});

/// Phase-block size of a cell at a given level for the chosen backend.
Index phase_block_size(const ModelParams& model, const Cell& cell, int level,
                       const GeneratorOptions& options);

/// Q_{l,l+1}: blocked new calls joining the orbit.
SparseMatrix build_upper(const ModelParams& model, int level, const GeneratorOptions& options = {});
/// Q_{l+1,l}: orbit departures and successful retrials out of level l + 1.
SparseMatrix build_lower(const ModelParams& model, int level, const GeneratorOptions& options = {});
/// Q_{l,l}. With `truncation_level` set, orbit-joining new calls are lost.
SparseMatrix build_diag(const ModelParams& model, int level, const GeneratorOptions& options = {},
                        bool truncation_level = false);

struct BlockTridiagonalGenerator {
  ModelParams model;
  GeneratorOptions options;
  int truncation = 0;
  std::vector<LevelLayout> layouts;  // levels 0..M
  std::vector<CsrMatrix> upper;      // upper[l] = Q_{l,l+1}, l < M
  std::vector<CsrMatrix> diag;       // diag[l] = Q_{l,l}
  std::vector<CsrMatrix> lower;      // lower[l] = Q_{l+1,l}, l < M

  Index total_dimension() const;
  Index level_offset(int level) const;
  /// max |row sum| over every row of the truncated chain.
  double max_row_sum_residual() const;
  /// Largest negative off-diagonal and largest positive diagonal entry.
  double sign_violation() const;
  CsrMatrix assemble() const;
  /// One line per nonzero: "level kind row col value" with kind in
  /// {upper, diag, lower}; for lower, level is the source level l + 1.
  void dump(std::ostream& os) const;
};

BlockTridiagonalGenerator build_generator(const ModelParams& model, int truncation,
                                          const GeneratorOptions& options = {});

/// Per-state rates inside one cell, in the cell's local phase order.
struct CellRates {
  Vector handoff_arrival;  // (C_H e)_v
  Vector new_arrival;      // (C_N e)_v
  Vector handoff_exit;     // sum over handoff calls of L_H^0
  Vector new_exit;         // sum over new calls of L_N^0
  Vector orbit_leave;      // sum over retrials of Gamma^0(1)
  Vector orbit_attempt;    // sum over retrials of Gamma^0(2)
};

CellRates cell_rates(const ModelParams& model, const GeneratorOptions& options, int level,
                     const Cell& cell);

}  // namespace rqbd
