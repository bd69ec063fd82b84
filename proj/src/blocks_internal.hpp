#pragma once

#include "retrialqbd/generator.hpp"

namespace rqbd::detail {

// `from` is the source level layout, `to` the target level layout.
SparseMatrix tracked_upper(const ModelParams& m, const GeneratorOptions& o, const LevelLayout& from,
                           const LevelLayout& to);
SparseMatrix tracked_diag(const ModelParams& m, const GeneratorOptions& o, const LevelLayout& level,
                          bool truncation_level);
SparseMatrix tracked_lower(const ModelParams& m, const GeneratorOptions& o, const LevelLayout& from,
                           const LevelLayout& to);
CellRates tracked_cell_rates(const ModelParams& m, const GeneratorOptions& o, int level,
                             const Cell& cell);

SparseMatrix aggregated_upper(const ModelParams& m, const GeneratorOptions& o,
                              const LevelLayout& from, const LevelLayout& to);
SparseMatrix aggregated_diag(const ModelParams& m, const GeneratorOptions& o,
                             const LevelLayout& level, bool truncation_level);
SparseMatrix aggregated_lower(const ModelParams& m, const GeneratorOptions& o,
                              const LevelLayout& from, const LevelLayout& to);
CellRates aggregated_cell_rates(const ModelParams& m, const GeneratorOptions& o, int level,
                                const Cell& cell);

/// Phases reachable from the initial vector through the sub-generator.
std::vector<int> reachable_phases(const PhDistribution& d);

/// Number of ways to place n exchangeable entities in w phases.
Index multiset_count(int n, int w, Index cap);

}  // namespace rqbd::detail
