#include "retrialqbd/generator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "blocks_internal.hpp"

namespace rqbd {

double policy::failure_multiplier(const Cell& c, int channels, int guard, bool strict_paper) {
  if (!strict_paper) return 1.0;
  const int open = channels - guard;
  if (c.busy == channels) return c.fresh >= 1 ? static_cast<double>(c.fresh) : 1.0;
  if (c.busy <= open) return (c.fresh > 0 && c.fresh < c.busy) ? 2.0 : 1.0;
  return c.fresh >= 1 ? 2.0 : 1.0;
}

int LevelLayout::find(const Cell& c) const {
  // Cells are sorted lexicographically, so a binary search suffices.
  auto less = [](const Cell& a, const Cell& b) {
    if (a.busy != b.busy) return a.busy < b.busy;
    if (a.fresh != b.fresh) return a.fresh < b.fresh;
    return a.failed < b.failed;
  };
  auto it = std::lower_bound(cells.begin(), cells.end(), c, less);
  if (it == cells.end() || !(*it == c)) return -1;
  return static_cast<int>(it - cells.begin());
}

Index LevelLayout::offset_of(const Cell& c) const {
  const int i = find(c);
  if (i < 0) throw std::logic_error("transition into a cell outside the level layout");
  return offset[i];
}

Index phase_block_size(const ModelParams& model, const Cell& cell, int level,
                       const GeneratorOptions& options) {
  const Index L = model.arrivals.phases();
  const Index w1 = model.service_new.phases();
  const Index w2 = model.retrial.phases();
  const Index cap = options.dimension_cap;
  auto mul = [cap](Index a, Index b) {
    if (b != 0 && a > cap / b) throw DimensionCapError("phase block exceeds dimension cap");
    return a * b;
  };
  if (options.backend == PhaseBackend::Tracked) {
    return mul(mul(L, checked_power(w1, cell.busy, cap)), checked_power(w2, level, cap));
  }
  auto active = [](const PhDistribution& d) {
    return static_cast<int>(detail::reachable_phases(d).size());
  };
  const Index a = detail::multiset_count(cell.fresh, active(model.service_new), cap);
  const Index b = detail::multiset_count(cell.handoff(), active(model.service_handoff), cap);
  const Index r = detail::multiset_count(level, active(model.retrial), cap);
  return mul(mul(mul(L, a), b), r);
}

LevelLayout enumerate_level(const ModelParams& model, int level, const GeneratorOptions& options) {
  if (level < 0) throw std::invalid_argument("enumerate_level: negative level");
  const int S = model.channels;
  const int G = model.guard;
  LevelLayout lay;
  lay.level = level;
  for (int k = 0; k <= S; ++k) {
    for (int j = 0; j <= std::min(k, S - G); ++j) {
      for (int i = 0; i <= S - k; ++i) {
        const Cell c{k, j, i};
        const Index n = phase_block_size(model, c, level, options);
        lay.cells.push_back(c);
        lay.block_size.push_back(n);
        lay.offset.push_back(lay.dimension);
        lay.dimension += n;
        if (lay.dimension > options.dimension_cap)
          throw DimensionCapError("level dimension exceeds dimension cap");
      }
    }
  }
  return lay;
}

SparseMatrix build_upper(const ModelParams& model, int level, const GeneratorOptions& options) {
  const LevelLayout from = enumerate_level(model, level, options);
  const LevelLayout to = enumerate_level(model, level + 1, options);
  return options.backend == PhaseBackend::Tracked
             ? detail::tracked_upper(model, options, from, to)
             : detail::aggregated_upper(model, options, from, to);
}

SparseMatrix build_lower(const ModelParams& model, int level, const GeneratorOptions& options) {
  const LevelLayout from = enumerate_level(model, level + 1, options);
  const LevelLayout to = enumerate_level(model, level, options);
  return options.backend == PhaseBackend::Tracked
             ? detail::tracked_lower(model, options, from, to)
             : detail::aggregated_lower(model, options, from, to);
}

SparseMatrix build_diag(const ModelParams& model, int level, const GeneratorOptions& options,
                        bool truncation_level) {
  const LevelLayout lay = enumerate_level(model, level, options);
  return options.backend == PhaseBackend::Tracked
             ? detail::tracked_diag(model, options, lay, truncation_level)
             : detail::aggregated_diag(model, options, lay, truncation_level);
}

CellRates cell_rates(const ModelParams& model, const GeneratorOptions& options, int level,
                     const Cell& cell) {
  return options.backend == PhaseBackend::Tracked
             ? detail::tracked_cell_rates(model, options, level, cell)
             : detail::aggregated_cell_rates(model, options, level, cell);
}

BlockTridiagonalGenerator build_generator(const ModelParams& model, int truncation,
                                          const GeneratorOptions& options) {
  if (truncation < 0) throw std::invalid_argument("build_generator: negative truncation level");
  validate_model(model);
  BlockTridiagonalGenerator g;
  g.model = model;
  g.options = options;
  g.truncation = truncation;
  Index total = 0;
  for (int l = 0; l <= truncation; ++l) {
    g.layouts.push_back(enumerate_level(model, l, options));
    total += g.layouts.back().dimension;
    if (total > options.dimension_cap)
      throw DimensionCapError("truncated generator exceeds dimension cap");
  }
  const bool tracked = options.backend == PhaseBackend::Tracked;
  for (int l = 0; l <= truncation; ++l) {
    const LevelLayout& lay = g.layouts[l];
    const bool top = l == truncation;
    g.diag.push_back((tracked ? detail::tracked_diag(model, options, lay, top)
                              : detail::aggregated_diag(model, options, lay, top))
                         .to_csr());
    if (top) break;
    const LevelLayout& next = g.layouts[l + 1];
    g.upper.push_back((tracked ? detail::tracked_upper(model, options, lay, next)
                               : detail::aggregated_upper(model, options, lay, next))
                          .to_csr());
    g.lower.push_back((tracked ? detail::tracked_lower(model, options, next, lay)
                               : detail::aggregated_lower(model, options, next, lay))
                          .to_csr());
  }
  return g;
}

Index BlockTridiagonalGenerator::total_dimension() const {
  Index n = 0;
  for (const auto& lay : layouts) n += lay.dimension;
  return n;
}

Index BlockTridiagonalGenerator::level_offset(int level) const {
  Index n = 0;
  for (int l = 0; l < level; ++l) n += layouts.at(l).dimension;
  return n;
}

double BlockTridiagonalGenerator::max_row_sum_residual() const {
  double worst = 0.0;
  for (int l = 0; l <= truncation; ++l) {
    Vector s = diag[l] * Vector::Ones(diag[l].cols());
    if (l < truncation) s += upper[l] * Vector::Ones(upper[l].cols());
    if (l > 0) s += lower[l - 1] * Vector::Ones(lower[l - 1].cols());
    if (s.size() > 0) worst = std::max(worst, s.cwiseAbs().maxCoeff());
  }
  return worst;
}

double BlockTridiagonalGenerator::sign_violation() const {
  double worst = 0.0;
  auto scan = [&](const CsrMatrix& m, bool on_diag) {
    for (Index r = 0; r < m.outerSize(); ++r) {
      for (CsrMatrix::InnerIterator it(m, r); it; ++it) {
        const bool d = on_diag && it.col() == r;
        worst = std::max(worst, d ? it.value() : -it.value());
      }
    }
  };
  for (const auto& m : diag) scan(m, true);
  for (const auto& m : upper) scan(m, false);
  for (const auto& m : lower) scan(m, false);
  return worst;
}

CsrMatrix BlockTridiagonalGenerator::assemble() const {
  const Index n = total_dimension();
  std::vector<Eigen::Triplet<double, Index>> t;
  auto put = [&t](const CsrMatrix& m, Index r0, Index c0) {
    for (Index r = 0; r < m.outerSize(); ++r)
      for (CsrMatrix::InnerIterator it(m, r); it; ++it)
        t.emplace_back(r0 + r, c0 + it.col(), it.value());
  };
  Index off = 0;
  for (int l = 0; l <= truncation; ++l) {
    const Index next = off + layouts[l].dimension;
    put(diag[l], off, off);
    if (l < truncation) {
      put(upper[l], off, next);
      put(lower[l], next, off);
    }
    off = next;
  }
  CsrMatrix q(n, n);
  q.setFromTriplets(t.begin(), t.end());
  q.makeCompressed();
  return q;
}

void BlockTridiagonalGenerator::dump(std::ostream& os) const {
  const auto old = os.precision(17);
  auto write = [&os](int level, const char* kind, const CsrMatrix& m) {
    for (Index r = 0; r < m.outerSize(); ++r)
      for (CsrMatrix::InnerIterator it(m, r); it; ++it)
        os << level << ' ' << kind << ' ' << r << ' ' << it.col() << ' ' << it.value() << '\n';
  };
  for (int l = 0; l <= truncation; ++l) {
    if (l < truncation) write(l, "upper", upper[l]);
    write(l, "diag", diag[l]);
    if (l > 0) write(l, "lower", lower[l - 1]);
  }
  os.precision(old);
}

}  // namespace rqbd
