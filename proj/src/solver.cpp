#include "retrialqbd/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace rqbd {

namespace {

using ColSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

constexpr Index kDenseLevelLimit = 6000;

std::vector<Index> nonzero_rows(const CsrMatrix& m) {
  std::vector<Index> rows;
  for (Index r = 0; r < m.outerSize(); ++r) {
    if (m.outerIndexPtr()[r + 1] > m.outerIndexPtr()[r]) rows.push_back(r);
  }
  return rows;
}

Matrix dense_rows(const CsrMatrix& m, const std::vector<Index>& rows) {
  Matrix out = Matrix::Zero(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (CsrMatrix::InnerIterator it(m, rows[k]); it; ++it) out(k, it.col()) = it.value();
  return out;
}

ColSparse transposed_colmajor(const CsrMatrix& m) {
  std::vector<Eigen::Triplet<double, int>> t;
  t.reserve(static_cast<std::size_t>(m.nonZeros()));
  for (Index r = 0; r < m.outerSize(); ++r)
    for (CsrMatrix::InnerIterator it(m, r); it; ++it)
      t.emplace_back(static_cast<int>(it.col()), static_cast<int>(r), it.value());
  ColSparse out(static_cast<int>(m.cols()), static_cast<int>(m.rows()));
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

// Transpose of U_l = Q_{l,l} + R(l) Q_{l+1,l}, as a dense matrix.
Matrix inner_transposed(const BlockTridiagonalGenerator& q, const RateMatrixFamily& r, int l) {
  Matrix u = Matrix(q.diag[l]);
  if (l < r.levels()) {
    const Matrix contrib = r.rows[l] * q.lower[l];
    for (std::size_t k = 0; k < r.support[l].size(); ++k) u.row(r.support[l][k]) += contrib.row(k);
  }
  u.transposeInPlace();
  return u;
}

void clamp_rate_matrix(Matrix& m, double tol, int level) {
  if (m.size() == 0) return;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double floor = -tol * scale;
  const double lowest = m.minCoeff();
  if (lowest < floor) {
    std::ostringstream os;
    os << "rate matrix R(" << level << ") has negative entry " << lowest;
    throw SolverError(os.str());
  }
  m = m.cwiseMax(0.0);
}

// R(l-1) = -Q_{l-1,l} U_l^{-1} on the stored rows.
void dense_step(const BlockTridiagonalGenerator& q, RateMatrixFamily& r, int l) {
  Matrix ut = inner_transposed(q, r, l);
  Eigen::PartialPivLU<Eigen::Ref<Matrix>> lu(ut);
  const Matrix bt = dense_rows(q.upper[l - 1], r.support[l - 1]).transpose();
  Matrix xt = lu.solve(bt);
  if (!xt.allFinite()) throw SolverError("singular inner matrix in rate recursion");
  r.rows[l - 1] = -xt.transpose();
  clamp_rate_matrix(r.rows[l - 1], 1e-12, l - 1);
}

void clamp_distribution(StationaryDistribution& z, double tol) {
  double lowest = 0.0;
  for (const auto& v : z.levels)
    if (v.size() > 0) lowest = std::min(lowest, v.minCoeff());
  z.min_entry_before_clamp = lowest;
  if (lowest < -tol) {
    std::ostringstream os;
    os << "stationary vector has negative entry " << lowest;
    throw SolverError(os.str());
  }
  for (auto& v : z.levels) v = v.cwiseMax(0.0);
}

void finish(const BlockTridiagonalGenerator& q, StationaryDistribution& z,
            const SolverOptions& options) {
  clamp_distribution(z, options.clamp_tolerance);
  const double total = z.total_mass();
  if (!(total > 0.0) || !std::isfinite(total)) throw SolverError("stationary vector has zero mass");
  for (auto& v : z.levels) v /= total;
  z.truncation = q.truncation;
  z.tail_mass = z.levels.back().sum();
  z.residual = stationary_residual(q, z.levels);
  if (options.residual_tolerance > 0.0 && z.residual > options.residual_tolerance) {
    std::ostringstream os;
    os << "stationary residual " << z.residual << " exceeds tolerance "
       << options.residual_tolerance;
    throw SolverError(os.str());
  }
}

}  // namespace

RowVector RateMatrixFamily::apply(int level, const RowVector& x) const {
  const auto& sup = support.at(level);
  RowVector xs(static_cast<Index>(sup.size()));
  for (std::size_t k = 0; k < sup.size(); ++k) xs(k) = x(sup[k]);
  return xs * rows[level];
}

Matrix RateMatrixFamily::dense(int level) const {
  Matrix out = Matrix::Zero(level_rows.at(level), rows.at(level).cols());
  for (std::size_t k = 0; k < support[level].size(); ++k)
    out.row(support[level][k]) = rows[level].row(k);
  return out;
}

double RateMatrixFamily::min_entry() const {
  double lowest = 0.0;
  for (const auto& m : rows)
    if (m.size() > 0) lowest = std::min(lowest, m.minCoeff());
  return lowest;
}

double StationaryDistribution::total_mass() const {
  double s = 0.0;
  for (const auto& v : levels) s += v.sum();
  return s;
}

Index StationaryDistribution::dimension() const {
  Index n = 0;
  for (const auto& v : levels) n += v.size();
  return n;
}

RowVector StationaryDistribution::flatten() const {
  RowVector out(dimension());
  Index off = 0;
  for (const auto& v : levels) {
    out.segment(off, v.size()) = v;
    off += v.size();
  }
  return out;
}

RateMatrixFamily rate_matrices(const BlockTridiagonalGenerator& q) {
  const int M = q.truncation;
  RateMatrixFamily r;
  r.support.resize(M);
  r.rows.resize(M);
  r.level_rows.resize(M);
  if (M == 0) return r;
  for (int l = 0; l < M; ++l) {
    r.support[l] = nonzero_rows(q.upper[l]);
    r.level_rows[l] = q.layouts[l].dimension;
  }

  // Top level: U_M = Q_{M,M}. Its dense LU is faster than a sparse one up to
  // a few thousand states; the sparse path only bounds memory.
  if (q.layouts[M].dimension > kDenseLevelLimit) {
    Eigen::SparseLU<ColSparse> lu;
    const ColSparse ut = transposed_colmajor(q.diag[M]);
    lu.compute(ut);
    if (lu.info() != Eigen::Success) throw SolverError("sparse LU of Q_{M,M} failed");
    const Matrix bt = dense_rows(q.upper[M - 1], r.support[M - 1]).transpose();
    Matrix xt = lu.solve(bt);
    if (lu.info() != Eigen::Success) throw SolverError("sparse solve with Q_{M,M} failed");
    r.rows[M - 1] = -xt.transpose();
    clamp_rate_matrix(r.rows[M - 1], 1e-12, M - 1);
  } else {
    dense_step(q, r, M);
  }

  // Lower levels: U_l = Q_{l,l} + R(l) Q_{l+1,l} is dense.
  for (int l = M - 1; l >= 1; --l) dense_step(q, r, l);
  return r;
}

StationaryDistribution boundary_and_normalize(const BlockTridiagonalGenerator& q,
                                              const RateMatrixFamily& r,
                                              const SolverOptions& options) {
  if (r.levels() != q.truncation) throw SolverError("rate family does not match generator");
  // x(0) B0 = 0 with B0 = Q_{0,0} + R(0) Q_{1,0}; one equation replaced by x e = 1.
  Matrix at = inner_transposed(q, r, 0);
  const Index n0 = at.rows();
  at.row(n0 - 1).setOnes();
  Vector rhs = Vector::Zero(n0);
  rhs(n0 - 1) = 1.0;
  Eigen::PartialPivLU<Matrix> lu(at);
  StationaryDistribution z;
  z.boundary_rcond = lu.rcond();
  if (!(z.boundary_rcond > 0.0)) throw SolverError("boundary system is singular");
  z.levels.push_back(lu.solve(rhs).transpose());
  if (!z.levels[0].allFinite()) throw SolverError("boundary system is singular");
  for (int l = 0; l < q.truncation; ++l) z.levels.push_back(r.apply(l, z.levels[l]));
  finish(q, z, options);
  return z;
}

StationaryDistribution solve_stationary(const BlockTridiagonalGenerator& q,
                                        const SolverOptions& options) {
  return boundary_and_normalize(q, rate_matrices(q), options);
}

StationaryDistribution dense_oracle_solve(const BlockTridiagonalGenerator& q,
                                          const SolverOptions& options) {
  const Index n = q.total_dimension();
  if (n > kDenseOracleCap) {
    std::ostringstream os;
    os << "dense oracle limited to " << kDenseOracleCap << " states, got " << n;
    throw SolverError(os.str());
  }
  Matrix at = Matrix(q.assemble()).transpose();
  at.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::PartialPivLU<Matrix> lu(at);
  const Vector x = lu.solve(rhs);
  if (!x.allFinite()) throw SolverError("dense generator system is singular");
  StationaryDistribution z;
  z.boundary_rcond = lu.rcond();
  Index off = 0;
  for (const auto& lay : q.layouts) {
    z.levels.push_back(x.segment(off, lay.dimension).transpose());
    off += lay.dimension;
  }
  finish(q, z, options);
  return z;
}

double stationary_residual(const BlockTridiagonalGenerator& q, const std::vector<RowVector>& z) {
  double worst = 0.0;
  const int M = q.truncation;
  for (int l = 0; l <= M; ++l) {
    RowVector r = z[l] * q.diag[l];
    if (l > 0) r += z[l - 1] * q.upper[l - 1];
    if (l < M) r += z[l + 1] * q.lower[l];
    if (r.size() > 0) worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

StationaryDistribution solve_model(const ModelParams& model, int truncation,
                                   const GeneratorOptions& generator,
                                   const SolverOptions& options) {
  return solve_stationary(build_generator(model, truncation, generator), options);
}

TruncationResult choose_truncation(const ModelParams& model, const GeneratorOptions& generator,
                                   double epsilon, const TruncationOptions& options,
                                   TailCache* cache) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("choose_truncation: epsilon must be positive");
  if (options.initial < 1 || options.max_truncation < options.initial)
    throw std::invalid_argument("choose_truncation: invalid search range");
  TailCache local;
  TailCache& tails = cache ? *cache : local;
  TruncationResult result;
  // Solution at the smallest M evaluated here that met epsilon.
  StationaryDistribution best_met;
  int best_met_m = -1;

  auto tail = [&](int m) {
    auto it = tails.find(m);
    if (it != tails.end()) return it->second;
    StationaryDistribution z = solve_model(model, m, generator, options.solver);
    tails[m] = z.tail_mass;
    if (z.tail_mass < epsilon && (best_met_m < 0 || m < best_met_m)) {
      best_met = std::move(z);
      best_met_m = m;
    }
    return tails[m];
  };

  // Next probe above a failing M. The tail decays roughly geometrically, so
  // extrapolate from the last two points, capped at doubling. Without a
  // second point, step by one from a caller's guess and double from M = 1.
  auto next_probe = [&](int prev, int m) {
    int next = m == 1 ? 2 : m + 1;
    auto p = tails.find(prev);
    if (prev > 0 && p != tails.end()) {
      const double t0 = p->second, t1 = tails.at(m);
      next = 2 * m;
      if (t0 > 0.0 && t1 > 0.0 && t1 < t0) {
        const double per_level = std::log(t1 / t0) / (m - prev);
        const double need = m + std::log(epsilon / t1) / per_level;
        if (std::isfinite(need))
          next = std::clamp(static_cast<int>(std::ceil(need)), m + 1, 2 * m);
      }
    }
    return std::min(next, options.max_truncation);
  };

  int lo = 0;  // largest M known to fail (0 = none)
  int hi = options.initial;
  bool capped = false;
  try {
    while (!(tail(hi) < epsilon)) {
      if (hi == options.max_truncation) {
        lo = hi;
        capped = true;
        break;
      }
      const int next = next_probe(lo, hi);
      lo = hi;
      hi = next;
    }
    if (!capped) {
      // Interpolate the crossing in log tail mass; bisect after two moves of
      // the same bound so the bracket always shrinks geometrically.
      int same_side = 0;
      bool last_hi = false;
      while (hi - lo > 1) {
        int mid = lo + (hi - lo) / 2;
        const auto pl = tails.find(lo);
        if (same_side < 2 && pl != tails.end() && pl->second > 0.0 && tails.at(hi) > 0.0) {
          const double a = std::log(pl->second), b = std::log(tails.at(hi));
          if (b < a) {
            const double x = lo + (hi - lo) * (a - std::log(epsilon)) / (a - b);
            if (std::isfinite(x)) mid = std::clamp(static_cast<int>(std::ceil(x)), lo + 1, hi - 1);
          }
        }
        const bool met = tail(mid) < epsilon;
        same_side = met == last_hi ? same_side + 1 : 1;
        last_hi = met;
        if (same_side >= 3) same_side = 0;
        (met ? hi : lo) = mid;
      }
    }
  } catch (const DimensionCapError& e) {
    capped = true;
    result.warnings.push_back(std::string("dimension cap reached: ") + e.what());
  }

  for (const auto& [m, t] : tails) result.curve.emplace_back(m, t);
  for (std::size_t k = 1; k < result.curve.size(); ++k) {
    if (result.curve[k].second > result.curve[k - 1].second + 1e-12) {
      std::ostringstream os;
      os << "tail mass increased from M=" << result.curve[k - 1].first << " to M="
         << result.curve[k].first;
      result.warnings.push_back(os.str());
    }
  }

  if (capped) {
    // Best achievable: the evaluated M with the smallest tail mass.
    auto best = std::min_element(result.curve.begin(), result.curve.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    if (best == result.curve.end()) throw SolverError("no truncation level could be solved");
    result.truncation = best->first;
    result.met = false;
    std::ostringstream os;
    os << "tail criterion " << epsilon << " not met up to M=" << result.curve.back().first
       << "; best achievable tail mass " << best->second << " at M=" << best->first;
    result.warnings.push_back(os.str());
  } else {
    result.truncation = hi;
    result.met = true;
  }
  result.distribution = best_met_m == result.truncation
                            ? std::move(best_met)
                            : solve_model(model, result.truncation, generator, options.solver);
  result.tail_mass = result.distribution.tail_mass;
  return result;
}

}  // namespace rqbd
