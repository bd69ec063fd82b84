#pragma once

// Coordinate-list sparse matrices, Kronecker algebra and the phase-lift
// operators used to assemble generator blocks.

#include <cstdint>
#include <vector>

#include <Eigen/Sparse>

#include "retrialqbd/stochastic.hpp"

namespace rqbd {

using Index = std::int64_t;
using CsrMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;

/// Maximum number of rows (or columns) any Kronecker construction may produce.
inline constexpr Index kDefaultDimensionCap = 5'000'000;

class DimensionCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Entry {
  Index row;
  Index col;
  double value;
};

/// Append-only coordinate matrix. Duplicates are summed and explicit zeros
/// dropped by canonicalize().
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(Index rows, Index cols) : rows_(rows), cols_(cols) {}

  static SparseMatrix identity(Index n);
  static SparseMatrix zero(Index rows, Index cols) { return SparseMatrix(rows, cols); }
  static SparseMatrix from_dense(const Matrix& m);
  static SparseMatrix column(const Vector& v);
  static SparseMatrix row(const RowVector& v);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t nonzeros() const { return entries_.size(); }

  void add(Index r, Index c, double v);
  /// Adds `block` with its (0,0) at (row_offset, col_offset).
  void add_block(const SparseMatrix& block, Index row_offset, Index col_offset, double scale = 1.0);

  SparseMatrix& canonicalize();
  SparseMatrix scaled(double s) const;
  SparseMatrix operator+(const SparseMatrix& other) const;
  SparseMatrix operator-(const SparseMatrix& other) const;

  Vector row_sums() const;
  Matrix dense() const;
  CsrMatrix to_csr() const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Entry> entries_;
};

SparseMatrix kron_product(const SparseMatrix& a, const SparseMatrix& b,
                          Index cap = kDefaultDimensionCap);
/// A (+) B = A (x) I + I (x) B for square A, B.
SparseMatrix kron_sum(const SparseMatrix& a, const SparseMatrix& b,
                      Index cap = kDefaultDimensionCap);

/// width^k with overflow and cap checks.
Index checked_power(Index width, int k, Index cap = kDefaultDimensionCap);

/// k-fold Kronecker sum A (+) ... (+) A; k = 0 gives the 1x1 zero matrix.
SparseMatrix kron_sum_power(const SparseMatrix& a, int k, Index cap = kDefaultDimensionCap);

/// sum_{y=0}^{k-1} I_{W^y} (x) X (x) I_{W^{k-1-y}} for a W x c block X.
/// With X a column this removes one of k tracked entities; with X a W x W'
/// block it replaces one of them by a W'-phase entity at the same position.
SparseMatrix slot_sum(const SparseMatrix& x, Index width, int k, Index cap = kDefaultDimensionCap);

enum class LiftKind {
  ServiceNew,        // Phi_N(j)
  ServiceHandoff,    // Phi_H(k - j)
  Orbit,             // Phi_orbit(l)
  OrbitFailedRetry,  // hat Phi_orbit(l)
  ExitNew,           // Psi_N(j)
  ExitHandoff,       // Psi_H(k - j)
  OrbitLeave,        // Psi_orbit
  OrbitSuccess,      // hat Psi_orbit
};

struct PhaseLift {
  LiftKind kind;
  int multiplicity;
};

/// The matrices the lift operators are built from.
struct LiftPieces {
  SparseMatrix service_new;      // L_N
  SparseMatrix exit_new;         // L_N^0 as a column
  RowVector init_new;            // delta_N
  SparseMatrix service_handoff;  // L_H
  SparseMatrix exit_handoff;     // L_H^0
  RowVector init_handoff;        // delta_H
  SparseMatrix retrial;          // Gamma
  SparseMatrix retrial_leave;    // Gamma^0(1)
  SparseMatrix retrial_attempt;  // Gamma^0(2)
  RowVector init_retrial;        // gamma
  Index service_width = 1;       // W1
  Index retrial_width = 1;       // W2

  static LiftPieces from_model(const ModelParams& model);
};

/// Builds the lift for `multiplicity` tracked entities:
///  - Phi kinds: k-fold Kronecker sums of L_N, L_H, Gamma, Gamma^0(2) gamma.
///  - Psi kinds: one term per entity; Psi_N(k), Psi_H(k), Psi_orbit(k) map
///    W^k phases to W^{k-1}, and hat Psi_orbit(k) replaces the retrying entity
///    by Gamma^0(2) (x) delta_N at its position.
/// multiplicity 0 yields the 1x1 zero matrix.
SparseMatrix lift(const PhaseLift& what, const LiftPieces& pieces, Index cap = kDefaultDimensionCap);

}  // namespace rqbd
