#include "retrialqbd/kron.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rqbd {

namespace {

void check_dims(Index rows, Index cols, Index cap) {
  if (rows > cap || cols > cap) {
    std::ostringstream os;
    os << "Kronecker dimension " << rows << "x" << cols << " exceeds cap " << cap;
    throw DimensionCapError(os.str());
  }
}

Index checked_mul(Index a, Index b, Index cap) {
  if (a != 0 && b > std::numeric_limits<Index>::max() / a) {
    throw DimensionCapError("Kronecker dimension overflow");
  }
  Index p = a * b;
  if (p > cap) {
    std::ostringstream os;
    os << "Kronecker dimension " << p << " exceeds cap " << cap;
    throw DimensionCapError(os.str());
  }
  return p;
}

}  // namespace

SparseMatrix SparseMatrix::identity(Index n) {
  SparseMatrix m(n, n);
  m.entries_.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) m.entries_.push_back({i, i, 1.0});
  return m;
}

SparseMatrix SparseMatrix::from_dense(const Matrix& d) {
  SparseMatrix m(d.rows(), d.cols());
  for (Index r = 0; r < d.rows(); ++r)
    for (Index c = 0; c < d.cols(); ++c)
      if (d(r, c) != 0.0) m.entries_.push_back({r, c, d(r, c)});
  return m;
}

SparseMatrix SparseMatrix::column(const Vector& v) {
  return from_dense(Matrix(v));
}

SparseMatrix SparseMatrix::row(const RowVector& v) {
  return from_dense(Matrix(v));
}

void SparseMatrix::add(Index r, Index c, double v) {
  if (v != 0.0) entries_.push_back({r, c, v});
}

void SparseMatrix::add_block(const SparseMatrix& block, Index row_offset, Index col_offset,
                             double scale) {
  entries_.reserve(entries_.size() + block.entries_.size());
  for (const auto& e : block.entries_) {
    entries_.push_back({e.row + row_offset, e.col + col_offset, e.value * scale});
  }
}

SparseMatrix& SparseMatrix::canonicalize() {
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Entry> merged;
  merged.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col) {
      merged.back().value += e.value;
    } else {
      merged.push_back(e);
    }
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const Entry& e) { return e.value == 0.0; }),
               merged.end());
  entries_ = std::move(merged);
  return *this;
}

SparseMatrix SparseMatrix::scaled(double s) const {
  SparseMatrix out(rows_, cols_);
  if (s == 0.0) return out;
  out.entries_ = entries_;
  for (auto& e : out.entries_) e.value *= s;
  return out;
}

SparseMatrix SparseMatrix::operator+(const SparseMatrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw std::invalid_argument("SparseMatrix +: dimension mismatch");
  SparseMatrix out = *this;
  out.entries_.insert(out.entries_.end(), other.entries_.begin(), other.entries_.end());
  out.canonicalize();
  return out;
}

SparseMatrix SparseMatrix::operator-(const SparseMatrix& other) const {
  return *this + other.scaled(-1.0);
}

Vector SparseMatrix::row_sums() const {
  Vector s = Vector::Zero(rows_);
  for (const auto& e : entries_) s(e.row) += e.value;
  return s;
}

Matrix SparseMatrix::dense() const {
  Matrix d = Matrix::Zero(rows_, cols_);
  for (const auto& e : entries_) d(e.row, e.col) += e.value;
  return d;
}

CsrMatrix SparseMatrix::to_csr() const {
  std::vector<Eigen::Triplet<double, Index>> t;
  t.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.row < 0 || e.row >= rows_ || e.col < 0 || e.col >= cols_)
      throw std::logic_error("sparse entry outside the matrix");
    t.emplace_back(e.row, e.col, e.value);
  }
  CsrMatrix m(rows_, cols_);
  m.setFromTriplets(t.begin(), t.end());
  m.prune(0.0);
  m.makeCompressed();
  return m;
}

SparseMatrix kron_product(const SparseMatrix& a, const SparseMatrix& b, Index cap) {
  const Index rows = checked_mul(a.rows(), b.rows(), std::numeric_limits<Index>::max());
  const Index cols = checked_mul(a.cols(), b.cols(), std::numeric_limits<Index>::max());
  check_dims(rows, cols, cap);
  SparseMatrix out(rows, cols);
  for (const auto& ea : a.entries()) {
    for (const auto& eb : b.entries()) {
      out.add(ea.row * b.rows() + eb.row, ea.col * b.cols() + eb.col, ea.value * eb.value);
    }
  }
  return out;
}

SparseMatrix kron_sum(const SparseMatrix& a, const SparseMatrix& b, Index cap) {
  if (a.rows() != a.cols() || b.rows() != b.cols())
    throw std::invalid_argument("kron_sum: operands must be square");
  SparseMatrix out = kron_product(a, SparseMatrix::identity(b.rows()), cap);
  SparseMatrix right = kron_product(SparseMatrix::identity(a.rows()), b, cap);
  out.add_block(right, 0, 0);
  out.canonicalize();
  return out;
}

Index checked_power(Index width, int k, Index cap) {
  Index p = 1;
  for (int i = 0; i < k; ++i) p = checked_mul(p, width, cap);
  return p;
}

SparseMatrix kron_sum_power(const SparseMatrix& a, int k, Index cap) {
  if (k == 0) return SparseMatrix(1, 1);
  checked_power(a.rows(), k, cap);
  SparseMatrix out = a;
  for (int i = 1; i < k; ++i) out = kron_sum(out, a, cap);
  return out;
}

SparseMatrix slot_sum(const SparseMatrix& x, Index width, int k, Index cap) {
  if (k == 0) return SparseMatrix(1, 1);
  if (x.rows() != width) throw std::invalid_argument("slot_sum: block rows must equal width");
  SparseMatrix out;
  for (int y = 0; y < k; ++y) {
    SparseMatrix term = kron_product(SparseMatrix::identity(checked_power(width, y, cap)), x, cap);
    term = kron_product(term, SparseMatrix::identity(checked_power(width, k - 1 - y, cap)), cap);
    if (y == 0) {
      out = std::move(term);
    } else {
      out.add_block(term, 0, 0);
    }
  }
  out.canonicalize();
  return out;
}

LiftPieces LiftPieces::from_model(const ModelParams& model) {
  LiftPieces p;
  p.service_new = SparseMatrix::from_dense(model.service_new.subgen);
  p.exit_new = SparseMatrix::column(model.service_new.exits.at(0));
  p.init_new = model.service_new.init;
  p.service_handoff = SparseMatrix::from_dense(model.service_handoff.subgen);
  p.exit_handoff = SparseMatrix::column(model.service_handoff.exits.at(0));
  p.init_handoff = model.service_handoff.init;
  p.retrial = SparseMatrix::from_dense(model.retrial.subgen);
  p.retrial_leave = SparseMatrix::column(model.retrial.exits.at(0));
  p.retrial_attempt = SparseMatrix::column(model.retrial.exits.at(1));
  p.init_retrial = model.retrial.init;
  p.service_width = model.service_new.phases();
  p.retrial_width = model.retrial.phases();
  return p;
}

SparseMatrix lift(const PhaseLift& what, const LiftPieces& p, Index cap) {
  const int k = what.multiplicity;
  if (k < 0) throw std::invalid_argument("lift: negative multiplicity");
  if (k == 0) return SparseMatrix(1, 1);
  switch (what.kind) {
    case LiftKind::ServiceNew:
      return kron_sum_power(p.service_new, k, cap);
    case LiftKind::ServiceHandoff:
      return kron_sum_power(p.service_handoff, k, cap);
    case LiftKind::Orbit:
      return kron_sum_power(p.retrial, k, cap);
    case LiftKind::OrbitFailedRetry: {
      SparseMatrix restart = kron_product(p.retrial_attempt, SparseMatrix::row(p.init_retrial), cap);
      restart.canonicalize();
      return kron_sum_power(restart, k, cap);
    }
    case LiftKind::ExitNew:
      return slot_sum(p.exit_new, p.service_width, k, cap);
    case LiftKind::ExitHandoff:
      return slot_sum(p.exit_handoff, p.service_width, k, cap);
    case LiftKind::OrbitLeave:
      return slot_sum(p.retrial_leave, p.retrial_width, k, cap);
    case LiftKind::OrbitSuccess: {
      SparseMatrix into = kron_product(p.retrial_attempt, SparseMatrix::row(p.init_new), cap);
      into.canonicalize();
      return slot_sum(into, p.retrial_width, k, cap);
    }
  }
  throw std::invalid_argument("lift: unknown kind");
}

}  // namespace rqbd
