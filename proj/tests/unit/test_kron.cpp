#include <doctest.h>

#include <random>

#include "retrialqbd/kron.hpp"

using namespace rqbd;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = u(rng) < -0.3 ? 0.0 : u(rng);
  return m;
}

Matrix dense_kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

TEST_SUITE("kron") {
  TEST_CASE("Kronecker product matches the dense definition") {
    std::mt19937 rng(3);
    for (int t = 0; t < 5; ++t) {
      const Matrix a = random_matrix(2 + t % 2, 3, rng), b = random_matrix(3, 2 + t % 3, rng);
      const Matrix got = kron_product(SparseMatrix::from_dense(a), SparseMatrix::from_dense(b)).dense();
      CHECK((got - dense_kron(a, b)).cwiseAbs().maxCoeff() < 1e-15);
    }
  }

  TEST_CASE("Kronecker sum is A x I + I x B") {
    std::mt19937 rng(5);
    const Matrix a = random_matrix(3, 3, rng), b = random_matrix(2, 2, rng);
    const Matrix expect =
        dense_kron(a, Matrix::Identity(2, 2)) + dense_kron(Matrix::Identity(3, 3), b);
    const Matrix got = kron_sum(SparseMatrix::from_dense(a), SparseMatrix::from_dense(b)).dense();
    CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("Kronecker sum powers") {
    std::mt19937 rng(7);
    const Matrix a = random_matrix(2, 2, rng);
    const SparseMatrix sa = SparseMatrix::from_dense(a);
    CHECK(kron_sum_power(sa, 0).rows() == 1);
    CHECK(kron_sum_power(sa, 0).dense()(0, 0) == 0.0);
    CHECK((kron_sum_power(sa, 1).dense() - a).cwiseAbs().maxCoeff() < 1e-15);
    const Matrix three = kron_sum_power(sa, 3).dense();
    const Matrix i2 = Matrix::Identity(2, 2), i4 = Matrix::Identity(4, 4);
    const Matrix expect = dense_kron(a, i4) + dense_kron(i2, dense_kron(a, i2)) + dense_kron(i4, a);
    CHECK((three - expect).cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("slot sum removes one of k entities") {
    Vector col(2);
    col << 0.3, 0.7;
    const Matrix got = slot_sum(SparseMatrix::column(col), 2, 2).dense();
    const Matrix c = col;
    const Matrix expect = dense_kron(c, Matrix::Identity(2, 2)) + dense_kron(Matrix::Identity(2, 2), c);
    REQUIRE(got.rows() == 4);
    REQUIRE(got.cols() == 2);
    CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("dimension cap") {
    CHECK(checked_power(3, 4) == 81);
    CHECK_THROWS_AS(checked_power(10, 7, 1'000'000), DimensionCapError);
    CHECK_THROWS_AS(checked_power(2, 200), DimensionCapError);
    const SparseMatrix big = SparseMatrix::identity(2000);
    CHECK_THROWS_AS(kron_product(big, big, 1'000'000), DimensionCapError);
  }

  TEST_CASE("canonicalize sums duplicates and drops zeros") {
    SparseMatrix m(2, 2);
    m.add(0, 1, 1.5);
    m.add(0, 1, -1.5);
    m.add(1, 0, 2.0);
    m.add(1, 0, 1.0);
    m.canonicalize();
    CHECK(m.nonzeros() == 1);
    CHECK(m.dense()(1, 0) == 3.0);
  }

  TEST_CASE("service lifts conserve probability flow") {
    // Phi kinds carry phase moves and Psi kinds carry exits; together the
    // rows of a service generator close.
    const ModelParams m = reference_model();
    const LiftPieces p = LiftPieces::from_model(m);
    for (int k = 1; k <= 3; ++k) {
      const Vector internal = lift({LiftKind::ServiceHandoff, k}, p).row_sums();
      const Vector exits = lift({LiftKind::ExitHandoff, k}, p).row_sums();
      CHECK((internal + exits).cwiseAbs().maxCoeff() < 1e-12);
      const SparseMatrix exit = lift({LiftKind::ExitNew, k}, p);
      CHECK(exit.rows() == checked_power(p.service_width, k));
      CHECK(exit.cols() == checked_power(p.service_width, k - 1));
    }
  }
}
