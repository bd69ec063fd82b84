#include <doctest.h>

#include "oracle.hpp"
#include "retrialqbd/solver.hpp"

using namespace rqbd;

namespace {

oracle::ExpModel scalar_retrial() {
  // Single channel, no guard, no failures: the classical M/M/1 retrial queue.
  oracle::ExpModel e;
  e.S = 1;
  e.G = 0;
  e.lambda_h = 0.0;
  e.lambda_n = 0.6;
  e.mu_n = 1.0;
  e.mu_h = 1.0;
  e.theta = 1.5;
  e.leave = 0.2;
  e.lambda_f = 0.0;
  return e;
}

GeneratorOptions aggregated() { return GeneratorOptions{PhaseBackend::Aggregated}; }

/// max |z_lib - z_oracle| after mapping oracle states into the library order.
double compare_with_oracle(const oracle::ExpModel& e, int M) {
  const oracle::Chain chain = oracle::build_chain(e, M);
  const Eigen::RowVectorXd want = oracle::dense_stationary(chain.q);
  const BlockTridiagonalGenerator q = build_generator(e.params(), M, aggregated());
  const RowVector got = solve_stationary(q).flatten();
  double worst = 0.0;
  for (std::size_t s = 0; s < chain.states.size(); ++s)
    worst = std::max(worst, std::abs(want(s) - got(oracle::library_index(q, chain.states[s]))));
  return worst;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("scalar retrial queue matches the dense chain") {
    CHECK(compare_with_oracle(scalar_retrial(), 1) < 1e-12);
    CHECK(compare_with_oracle(scalar_retrial(), 25) < 1e-12);
  }

  TEST_CASE("two channels with failures match the dense chain") {
    oracle::ExpModel e;
    e.S = 2;
    e.G = 1;
    e.lambda_h = 0.5;
    e.lambda_n = 0.8;
    e.mu_h = 1.2;
    e.mu_n = 0.7;
    e.theta = 2.0;
    e.leave = 0.4;
    e.lambda_f = 0.3;
    e.mu_r = 0.9;
    CHECK(compare_with_oracle(e, 12) < 1e-12);
  }

  TEST_CASE("rate matrices follow the backward recursion") {
    const int M = 6;
    const BlockTridiagonalGenerator q = build_generator(scalar_retrial().params(), M, aggregated());
    const RateMatrixFamily r = rate_matrices(q);
    REQUIRE(r.levels() == M);
    // R(M-1) = -Q_{M-1,M} Q_{M,M}^{-1}, R(l-1) = -Q_{l-1,l} (Q_{l,l} + R(l) Q_{l+1,l})^{-1}.
    Matrix next = -Matrix(q.upper[M - 1]) * Matrix(q.diag[M]).inverse();
    CHECK((r.dense(M - 1) - next).cwiseAbs().maxCoeff() < 1e-13);
    for (int l = M - 1; l >= 1; --l) {
      const Matrix u = Matrix(q.diag[l]) + next * Matrix(q.lower[l]);
      next = -Matrix(q.upper[l - 1]) * u.inverse();
      CHECK((r.dense(l - 1) - next).cwiseAbs().maxCoeff() < 1e-13);
    }
    CHECK(r.min_entry() >= -1e-12);
  }

  TEST_CASE("one-level chain") {
    const BlockTridiagonalGenerator q = build_generator(scalar_retrial().params(), 1, aggregated());
    const RateMatrixFamily r = rate_matrices(q);
    REQUIRE(r.levels() == 1);
    const Matrix expect = -Matrix(q.upper[0]) * Matrix(q.diag[1]).inverse();
    CHECK((r.dense(0) - expect).cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("dense oracle solve agrees with the recursion on the baseline") {
    const BlockTridiagonalGenerator q = build_generator(reference_model(), 3, aggregated());
    const StationaryDistribution a = solve_stationary(q), b = dense_oracle_solve(q);
    CHECK((a.flatten() - b.flatten()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(a.total_mass() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(a.residual <= 1e-8);
    CHECK(rate_matrices(q).min_entry() >= -1e-12);
  }

  TEST_CASE("dense oracle rejects large chains") {
    GeneratorOptions o = aggregated();
    const BlockTridiagonalGenerator q = build_generator(reference_model(), 14, o);
    REQUIRE(q.total_dimension() > kDenseOracleCap);
    CHECK_THROWS_AS(dense_oracle_solve(q), SolverError);
  }

  TEST_CASE("no new calls means the orbit stays empty") {
    oracle::ExpModel e = scalar_retrial();
    e.lambda_n = 0.0;
    e.lambda_h = 0.5;
    const TruncationResult t = choose_truncation(e.params(), aggregated(), 1e-8);
    CHECK(t.truncation == 1);
    CHECK(t.tail_mass == 0.0);
    CHECK(t.met);
  }

  TEST_CASE("truncation search on the scalar queue") {
    const ModelParams m = scalar_retrial().params();
    TailCache cache;
    int prev = 0;
    for (double eps : {1e-3, 1e-5, 1e-7, 1e-9}) {
      const TruncationResult t = choose_truncation(m, aggregated(), eps, {}, &cache);
      CHECK(t.met);
      CHECK(t.tail_mass < eps);
      CHECK(t.truncation >= prev);
      CHECK(t.warnings.empty());
      prev = t.truncation;
      // Minimality: one level less misses the tolerance.
      if (t.truncation > 1)
        CHECK(solve_model(m, t.truncation - 1, aggregated()).tail_mass >= eps);
      CHECK(t.distribution.truncation == t.truncation);
    }
    // The tail curve is nonincreasing in M.
    double last = 1.0;
    for (const auto& [M, tail] : cache) {
      CHECK(tail <= last + 1e-12);
      last = tail;
    }
  }

  TEST_CASE("a guess changes cost, not the chosen level") {
    const ModelParams m = scalar_retrial().params();
    const int plain = choose_truncation(m, aggregated(), 1e-6).truncation;
    for (int guess : {1, 3, plain, plain + 7, 60}) {
      TruncationOptions o;
      o.initial = guess;
      CHECK(choose_truncation(m, aggregated(), 1e-6, o).truncation == plain);
    }
  }

  TEST_CASE("truncation cap is reported") {
    TruncationOptions o;
    o.max_truncation = 3;
    const TruncationResult t = choose_truncation(scalar_retrial().params(), aggregated(), 1e-12, o);
    CHECK_FALSE(t.met);
    CHECK(t.truncation == 3);
    CHECK_FALSE(t.warnings.empty());
  }

  TEST_CASE("two-state toy chain") {
    // [[-1, 1], [2, -2]] has stationary vector (2/3, 1/3).
    Matrix q(2, 2);
    q << -1, 1, 2, -2;
    const Eigen::RowVectorXd z = oracle::dense_stationary(q);
    CHECK(z(0) == doctest::Approx(2.0 / 3.0));
    CHECK(z(1) == doctest::Approx(1.0 / 3.0));
  }
}
