#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "retrialqbd/experiments.hpp"

using namespace rqbd;

namespace {

SolveSettings light_settings() {
  SolveSettings s;
  s.epsilon = 1e-3;
  return s;
}

ModelParams small_model() {
  ModelParams m = reference_model();
  m.channels = 3;
  m.guard = 1;
  return m;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("Case V of the reference cell") {
    const ModelParams v = build_case(reference_model(), CaseId::V);
    CHECK(v.arrivals.phases() == 1);
    CHECK(v.service_new.phases() == 1);
    CHECK(v.service_handoff.phases() == 1);
    CHECK(v.retrial.phases() == 1);
    const ArrivalIntensities a = arrival_intensities(v.arrivals);
    CHECK(a.handoff == doctest::Approx(1.0).epsilon(0.01));
    CHECK(a.fresh == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::abs(ph_fundamental_rate(v.service_new) - 1.0) < 1e-9);
    CHECK(std::abs(v.theta() - 4.0 / 3.0) < 1e-9);
    CHECK(leave_probability(v.retrial) == doctest::Approx(0.5));
  }

  TEST_CASE("intermediate cases") {
    const ModelParams base = reference_model(0.3);
    const ModelParams one = build_case(base, CaseId::I);
    CHECK((one.arrivals.no_arrival - base.arrivals.no_arrival).cwiseAbs().maxCoeff() == 0.0);
    CHECK((one.retrial.subgen - base.retrial.subgen).cwiseAbs().maxCoeff() == 0.0);

    const ModelParams two = build_case(base, CaseId::II);
    CHECK(two.retrial.phases() == 1);
    CHECK(two.service_new.phases() == base.service_new.phases());
    CHECK(leave_probability(two.retrial) == doctest::Approx(leave_probability(base.retrial)));
    CHECK(two.theta() == doctest::Approx(base.theta()));

    const ModelParams three = build_case(base, CaseId::III);
    CHECK(three.service_handoff.phases() == 1);
    CHECK(ph_fundamental_rate(three.service_handoff) ==
          doctest::Approx(ph_fundamental_rate(base.service_handoff)));
    CHECK(three.arrivals.phases() == base.arrivals.phases());

    const ModelParams four = build_case(base, CaseId::IV);
    CHECK(four.arrivals.phases() == 1);
    CHECK(four.service_new.phases() == 1);
    CHECK(four.retrial.phases() == base.retrial.phases());
  }

  TEST_CASE("sweep variables set the intended intensity") {
    const ModelParams base = reference_model();
    const double h = arrival_intensities(base.arrivals).handoff;
    const double n = arrival_intensities(base.arrivals).fresh;
    const ArrivalIntensities a =
        arrival_intensities(apply_sweep(base, SweepVariable::LambdaHScale, 0.5).arrivals);
    CHECK(a.handoff == doctest::Approx(0.5 * h));
    CHECK(a.fresh == doctest::Approx(n));
    CHECK(ph_fundamental_rate(apply_sweep(base, SweepVariable::MuN, 1.7).service_new) ==
          doctest::Approx(1.7));
    CHECK(ph_fundamental_rate(apply_sweep(base, SweepVariable::MuH, 0.9).service_handoff) ==
          doctest::Approx(0.9));
    const ModelParams t = apply_sweep(base, SweepVariable::Theta, 2.5);
    CHECK(t.theta() == doctest::Approx(2.5));
    CHECK(leave_probability(t.retrial) == doctest::Approx(leave_probability(base.retrial)));
    CHECK(apply_sweep(base, SweepVariable::LambdaF, 0.0).failure_rate == 0.0);
    CHECK(apply_sweep(base, SweepVariable::MuR, 3.0).repair_rate == 3.0);
  }

  TEST_CASE("sweep rows equal single solves") {
    const ModelParams base = small_model();
    const SolveSettings s = light_settings();
    const SweepSpec sw{SweepVariable::MuN, {1.0, 1.5}};
    const std::vector<SweepRow> rows = run_sweep(base, sw, {CaseId::I, CaseId::V}, s, 2);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].case_id == CaseId::I);
    CHECK(rows[3].case_id == CaseId::V);
    CHECK(rows[3].value == 1.5);
    const PointSolution p =
        solve_point(build_case(apply_sweep(base, SweepVariable::MuN, 1.5), CaseId::V), s);
    CHECK(rows[3].truncation == p.truncation.truncation);
    CHECK(rows[3].report.eb == doctest::Approx(p.report.eb).epsilon(1e-12));
    CHECK(rows[3].met);
    const auto commas = [](const std::string& x) { return std::count(x.begin(), x.end(), ','); };
    CHECK(commas(sweep_csv_row(sw.variable, rows[0])) == commas(sweep_csv_header()));
  }

  TEST_CASE("fixed truncation is honoured") {
    SolveSettings s = light_settings();
    s.fixed_truncation = 2;
    const PointSolution p = solve_point(small_model(), s);
    CHECK(p.truncation.truncation == 2);
    CHECK(p.report.truncation == 2);
    CHECK(p.row_sum_residual < 1e-9);
  }

  TEST_CASE("worker pool covers every index and rethrows") {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                   if (i == 7) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
    int serial = 0;
    parallel_for(5, 1, [&](std::size_t) { ++serial; });
    CHECK(serial == 5);
  }

  TEST_CASE("simulation comparison rows") {
    const ModelParams m = small_model();
    const PointSolution p = solve_point(m, light_settings());
    SimConfig c;
    c.horizon = 500;
    c.replications = 3;
    const std::vector<SimComparison> rows = compare_simulation(p.report, simulate(m, c));
    CHECK(rows.size() == 9);
    CHECK(rows.front().measure == "EB");
  }
}
