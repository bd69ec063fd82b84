#include <doctest.h>

#include <sstream>

#include "retrialqbd/experiments.hpp"
#include "retrialqbd/scenario.hpp"

using namespace rqbd;

namespace {

const std::string kDir = RQBD_SCENARIO_DIR;

Scenario parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in, "test.scn");
}

ScenarioError parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ScenarioError& e) {
    return e;
  }
  FAIL("expected a ScenarioError");
  return ScenarioError("", 0, "", "");
}

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("baseline file") {
    const Scenario s = load_scenario(kDir + "/baseline.scn");
    CHECK(s.name == "baseline");
    CHECK(s.model.channels == 5);
    CHECK(s.model.guard == 3);
    CHECK(s.model.failure_rate == 0.5);
    CHECK(s.model.repair_rate == 1.0);
    CHECK(s.model.arrivals.phases() == 2);
    CHECK(s.epsilon == 1e-5);
    CHECK(s.cases.size() == 5);
    CHECK(s.simulate.config.replications == 30);
    CHECK(s.simulate.config.horizon == 1e5);
    CHECK(leave_probability(s.model.retrial) == doctest::Approx(0.5));
    // Mean of the retrial PH: from phase 1, 1/2 + 1/2; from phase 2, 1/2.
    CHECK(s.model.theta() == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("resolved text parses back to the same scenario") {
    const Scenario a = load_scenario(kDir + "/baseline.scn");
    const std::string text = format_scenario(a);
    const Scenario b = parse(text);
    CHECK(format_scenario(b) == text);
    CHECK((a.model.arrivals.no_arrival - b.model.arrivals.no_arrival).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.model.retrial.subgen - b.model.retrial.subgen).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.model.retrial.exits[0] - b.model.retrial.exits[0]).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("defaults fill unset keys") {
    const Scenario s = parse("channels = 3\nguard = 1\n");
    CHECK(s.model.channels == 3);
    CHECK(s.model.guard == 1);
    CHECK(s.model.failure_rate == reference_model().failure_rate);
    CHECK(s.cases.size() == 1);
    CHECK_FALSE(s.sweep.has_value());
  }

  TEST_CASE("guard not below channels names the field and line") {
    const ScenarioError e = parse_error("channels = 2\nguard = 2\n");
    CHECK(e.field == "guard");
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find("guard") != std::string::npos);
  }

  TEST_CASE("unknown and duplicate keys") {
    CHECK(parse_error("chanels = 2\n").field == "chanels");
    const ScenarioError d = parse_error("channels = 2\n\nchannels = 3\n");
    CHECK(d.field == "channels");
    CHECK(d.line == 3);
  }

  TEST_CASE("malformed values") {
    CHECK(parse_error("map.c0 = [1, 2; 3]\nmap.handoff = [1]\nmap.new = [1]\n").field == "map.c0");
    CHECK(parse_error("failure_rate = fast\n").field == "failure_rate");
    CHECK(parse_error("failure_rate = -1\n").field == "failure_rate");
    CHECK(parse_error("map.c0 = [-1]\n").field.rfind("map", 0) == 0);
    CHECK(parse_error("sweep.variable = mu_x\nsweep.values = [1, 2]\n").field == "sweep.variable");
    CHECK(parse_error("cases = I, VI\n").field == "cases");
    CHECK(parse_error("solver.backend = sparse\n").field == "solver.backend");
    CHECK(parse_error("optimize.grid_points = 10\n").field == "optimize.grid_points");
  }

  TEST_CASE("sweep ranges") {
    const Scenario s = parse("sweep.variable = lambda_f\nsweep.from = 0\nsweep.to = 1\nsweep.points = 5\n");
    REQUIRE(s.sweep.has_value());
    CHECK(s.sweep->variable == SweepVariable::LambdaF);
    REQUIRE(s.sweep->values.size() == 5);
    CHECK(s.sweep->values[2] == doctest::Approx(0.5));
    CHECK(s.sweep->values[4] == 1.0);
  }

  TEST_CASE("every shipped scenario loads") {
    for (const char* f : {"sweep_mu_n", "sweep_mu_h", "sweep_lambda_h_scale", "sweep_lambda_f",
                          "sweep_mu_r", "sweep_theta"}) {
      const Scenario s = load_scenario(kDir + "/" + f + ".scn");
      REQUIRE(s.sweep.has_value());
      CHECK(s.sweep->values.size() >= 6);
    }
  }

  TEST_CASE("bracketed values continue over lines") {
    const Scenario s = parse("optimize.reference = [\n  0.5, 10, 4, 2.5, 122;  # first\n  2, 6, 4, 2.5, 147\n]\nchannels = 2\nguard = 1\n");
    REQUIRE(s.optimize.reference.size() == 2);
    CHECK(s.optimize.reference[1].f == 147.0);
  }

  TEST_CASE("case names") {
    CHECK(parse_case("iv") == CaseId::IV);
    CHECK(parse_case("2") == CaseId::II);
    CHECK(case_name(CaseId::V) == "V");
    CHECK_THROWS(parse_case("VI"));
    CHECK(parse_sweep_variable("mu_r") == SweepVariable::MuR);
    CHECK(sweep_variable_name(SweepVariable::LambdaHScale) == "lambda_h_scale");
  }
}
