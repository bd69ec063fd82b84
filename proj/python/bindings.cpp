#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "retrialqbd/experiments.hpp"
#include "retrialqbd/generator.hpp"
#include "retrialqbd/measures.hpp"
#include "retrialqbd/optimizer.hpp"
#include "retrialqbd/scenario.hpp"
#include "retrialqbd/simulator.hpp"
#include "retrialqbd/solver.hpp"
#include "retrialqbd/stochastic.hpp"

namespace py = pybind11;
using namespace rqbd;

namespace {

PhaseBackend parse_backend(const std::string& name) {
  if (name == "aggregated") return PhaseBackend::Aggregated;
  if (name == "tracked") return PhaseBackend::Tracked;
  throw py::value_error("backend must be 'aggregated' or 'tracked'");
}

GeneratorOptions options(const std::string& backend, bool strict_blocks) {
  GeneratorOptions o{parse_backend(backend)};
  o.strict_paper_blocks = strict_blocks;
  return o;
}

py::dict report_dict(const MeasureReport& r) {
  py::dict d;
  for (const auto& [name, value] : r.scalars()) d[py::str(name)] = value;
  for (const auto& [name, values] : r.arrays()) d[py::str(name)] = values;
  return d;
}

py::dict solve(const ModelParams& m, double epsilon, std::optional<int> truncation,
               const std::string& backend, bool strict_blocks, bool strict_sums) {
  SolveSettings s;
  s.epsilon = epsilon;
  s.generator = options(backend, strict_blocks);
  s.fixed_truncation = truncation;
  s.measures.strict_paper_sums = strict_sums;
  PointSolution p;
  {
    py::gil_scoped_release release;
    p = solve_point(m, s);
  }
  py::dict d = report_dict(p.report);
  d["met"] = p.truncation.met;
  d["dimension"] = p.dimension;
  d["warnings"] = p.truncation.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "MAP/PH/S retrial cell with guard channels and channel failures";

  py::register_exception<ModelError>(mod, "ModelError", PyExc_ValueError);
  py::register_exception<ScenarioError>(mod, "ScenarioError", PyExc_ValueError);
  py::register_exception<SolverError>(mod, "SolverError", PyExc_RuntimeError);

  py::class_<MapProcess>(mod, "MapProcess")
      .def_readonly("c0", &MapProcess::no_arrival)
      .def_readonly("handoff", &MapProcess::handoff)
      .def_readonly("new", &MapProcess::fresh)
      .def_readonly("stationary", &MapProcess::stationary)
      .def_property_readonly("phases", &MapProcess::phases)
      .def("intensities", [](const MapProcess& m) {
        const ArrivalIntensities a = arrival_intensities(m);
        return py::make_tuple(a.handoff, a.fresh);
      });

  py::class_<PhDistribution>(mod, "PhDistribution")
      .def_readonly("init", &PhDistribution::init)
      .def_readonly("subgen", &PhDistribution::subgen)
      .def_readonly("exits", &PhDistribution::exits)
      .def_property_readonly("phases", &PhDistribution::phases)
      .def_property_readonly("rate", &ph_fundamental_rate);

  py::class_<ModelParams>(mod, "ModelParams")
      .def_readwrite("arrivals", &ModelParams::arrivals)
      .def_readwrite("service_new", &ModelParams::service_new)
      .def_readwrite("service_handoff", &ModelParams::service_handoff)
      .def_readwrite("retrial", &ModelParams::retrial)
      .def_readwrite("channels", &ModelParams::channels)
      .def_readwrite("guard", &ModelParams::guard)
      .def_readwrite("failure_rate", &ModelParams::failure_rate)
      .def_readwrite("repair_rate", &ModelParams::repair_rate)
      .def_property_readonly("theta", &ModelParams::theta)
      .def("validate", [](const ModelParams& m) { validate_model(m); });

  mod.def("reference_model", &reference_model, py::arg("leave_fraction") = 0.5);
  mod.def("validate_map", &validate_map, py::arg("c0"), py::arg("handoff"), py::arg("new"),
          py::arg("tolerance") = kInputRowSumTolerance);
  mod.def("poisson_map", &poisson_map, py::arg("handoff"), py::arg("new"));
  mod.def("service_ph", &make_service_ph, py::arg("init"), py::arg("subgen"));
  mod.def("retrial_ph", &make_retrial_ph_split, py::arg("init"), py::arg("subgen"),
          py::arg("leave_fraction"));
  mod.def("exponential_ph", &exponential_ph, py::arg("rate"));

  mod.def("load_scenario_model", [](const std::string& path) { return load_scenario(path).model; },
          py::arg("path"));
  mod.def("resolved_scenario", [](const std::string& path) { return format_scenario(load_scenario(path)); },
          py::arg("path"));

  mod.def("build_case",
          [](const ModelParams& m, const std::string& c) { return build_case(m, parse_case(c)); },
          py::arg("model"), py::arg("case"));
  mod.def("apply_sweep",
          [](const ModelParams& m, const std::string& v, double value) {
            return apply_sweep(m, parse_sweep_variable(v), value);
          },
          py::arg("model"), py::arg("variable"), py::arg("value"));

  mod.def("generator",
          [](const ModelParams& m, int M, const std::string& backend, bool strict_blocks) {
            return Eigen::SparseMatrix<double, Eigen::RowMajor>(
                build_generator(m, M, options(backend, strict_blocks)).assemble().cast<double>());
          },
          py::arg("model"), py::arg("truncation"), py::arg("backend") = "aggregated",
          py::arg("strict_paper_blocks") = false,
          "Assembled truncated generator as a scipy.sparse CSR matrix.");
  mod.def("level_dimensions",
          [](const ModelParams& m, int M, const std::string& backend) {
            std::vector<Index> dims;
            for (int l = 0; l <= M; ++l)
              dims.push_back(enumerate_level(m, l, options(backend, false)).dimension);
            return dims;
          },
          py::arg("model"), py::arg("truncation"), py::arg("backend") = "aggregated");
  mod.def("stationary",
          [](const ModelParams& m, int M, const std::string& backend) {
            const StationaryDistribution z =
                solve_stationary(build_generator(m, M, options(backend, false)));
            return z.levels;
          },
          py::arg("model"), py::arg("truncation"), py::arg("backend") = "aggregated",
          "Stationary vector of the truncated chain, one array per orbit level.");
  mod.def("choose_truncation",
          [](const ModelParams& m, double epsilon, const std::string& backend) {
            const TruncationResult t = choose_truncation(m, options(backend, false), epsilon);
            return py::make_tuple(t.truncation, t.tail_mass, t.met);
          },
          py::arg("model"), py::arg("epsilon") = 1e-5, py::arg("backend") = "aggregated");
  mod.def("solve", &solve, py::arg("model"), py::arg("epsilon") = 1e-5,
          py::arg("truncation") = std::nullopt, py::arg("backend") = "aggregated",
          py::arg("strict_paper_blocks") = false, py::arg("strict_paper_sums") = false,
          "Measures at the smallest truncation meeting epsilon, or at a fixed one.");

  mod.def("simulate",
          [](const ModelParams& m, double horizon, int replications, std::uint64_t seed, int workers) {
            SimConfig c;
            c.horizon = horizon;
            c.replications = replications;
            c.seed = seed;
            c.workers = workers;
            SimEstimates e;
            {
              py::gil_scoped_release release;
              e = simulate(m, c);
            }
            py::dict d;
            const std::pair<const char*, const SimEstimate*> rows[] = {
                {"EB", &e.eb},         {"ER", &e.er},
                {"EN", &e.en},         {"P_d", &e.p_drop},
                {"P_b", &e.p_block},   {"P_b_immediate", &e.p_block_immediate},
                {"P_c_avail", &e.p_c_avail}, {"lambda_H_out", &e.lambda_h_out},
                {"theta_r_succ", &e.theta_r_succ}};
            for (const auto& [name, est] : rows) d[name] = py::make_tuple(est->mean, est->half_width);
            return d;
          },
          py::arg("model"), py::arg("horizon") = 1e5, py::arg("replications") = 30,
          py::arg("seed") = 20240601, py::arg("workers") = 1,
          "Replication means and 95% half-widths.");

  mod.def("cost",
          [](const ModelParams& base, double lambda, double failure_rate, double mu, double mu_r,
             std::vector<double> weights, double epsilon) {
            if (weights.size() != 4) throw py::value_error("weights must be [c_eb, c_en, c_s, c_r]");
            CostProblem p;
            p.base = with_load(base, lambda, failure_rate);
            p.weights = CostSpec{weights[0], weights[1], weights[2], weights[3]};
            p.epsilon = epsilon;
            const CostValue v = evaluate_cost(p, mu, mu_r);
            return py::make_tuple(v.f, v.eb, v.en);
          },
          py::arg("model"), py::arg("lambda_"), py::arg("failure_rate"), py::arg("mu"),
          py::arg("mu_r"), py::arg("weights") = std::vector<double>{10, 15, 15, 20},
          py::arg("epsilon") = 1e-5, "Cost f(mu, mu_r) with its EB and EN.");

  mod.def("anneal",
          [](const std::function<double(double, double)>& f, double x0, double y0,
             int max_evaluations, std::uint64_t seed) {
            SaConfig c;
            c.x0 = x0;
            c.y0 = y0;
            c.max_evaluations = max_evaluations;
            c.refinement_budget = std::min(c.refinement_budget, max_evaluations / 5);
            c.seed = seed;
            const SaResult r = simulated_annealing(f, c);
            return py::make_tuple(r.x, r.y, r.f);
          },
          py::arg("f"), py::arg("x0") = 1.0, py::arg("y0") = 1.0,
          py::arg("max_evaluations") = 10000, py::arg("seed") = 1,
          "Simulated annealing of a Python function of two nonnegative arguments.");
}
