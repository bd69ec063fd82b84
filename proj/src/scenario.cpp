#include "retrialqbd/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace rqbd {

namespace {

std::string located(const std::string& path, int line, const std::string& field,
                    const std::string& what) {
  std::ostringstream os;
  os << path;
  if (line > 0) os << ':' << line;
  if (!field.empty()) os << ": field '" << field << "'";
  os << ": " << what;
  return os.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(trim(cur));
  return parts;
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Value {
  std::string text;
  int line = 0;
};

class Reader {
 public:
  Reader(std::string path, std::map<std::string, Value> entries)
      : path_(std::move(path)), entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  int line(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ScenarioError(path_, line(key), key, what);
  }

  const std::string& text(const std::string& key) {
    used_.insert(key);
    return entries_.at(key).text;
  }

  double number(const std::string& key) {
    const std::string& t = text(key);
    double v = 0.0;
    if (!parse_double(t, v)) fail(key, "expected a number, got '" + t + "'");
    return v;
  }

  void number(const std::string& key, double& out) {
    if (has(key)) out = number(key);
  }

  long long integer(const std::string& key) {
    const std::string& t = text(key);
    long long v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
      fail(key, "expected an integer, got '" + t + "'");
    return v;
  }

  template <class T>
  void integer(const std::string& key, T& out, long long lo) {
    if (!has(key)) return;
    const long long v = integer(key);
    if (v < lo) fail(key, "must be at least " + std::to_string(lo));
    out = static_cast<T>(v);
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const std::string t = lower(text(key));
    if (t == "true" || t == "yes" || t == "1" || t == "on") {
      out = true;
    } else if (t == "false" || t == "no" || t == "0" || t == "off") {
      out = false;
    } else {
      fail(key, "expected true or false, got '" + t + "'");
    }
  }

  Matrix matrix(const std::string& key) {
    const std::string t = text(key);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']')
      fail(key, "expected a bracketed literal such as [a, b; c, d]");
    const std::string body = trim(t.substr(1, t.size() - 2));
    if (body.empty()) fail(key, "empty literal");
    std::vector<std::vector<double>> rows;
    for (const std::string& row : split(body, ';')) {
      std::vector<double> r;
      for (const std::string& cell : split(row, ',')) {
        double v = 0.0;
        if (!parse_double(cell, v)) fail(key, "bad entry '" + cell + "'");
        r.push_back(v);
      }
      if (!rows.empty() && r.size() != rows.front().size())
        fail(key, "rows have different lengths");
      rows.push_back(std::move(r));
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
  }

  RowVector row_vector(const std::string& key) {
    const Matrix m = matrix(key);
    if (m.rows() != 1) fail(key, "expected a vector [a, b, ...]");
    return m.row(0);
  }

  std::vector<double> list(const std::string& key) {
    const RowVector v = row_vector(key);
    return {v.data(), v.data() + v.size()};
  }

  std::vector<std::string> words(const std::string& key) {
    std::string t = text(key);
    if (!t.empty() && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
    std::vector<std::string> out;
    for (const std::string& w : split(t, ','))
      if (!w.empty()) out.push_back(w);
    if (out.empty()) fail(key, "empty list");
    return out;
  }

  void reject_unused() const {
    for (const auto& [key, value] : entries_)
      if (!used_.count(key)) throw ScenarioError(path_, value.line, key, "unknown key");
  }

  const std::string& path() const { return path_; }

 private:
  static bool parse_double(const std::string& t, double& v) {
    if (t.empty()) return false;
    char* end = nullptr;
    v = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && std::isfinite(v);
  }

  std::string path_;
  std::map<std::string, Value> entries_;
  std::set<std::string> used_;
};

void positive(Reader& r, const std::string& key, double v) {
  if (!(v > 0.0)) r.fail(key, "must be positive");
}

void read_model(Reader& r, ModelParams& m) {
  const auto wrap = [&](const std::string& key, auto&& build) {
    try {
      build();
    } catch (const ModelError& e) {
      r.fail(key, e.what());
    }
  };

  const bool any_map = r.has("map.c0") || r.has("map.handoff") || r.has("map.new");
  if (any_map) {
    for (const char* k : {"map.c0", "map.handoff", "map.new"})
      if (!r.has(k)) r.fail(k, "required when any map.* key is given");
    const Matrix c0 = r.matrix("map.c0");
    const Matrix ch = r.matrix("map.handoff");
    const Matrix cn = r.matrix("map.new");
    wrap("map.c0", [&] { m.arrivals = validate_map(c0, ch, cn); });
  }

  for (const std::string cls : {"new", "handoff"}) {
    const std::string ki = "service." + cls + ".init";
    const std::string ks = "service." + cls + ".subgen";
    if (!r.has(ki) && !r.has(ks)) continue;
    if (!r.has(ki) || !r.has(ks)) r.fail(r.has(ki) ? ks : ki, "init and subgen go together");
    const RowVector init = r.row_vector(ki);
    const Matrix sub = r.matrix(ks);
    PhDistribution& d = cls == "new" ? m.service_new : m.service_handoff;
    wrap(ks, [&] { d = make_service_ph(init, sub); });
  }

  const bool any_retrial = r.has("retrial.init") || r.has("retrial.subgen") ||
                           r.has("retrial.leave") || r.has("retrial.attempt") ||
                           r.has("retrial.leave_fraction");
  if (any_retrial) {
    if (r.has("retrial.init") != r.has("retrial.subgen"))
      r.fail(r.has("retrial.init") ? "retrial.subgen" : "retrial.init",
             "init and subgen go together");
    const RowVector init = r.has("retrial.init") ? r.row_vector("retrial.init") : m.retrial.init;
    const Matrix sub = r.has("retrial.subgen") ? r.matrix("retrial.subgen") : m.retrial.subgen;
    const bool exits = r.has("retrial.leave") || r.has("retrial.attempt");
    if (exits && r.has("retrial.leave_fraction"))
      r.fail("retrial.leave_fraction", "give either leave_fraction or leave and attempt");
    if (exits) {
      if (!r.has("retrial.leave") || !r.has("retrial.attempt"))
        r.fail(r.has("retrial.leave") ? "retrial.attempt" : "retrial.leave",
               "leave and attempt go together");
      const RowVector leave = r.row_vector("retrial.leave");
      const RowVector attempt = r.row_vector("retrial.attempt");
      wrap("retrial.subgen", [&] {
        m.retrial = make_retrial_ph(init, sub, leave.transpose(), attempt.transpose());
      });
    } else {
      double p = leave_probability(m.retrial);
      if (r.has("retrial.leave_fraction")) {
        p = r.number("retrial.leave_fraction");
        if (!(p >= 0.0 && p <= 1.0)) r.fail("retrial.leave_fraction", "must lie in [0, 1]");
      } else if (m.retrial.phases() != sub.rows()) {
        r.fail("retrial.subgen", "a new retrial PH needs leave_fraction or leave and attempt");
      }
      wrap("retrial.subgen", [&] { m.retrial = make_retrial_ph_split(init, sub, p); });
    }
  }

  r.integer("channels", m.channels, 1);
  r.integer("guard", m.guard, 0);
  if (m.guard >= m.channels) {
    const std::string key = r.has("guard") ? "guard" : "channels";
    r.fail(key, "guard channels G = " + std::to_string(m.guard) +
                    " must be smaller than channels S = " + std::to_string(m.channels));
  }
  r.number("failure_rate", m.failure_rate);
  if (!(m.failure_rate >= 0.0)) r.fail("failure_rate", "must be nonnegative");
  r.number("repair_rate", m.repair_rate);
  if (r.has("repair_rate")) positive(r, "repair_rate", m.repair_rate);
  try {
    validate_model(m);
  } catch (const ModelError& e) {
    throw ScenarioError(r.path(), 0, "model", e.what());
  }
}

void read_solver(Reader& r, Scenario& s) {
  r.number("solver.epsilon", s.epsilon);
  if (r.has("solver.epsilon")) positive(r, "solver.epsilon", s.epsilon);
  if (r.has("solver.backend")) {
    const std::string b = lower(r.text("solver.backend"));
    if (b == "aggregated") {
      s.generator.backend = PhaseBackend::Aggregated;
    } else if (b == "tracked") {
      s.generator.backend = PhaseBackend::Tracked;
    } else {
      r.fail("solver.backend", "expected aggregated or tracked, got '" + b + "'");
    }
  }
  r.boolean("solver.strict_paper_blocks", s.generator.strict_paper_blocks);
  r.boolean("solver.strict_paper_sums", s.measures.strict_paper_sums);
  r.integer("solver.dimension_cap", s.generator.dimension_cap, 1);
  if (r.has("solver.truncation")) {
    int m = 0;
    r.integer("solver.truncation", m, 1);
    s.fixed_truncation = m;
  }
  r.integer("solver.initial_truncation", s.truncation.initial, 1);
  r.integer("solver.max_truncation", s.truncation.max_truncation, 1);
  r.number("solver.residual_tolerance", s.truncation.solver.residual_tolerance);
}

void read_sweep(Reader& r, Scenario& s) {
  const bool any = r.has("sweep.variable") || r.has("sweep.values") || r.has("sweep.from") ||
                   r.has("sweep.to") || r.has("sweep.points");
  if (!any) return;
  if (!r.has("sweep.variable")) r.fail("sweep.variable", "required for a sweep");
  SweepSpec sw;
  try {
    sw.variable = parse_sweep_variable(r.text("sweep.variable"));
  } catch (const std::invalid_argument& e) {
    r.fail("sweep.variable", e.what());
  }
  const bool range = r.has("sweep.from") || r.has("sweep.to") || r.has("sweep.points");
  if (r.has("sweep.values") == range)
    r.fail("sweep.values", "give either sweep.values or sweep.from, sweep.to and sweep.points");
  if (range) {
    for (const char* k : {"sweep.from", "sweep.to", "sweep.points"})
      if (!r.has(k)) r.fail(k, "required for a range sweep");
    const double from = r.number("sweep.from");
    const double to = r.number("sweep.to");
    int points = 0;
    r.integer("sweep.points", points, 1);
    for (int i = 0; i < points; ++i)
      sw.values.push_back(points == 1 ? from : from + (to - from) * i / (points - 1));
  } else {
    sw.values = r.list("sweep.values");
  }
  const std::string key = range ? "sweep.from" : "sweep.values";
  for (double v : sw.values) {
    const bool ok = sw.variable == SweepVariable::LambdaF ? v >= 0.0 : v > 0.0;
    if (!ok) r.fail(key, "value " + num(v) + " is outside the variable's domain");
  }
  s.sweep = sw;
}

void read_simulate(Reader& r, Scenario& s) {
  SimConfig& c = s.simulate.config;
  r.number("simulate.horizon", c.horizon);
  if (r.has("simulate.horizon")) positive(r, "simulate.horizon", c.horizon);
  r.number("simulate.warmup", c.warmup);
  if (c.warmup >= 0.0 && c.warmup >= c.horizon)
    r.fail("simulate.warmup", "must be shorter than the horizon");
  r.integer("simulate.replications", c.replications, 2);
  r.integer("simulate.seed", c.seed, 0);
  r.boolean("simulate.compare", s.simulate.compare);
}

void read_optimize(Reader& r, Scenario& s) {
  OptimizeSpec& o = s.optimize;
  SaConfig& sa = o.sa;
  r.number("optimize.lambda", o.lambda);
  if (r.has("optimize.lambda")) positive(r, "optimize.lambda", o.lambda);
  r.number("optimize.failure_rate", o.failure_rate);
  if (!(o.failure_rate >= 0.0)) r.fail("optimize.failure_rate", "must be nonnegative");
  if (r.has("optimize.weights")) {
    const std::vector<double> w = r.list("optimize.weights");
    if (w.size() != 4) r.fail("optimize.weights", "expected [c_eb, c_en, c_s, c_r]");
    o.weights = CostSpec{w[0], w[1], w[2], w[3]};
    try {
      o.weights.validate();
    } catch (const std::invalid_argument& e) {
      r.fail("optimize.weights", e.what());
    }
  }
  if (r.has("optimize.split")) {
    const std::string t = lower(r.text("optimize.split"));
    if (t == "nominal") {
      o.split = ServiceSplit::Nominal;
    } else if (t == "computed") {
      o.split = ServiceSplit::Computed;
    } else {
      r.fail("optimize.split", "expected nominal or computed, got '" + t + "'");
    }
  }
  r.number("optimize.nominal_ratio", o.nominal_ratio);
  if (r.has("optimize.nominal_ratio")) positive(r, "optimize.nominal_ratio", o.nominal_ratio);
  r.number("optimize.x0", sa.x0);
  r.number("optimize.y0", sa.y0);
  r.number("optimize.step_scale", sa.step_scale);
  r.number("optimize.step_floor", sa.step_floor);
  r.boolean("optimize.adapt_steps", sa.adapt_steps);
  r.boolean("optimize.refinement", sa.final_refinement);
  r.number("optimize.refinement_tolerance", sa.refinement_tolerance);
  r.integer("optimize.refinement_budget", sa.refinement_budget, 0);
  r.number("optimize.initial_temperature", sa.initial_temperature);
  r.integer("optimize.pilot_samples", sa.pilot_samples, 1);
  r.number("optimize.cooling", sa.cooling);
  r.integer("optimize.cooling_interval", sa.cooling_interval, 1);
  r.number("optimize.stop_threshold", sa.stop_threshold);
  r.integer("optimize.patience", sa.patience, 1);
  r.integer("optimize.max_evaluations", sa.max_evaluations, 1);
  r.integer("optimize.seed", sa.seed, 0);
  if (r.has("optimize.box")) {
    const std::vector<double> b = r.list("optimize.box");
    if (b.size() != 4) r.fail("optimize.box", "expected [mu_lo, mu_hi, mu_r_lo, mu_r_hi]");
    sa.box = Box{b[0], b[1], b[2], b[3]};
    try {
      sa.box->validate();
    } catch (const std::invalid_argument& e) {
      r.fail("optimize.box", e.what());
    }
    if (!(b[0] > 0.0 && b[2] > 0.0)) r.fail("optimize.box", "lower bounds must be positive");
  }
  try {
    sa.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(r.path(), 0, "optimize", e.what());
  }
  r.integer("optimize.grid_points", o.grid_points, 0);
  if (o.grid_points == 1) r.fail("optimize.grid_points", "needs at least 2 points per axis");
  if (o.grid_points > 0 && !sa.box) r.fail("optimize.grid_points", "the grid needs optimize.box");
  if (r.has("optimize.table.lambdas") != r.has("optimize.table.failure_rates"))
    r.fail("optimize.table.lambdas", "table lambdas and failure rates go together");
  if (r.has("optimize.table.lambdas")) {
    o.table_lambdas = r.list("optimize.table.lambdas");
    o.table_failure_rates = r.list("optimize.table.failure_rates");
    for (double v : o.table_lambdas)
      if (!(v > 0.0)) r.fail("optimize.table.lambdas", "must be positive");
    for (double v : o.table_failure_rates)
      if (!(v >= 0.0)) r.fail("optimize.table.failure_rates", "must be nonnegative");
  }
  if (r.has("optimize.reference")) {
    const Matrix ref = r.matrix("optimize.reference");
    if (ref.cols() != 5)
      r.fail("optimize.reference", "rows must be [lambda, failure_rate, mu, mu_r, f]");
    for (Index i = 0; i < ref.rows(); ++i)
      o.reference.push_back({ref(i, 0), ref(i, 1), ref(i, 2), ref(i, 3), ref(i, 4)});
  }
}

}  // namespace

ScenarioError::ScenarioError(const std::string& path_, int line_, const std::string& field_,
                             const std::string& what)
    : std::runtime_error(located(path_, line_, field_, what)),
      path(path_),
      line(line_),
      field(field_) {}

std::string case_name(CaseId c) {
  static const char* names[] = {"I", "II", "III", "IV", "V"};
  return names[static_cast<int>(c) - 1];
}

CaseId parse_case(const std::string& text) {
  const std::string t = lower(trim(text));
  static const std::pair<const char*, CaseId> table[] = {
      {"i", CaseId::I},   {"ii", CaseId::II}, {"iii", CaseId::III}, {"iv", CaseId::IV},
      {"v", CaseId::V},   {"1", CaseId::I},   {"2", CaseId::II},    {"3", CaseId::III},
      {"4", CaseId::IV},  {"5", CaseId::V}};
  for (const auto& [name, id] : table)
    if (t == name) return id;
  throw std::invalid_argument("unknown case '" + text + "' (expected I..V)");
}

std::string sweep_variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::LambdaHScale: return "lambda_h_scale";
    case SweepVariable::MuN: return "mu_n";
    case SweepVariable::MuH: return "mu_h";
    case SweepVariable::Theta: return "theta";
    case SweepVariable::LambdaF: return "lambda_f";
    case SweepVariable::MuR: return "mu_r";
  }
  return "?";
}

SweepVariable parse_sweep_variable(const std::string& text) {
  const std::string t = lower(trim(text));
  for (SweepVariable v : {SweepVariable::LambdaHScale, SweepVariable::MuN, SweepVariable::MuH,
                          SweepVariable::Theta, SweepVariable::LambdaF, SweepVariable::MuR})
    if (t == sweep_variable_name(v)) return v;
  throw std::invalid_argument("unknown sweep variable '" + text +
                              "' (expected lambda_h_scale, mu_n, mu_h, theta, lambda_f or mu_r)");
}

Scenario parse_scenario(std::istream& in, const std::string& path) {
  std::map<std::string, Value> entries;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ScenarioError(path, line_no, "", "expected 'key = value'");
    const std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    const int first_line = line_no;
    // An open bracket continues the value on the following lines.
    const auto open = [](const std::string& v) {
      return std::count(v.begin(), v.end(), '[') > std::count(v.begin(), v.end(), ']');
    };
    while (open(value) && std::getline(in, raw)) {
      ++line_no;
      const auto h = raw.find('#');
      value += " " + trim(h == std::string::npos ? raw : raw.substr(0, h));
    }
    if (key.empty()) throw ScenarioError(path, line_no, "", "missing key");
    if (value.empty()) throw ScenarioError(path, line_no, key, "missing value");
    const auto [it, inserted] = entries.emplace(key, Value{value, first_line});
    if (!inserted)
      throw ScenarioError(path, first_line, key,
                          "duplicate key (first set on line " + std::to_string(it->second.line) +
                              ")");
  }

  Reader r(path, std::move(entries));
  Scenario s;
  s.source = path;
  s.model = reference_model(0.5);
  if (r.has("name")) s.name = r.text("name");
  if (r.has("out")) s.out = r.text("out");
  read_model(r, s.model);
  read_solver(r, s);
  read_sweep(r, s);
  if (r.has("cases")) {
    s.cases.clear();
    for (const std::string& w : r.words("cases")) {
      try {
        s.cases.push_back(parse_case(w));
      } catch (const std::invalid_argument& e) {
        r.fail("cases", e.what());
      }
    }
  }
  read_simulate(r, s);
  read_optimize(r, s);
  r.reject_unused();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path, 0, "", "cannot open scenario file");
  return parse_scenario(in, path);
}

std::string format_matrix(const Matrix& m) {
  std::string out = "[";
  for (Index i = 0; i < m.rows(); ++i) {
    if (i) out += "; ";
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ", ";
      out += num(m(i, j));
    }
  }
  return out + "]";
}

std::string format_vector(const Eigen::Ref<const RowVector>& v) { return format_matrix(v); }

std::string format_scenario(const Scenario& s) {
  std::ostringstream os;
  const auto kv = [&](const std::string& k, const std::string& v) { os << k << " = " << v << '\n'; };
  const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  const ModelParams& m = s.model;

  kv("name", s.name);
  kv("out", s.out);
  os << "\n# model\n";
  kv("channels", std::to_string(m.channels));
  kv("guard", std::to_string(m.guard));
  kv("failure_rate", num(m.failure_rate));
  kv("repair_rate", num(m.repair_rate));
  kv("map.c0", format_matrix(m.arrivals.no_arrival));
  kv("map.handoff", format_matrix(m.arrivals.handoff));
  kv("map.new", format_matrix(m.arrivals.fresh));
  kv("service.new.init", format_vector(m.service_new.init));
  kv("service.new.subgen", format_matrix(m.service_new.subgen));
  kv("service.handoff.init", format_vector(m.service_handoff.init));
  kv("service.handoff.subgen", format_matrix(m.service_handoff.subgen));
  kv("retrial.init", format_vector(m.retrial.init));
  kv("retrial.subgen", format_matrix(m.retrial.subgen));
  kv("retrial.leave", format_vector(m.retrial.exits[0].transpose()));
  kv("retrial.attempt", format_vector(m.retrial.exits[1].transpose()));

  os << "\n# solver\n";
  kv("solver.epsilon", num(s.epsilon));
  kv("solver.backend", s.generator.backend == PhaseBackend::Aggregated ? "aggregated" : "tracked");
  kv("solver.strict_paper_blocks", b(s.generator.strict_paper_blocks));
  kv("solver.strict_paper_sums", b(s.measures.strict_paper_sums));
  kv("solver.dimension_cap", std::to_string(s.generator.dimension_cap));
  if (s.fixed_truncation) kv("solver.truncation", std::to_string(*s.fixed_truncation));
  kv("solver.initial_truncation", std::to_string(s.truncation.initial));
  kv("solver.max_truncation", std::to_string(s.truncation.max_truncation));
  kv("solver.residual_tolerance", num(s.truncation.solver.residual_tolerance));

  os << "\n# experiments\n";
  if (s.sweep) {
    kv("sweep.variable", sweep_variable_name(s.sweep->variable));
    kv("sweep.values", format_vector(Eigen::Map<const RowVector>(
                           s.sweep->values.data(), static_cast<Index>(s.sweep->values.size()))));
  }
  std::string cases;
  for (CaseId c : s.cases) cases += (cases.empty() ? "" : ", ") + case_name(c);
  kv("cases", cases);

  const SimConfig& c = s.simulate.config;
  kv("simulate.horizon", num(c.horizon));
  kv("simulate.warmup", num(c.warmup));
  kv("simulate.replications", std::to_string(c.replications));
  kv("simulate.seed", std::to_string(c.seed));
  kv("simulate.compare", b(s.simulate.compare));

  const OptimizeSpec& o = s.optimize;
  const SaConfig& sa = o.sa;
  kv("optimize.lambda", num(o.lambda));
  kv("optimize.failure_rate", num(o.failure_rate));
  kv("optimize.weights", "[" + num(o.weights.c_eb) + ", " + num(o.weights.c_en) + ", " +
                             num(o.weights.c_s) + ", " + num(o.weights.c_r) + "]");
  kv("optimize.split", o.split == ServiceSplit::Nominal ? "nominal" : "computed");
  kv("optimize.nominal_ratio", num(o.nominal_ratio));
  kv("optimize.x0", num(sa.x0));
  kv("optimize.y0", num(sa.y0));
  kv("optimize.step_scale", num(sa.step_scale));
  kv("optimize.step_floor", num(sa.step_floor));
  kv("optimize.adapt_steps", b(sa.adapt_steps));
  kv("optimize.refinement", b(sa.final_refinement));
  kv("optimize.refinement_tolerance", num(sa.refinement_tolerance));
  kv("optimize.refinement_budget", std::to_string(sa.refinement_budget));
  kv("optimize.initial_temperature", num(sa.initial_temperature));
  kv("optimize.pilot_samples", std::to_string(sa.pilot_samples));
  kv("optimize.cooling", num(sa.cooling));
  kv("optimize.cooling_interval", std::to_string(sa.cooling_interval));
  kv("optimize.stop_threshold", num(sa.stop_threshold));
  kv("optimize.patience", std::to_string(sa.patience));
  kv("optimize.max_evaluations", std::to_string(sa.max_evaluations));
  kv("optimize.seed", std::to_string(sa.seed));
  if (sa.box)
    kv("optimize.box", "[" + num(sa.box->x_lo) + ", " + num(sa.box->x_hi) + ", " +
                           num(sa.box->y_lo) + ", " + num(sa.box->y_hi) + "]");
  kv("optimize.grid_points", std::to_string(o.grid_points));
  if (!o.table_lambdas.empty()) {
    const auto list = [](const std::vector<double>& v) {
      std::string t = "[";
      for (std::size_t i = 0; i < v.size(); ++i) t += (i ? ", " : "") + num(v[i]);
      return t + "]";
    };
    kv("optimize.table.lambdas", list(o.table_lambdas));
    kv("optimize.table.failure_rates", list(o.table_failure_rates));
  }
  if (!o.reference.empty()) {
    Matrix ref(o.reference.size(), 5);
    for (std::size_t i = 0; i < o.reference.size(); ++i) {
      const ReferenceOptimum& p = o.reference[i];
      ref.row(i) << p.lambda, p.failure_rate, p.mu, p.mu_r, p.f;
    }
    kv("optimize.reference", format_matrix(ref));
  }
  return os.str();
}

}  // namespace rqbd
