#include "retrialqbd/measures.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace rqbd {

namespace {

// Highest level included in the sums.
int last_level(int truncation, const MeasureOptions& o) {
  return o.strict_paper_sums ? truncation - 1 : truncation;
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v == 0.0 ? 0.0 : v);
  return buf;
}

std::vector<CellTotals> cell_totals(const BlockTridiagonalGenerator& q,
                                    const StationaryDistribution& z) {
  if (static_cast<int>(z.levels.size()) != q.truncation + 1)
    throw std::invalid_argument("cell_totals: distribution does not match generator");
  const ModelParams& m = q.model;
  std::vector<CellTotals> out;
  for (int l = 0; l <= q.truncation; ++l) {
    const LevelLayout& lay = q.layouts[l];
    for (std::size_t ci = 0; ci < lay.cells.size(); ++ci) {
      const Cell& c = lay.cells[ci];
      const auto seg = z.levels[l].segment(lay.offset[ci], lay.block_size[ci]);
      const CellRates r = cell_rates(m, q.options, l, c);
      CellTotals t;
      t.level = l;
      t.cell = c;
      t.mass = seg.sum();
      t.handoff_arrival = seg.dot(r.handoff_arrival.transpose());
      t.new_arrival = seg.dot(r.new_arrival.transpose());
      t.handoff_exit = seg.dot(r.handoff_exit.transpose());
      t.new_exit = seg.dot(r.new_exit.transpose());
      t.orbit_leave = seg.dot(r.orbit_leave.transpose());
      t.orbit_attempt = seg.dot(r.orbit_attempt.transpose());
      t.failure_multiplier =
          policy::failure_multiplier(c, m.channels, m.guard, q.options.strict_paper_blocks);
      t.retrial_succeeds =
          policy::retrial_succeeds(c, m.channels, m.guard, q.options.strict_paper_blocks);
      out.push_back(t);
    }
  }
  return out;
}

void occupancy_measures(const std::vector<CellTotals>& cells, const ModelParams& model, int truncation,
                        const MeasureOptions& options, MeasureReport& out) {
  const int S = model.channels;
  const int top = last_level(truncation, options);
  out.p_new.assign(S - model.guard + 1, 0.0);
  out.p_handoff.assign(S + 1, 0.0);
  out.p_failed.assign(S + 1, 0.0);
  out.eb = out.en = out.ec = out.p_c_avail = 0.0;
  for (const auto& t : cells) {
    if (t.level > top) continue;
    const Cell& c = t.cell;
    if (c.busy >= 1) {
      out.p_new[c.fresh] += t.mass;
      out.p_handoff[c.handoff()] += t.mass;
      out.p_c_avail += t.mass;
    }
    out.p_failed[c.failed] += t.mass;
    out.en += c.failed * t.mass;
    out.ec += (t.level + c.busy) * t.mass;
  }
  for (std::size_t j = 0; j < out.p_new.size(); ++j) out.eb += j * out.p_new[j];
  for (std::size_t j = 1; j < out.p_handoff.size(); ++j) out.eb += j * out.p_handoff[j];
  out.p_loss_c_failure = 0.0;
  for (int i = 1; i <= S; ++i) out.p_loss_c_failure += out.p_failed[i];
}

void orbit_measures(const std::vector<CellTotals>& cells, const ModelParams& model, int truncation,
                    const MeasureOptions& options, MeasureReport& out) {
  const int S = model.channels;
  const int G = model.guard;
  const int top = last_level(truncation, options);
  out.p_orbit.assign(truncation + 1, 0.0);
  out.er = out.abandon_flux = out.retrial_success_flux = out.orbit_join_flux = 0.0;
  for (const auto& t : cells) {
    out.p_orbit[t.level] += t.mass;
    // Joining flux is counted where a transition to level + 1 exists.
    if (t.level < truncation && policy::new_joins_orbit(t.cell, S, G)) out.orbit_join_flux += t.new_arrival;
    if (t.level > top) continue;
    out.er += t.level * t.mass;
    out.abandon_flux += t.orbit_leave;
    const bool counted = options.strict_paper_sums ? t.cell.busy >= 1 : t.retrial_succeeds;
    if (counted) out.retrial_success_flux += t.orbit_attempt;
  }
  out.theta = ph_fundamental_rate(model.retrial);
  out.p_leave_no_service = out.abandon_flux / out.theta;
  out.abandon_fraction = safe_ratio(out.abandon_flux, out.orbit_join_flux);
  out.theta_r_succ = out.theta * out.retrial_success_flux;
}

void loss_measures(const std::vector<CellTotals>& cells, const ModelParams& model, int truncation,
                   const MeasureOptions& options, MeasureReport& out) {
  const int S = model.channels;
  const int G = model.guard;
  const int top = last_level(truncation, options);
  const ArrivalIntensities rates = arrival_intensities(model.arrivals);
  out.lambda_handoff = rates.handoff;
  out.lambda_new = rates.fresh;
  double dropped = 0.0, idle_failed_new = 0.0, truncation_new = 0.0, orbit_full_printed = 0.0,
         not_admitted = 0.0, idle_failed_printed = 0.0;
  for (const auto& t : cells) {
    const Cell& c = t.cell;
    const bool idle_failed = policy::all_idle_failed(c, S);
    // Orbit-full terms are level specific and ignore the level range.
    if (t.level == truncation && policy::new_joins_orbit(c, S, G)) truncation_new += t.new_arrival;
    if (t.level == truncation - 1 && c.busy >= S - G && c.failed == 0)
      orbit_full_printed += t.new_arrival;
    // The printed variant always uses the printed range.
    if (idle_failed && t.level < truncation) idle_failed_printed += t.new_arrival;
    if (t.level > top) continue;
    if (!policy::handoff_admitted(c, S)) dropped += t.handoff_arrival;
    if (idle_failed) idle_failed_new += t.new_arrival;
    if (!policy::new_admitted(c, S, G)) not_admitted += t.new_arrival;
  }
  out.p_drop = safe_ratio(dropped, rates.handoff);
  out.p_block_printed = safe_ratio(orbit_full_printed + idle_failed_printed, rates.fresh);
  out.p_block = options.strict_paper_sums ? out.p_block_printed
                                          : safe_ratio(truncation_new + idle_failed_new, rates.fresh);
  out.p_block_immediate = safe_ratio(not_admitted, rates.fresh);
}

void flow_measures(const std::vector<CellTotals>& cells, const ModelParams& model, int truncation,
                   const MeasureOptions& options, MeasureReport& out) {
  const int top = last_level(truncation, options);
  out.lambda_h_out = out.handoff_kill_flux = out.new_kill_flux = 0.0;
  for (const auto& t : cells) {
    if (t.level > top) continue;
    out.lambda_h_out += t.handoff_exit;
    const double per_call = t.failure_multiplier * model.failure_rate * t.mass;
    out.handoff_kill_flux += t.cell.handoff() * per_call;
    out.new_kill_flux += t.cell.fresh * per_call;
  }
}

MeasureReport evaluate_measures(const BlockTridiagonalGenerator& q, const StationaryDistribution& z,
                                const MeasureOptions& options) {
  const std::vector<CellTotals> cells = cell_totals(q, z);
  MeasureReport r;
  r.channels = q.model.channels;
  r.guard = q.model.guard;
  r.truncation = q.truncation;
  r.tail_mass = z.tail_mass;
  r.residual = z.residual;
  occupancy_measures(cells, q.model, q.truncation, options, r);
  orbit_measures(cells, q.model, q.truncation, options, r);
  loss_measures(cells, q.model, q.truncation, options, r);
  flow_measures(cells, q.model, q.truncation, options, r);
  return r;
}

std::vector<std::pair<std::string, double>> MeasureReport::scalars() const {
  return {
      {"EB", eb},
      {"ER", er},
      {"EN", en},
      {"EC", ec},
      {"P_d", p_drop},
      {"P_b", p_block},
      {"P_b_printed", p_block_printed},
      {"P_b_immediate", p_block_immediate},
      {"P_leave_no_service", p_leave_no_service},
      {"abandon_flux", abandon_flux},
      {"abandon_fraction", abandon_fraction},
      {"orbit_join_flux", orbit_join_flux},
      {"lambda_H_out", lambda_h_out},
      {"handoff_kill_flux", handoff_kill_flux},
      {"new_kill_flux", new_kill_flux},
      {"theta_r_succ", theta_r_succ},
      {"retrial_success_flux", retrial_success_flux},
      {"P_c_avail", p_c_avail},
      {"P_loss_c_failure", p_loss_c_failure},
      {"lambda_H", lambda_handoff},
      {"lambda_N", lambda_new},
      {"theta", theta},
      {"M", static_cast<double>(truncation)},
      {"tail_mass", tail_mass},
      {"residual", residual},
  };
}

std::vector<std::pair<std::string, std::vector<double>>> MeasureReport::arrays() const {
  return {
      {"P_N", p_new},
      {"P_H", p_handoff},
      {"P_orbit", p_orbit},
      {"P_loss_c_failure_i", p_failed},
  };
}

void MeasureReport::write_table(std::ostream& os) const {
  for (const auto& [name, v] : scalars()) os << name << ' ' << format_number(v) << '\n';
  for (const auto& [name, values] : arrays())
    for (std::size_t i = 0; i < values.size(); ++i)
      os << name << '[' << i << "] " << format_number(values[i]) << '\n';
}

std::string MeasureReport::csv_header() {
  std::ostringstream os;
  const MeasureReport empty;
  bool first = true;
  for (const auto& [name, v] : empty.scalars()) {
    os << (first ? "" : ",") << name;
    first = false;
  }
  return os.str();
}

std::string MeasureReport::csv_row() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [name, v] : scalars()) {
    os << (first ? "" : ",") << format_number(v);
    first = false;
  }
  return os.str();
}

void MeasureReport::write_long_csv(std::ostream& os) const {
  os << "measure,index,value\n";
  for (const auto& [name, v] : scalars()) os << name << ",," << format_number(v) << '\n';
  for (const auto& [name, values] : arrays())
    for (std::size_t i = 0; i < values.size(); ++i)
      os << name << ',' << i << ',' << format_number(values[i]) << '\n';
}

}  // namespace rqbd
