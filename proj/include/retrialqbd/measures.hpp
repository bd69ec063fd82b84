#pragma once

// Stationary performance measures of the truncated chain.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "retrialqbd/generator.hpp"
#include "retrialqbd/solver.hpp"

namespace rqbd {

struct MeasureOptions {
  /// Use the printed summation ranges: levels 0..M-1, the orbit-full
  /// blocking term at level M-1, and the success sum over k >= 1.
  bool strict_paper_sums = false;
};

/// Probability mass and rate contractions of one (level, cell).
struct CellTotals {
  int level = 0;
  Cell cell;
  double mass = 0.0;
  double handoff_arrival = 0.0;  // z * (C_H e)
  double new_arrival = 0.0;      // z * (C_N e)
  double handoff_exit = 0.0;     // completions of handoff calls
  double new_exit = 0.0;         // completions of new calls
  double orbit_leave = 0.0;      // abandonments
  double orbit_attempt = 0.0;    // retrial attempts
  double failure_multiplier = 1.0;
  bool retrial_succeeds = false;
};

std::vector<CellTotals> cell_totals(const BlockTridiagonalGenerator& q,
                                    const StationaryDistribution& z);

struct MeasureReport {
  int channels = 0;
  int guard = 0;
  int truncation = 0;
  double tail_mass = 0.0;
  double residual = 0.0;
  double lambda_handoff = 0.0;
  double lambda_new = 0.0;
  double theta = 0.0;

  std::vector<double> p_new;      // P_N(j), j = 0..S-G, over k >= 1
  std::vector<double> p_handoff;  // P_H(j'), j' = 0..S, over k >= 1
  std::vector<double> p_orbit;    // P_orbit(l), l = 0..M
  std::vector<double> p_failed;   // P_loss_c_failure(i), i = 0..S
  double eb = 0.0;
  double er = 0.0;
  double en = 0.0;
  double ec = 0.0;
  double p_c_avail = 0.0;
  double p_loss_c_failure = 0.0;  // sum over i >= 1

  double p_drop = 0.0;
  double p_block = 0.0;          // truncation-level blocking flux at level M
  double p_block_printed = 0.0;  // orbit-full term taken at level M-1, i = 0
  double p_block_immediate = 0.0;  // arriving new call not admitted at once

  double abandon_flux = 0.0;
  double orbit_join_flux = 0.0;
  double p_leave_no_service = 0.0;  // abandon_flux / theta
  double abandon_fraction = 0.0;    // abandon_flux / orbit_join_flux

  double retrial_success_flux = 0.0;
  double theta_r_succ = 0.0;  // theta * retrial_success_flux

  double lambda_h_out = 0.0;
  double handoff_kill_flux = 0.0;
  double new_kill_flux = 0.0;

  /// Scalar measures in a fixed order.
  std::vector<std::pair<std::string, double>> scalars() const;
  /// Array measures as (name, values).
  std::vector<std::pair<std::string, std::vector<double>>> arrays() const;

  /// "name value" lines; arrays exploded as name[index].
  void write_table(std::ostream& os) const;
  /// Header and row over scalars() only, so the column set never varies.
  static std::string csv_header();
  std::string csv_row() const;
  /// Long format "measure,index,value" over scalars and exploded arrays.
  void write_long_csv(std::ostream& os) const;
};

/// P_N, P_H, EB, EN, EC, P_c_avail, P_loss_c_failure.
void occupancy_measures(const std::vector<CellTotals>& cells, const ModelParams& model, int truncation,
                        const MeasureOptions& options, MeasureReport& out);
/// P_orbit, ER, abandonment and retrial-success measures.
void orbit_measures(const std::vector<CellTotals>& cells, const ModelParams& model, int truncation,
                    const MeasureOptions& options, MeasureReport& out);
/// P_d and the P_b variants.
void loss_measures(const std::vector<CellTotals>& cells, const ModelParams& model, int truncation,
                   const MeasureOptions& options, MeasureReport& out);
/// Handoff output flow and failure kill fluxes.
void flow_measures(const std::vector<CellTotals>& cells, const ModelParams& model, int truncation,
                   const MeasureOptions& options, MeasureReport& out);

MeasureReport evaluate_measures(const BlockTridiagonalGenerator& q, const StationaryDistribution& z,
                                const MeasureOptions& options = {});

/// Formats a double with 15 significant digits ("nan"/"inf" spelled out).
std::string format_number(double v);

}  // namespace rqbd
