#pragma once

// Discrete-event simulation of the cell with an unbounded orbit. Uses the
// admission policy of the generator (retrials are treated as new calls).

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "retrialqbd/stochastic.hpp"

namespace rqbd {

struct SimConfig {
  double horizon = 1e5;
  /// Negative selects 10% of the horizon.
  double warmup = -1.0;
  int replications = 30;
  std::uint64_t seed = 20240601;
  int workers = 1;
  /// Event log of replication 0, one line per event: "time kind k j i orbit".
  std::ostream* trace = nullptr;
};

struct SimEstimate {
  double mean = 0.0;
  double half_width = 0.0;  // 95% Student-t
  bool covers(double value) const { return std::abs(value - mean) <= half_width; }
};

/// Raw outcome of a single replication (time averages and rates over the
/// post-warmup window).
struct SimReplication {
  double eb = 0.0, er = 0.0, en = 0.0, p_c_avail = 0.0;
  double p_drop = 0.0, p_block = 0.0, p_block_immediate = 0.0;
  double lambda_h_out = 0.0, theta_r_succ = 0.0;
  std::uint64_t events = 0;
  std::uint64_t failures = 0;
  std::uint64_t handoff_arrivals = 0, new_arrivals = 0;
};

struct SimEstimates {
  SimEstimate eb, er, en, p_drop, p_block, p_block_immediate, p_c_avail, lambda_h_out, theta_r_succ;
  int replications = 0;
  double horizon = 0.0;
  double warmup = 0.0;
  std::uint64_t failures = 0;  // over all replications, whole horizon
  std::vector<SimReplication> runs;
};

/// Independent replication r uses mt19937_64 seeded with seed_seq{seed_lo, seed_hi, r}.
SimReplication simulate_replication(const ModelParams& model, double horizon, double warmup,
                                    std::uint64_t seed, int replication,
                                    std::ostream* trace = nullptr);

SimEstimates simulate(const ModelParams& model, const SimConfig& config);

/// 95% confidence interval half-width of a sample mean (Student t).
SimEstimate summarize(const std::vector<double>& samples);

enum class CallType { Handoff = 0, New = 1 };

struct ArrivalEvent {
  double time;
  CallType type;
};

/// n successive arrival epochs of the MAP started from its stationary phase.
std::vector<ArrivalEvent> sample_interarrivals(const MapProcess& map, std::size_t n,
                                               std::uint64_t seed);

}  // namespace rqbd
