#pragma once

// Arrival, service, retrial, failure and repair primitives of the cell model.

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rqbd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Raised for any parameter set that violates a model invariant.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Default accepted row-sum residual for user supplied matrices.
inline constexpr double kInputRowSumTolerance = 1e-3;

/// Markovian arrival process with separate handoff and new-call arrival
/// matrices. `no_arrival` is C0; its diagonal is renormalized on validation so
/// that C0 + C_H + C_N has exact zero row sums.
struct MapProcess {
  Matrix no_arrival;
  Matrix handoff;
  Matrix fresh;
  RowVector stationary;
  /// Largest |row sum| of the supplied C0 + C_H + C_N before renormalization.
  double row_sum_residual = 0.0;

  int phases() const { return static_cast<int>(no_arrival.rows()); }
  Matrix generator() const { return no_arrival + handoff + fresh; }
};

MapProcess validate_map(const Matrix& c0, const Matrix& c_handoff, const Matrix& c_new,
                        double tolerance = kInputRowSumTolerance);

struct ArrivalIntensities {
  double handoff = 0.0;
  double fresh = 0.0;
  double total = 0.0;
};

ArrivalIntensities arrival_intensities(const MapProcess& map);

/// Interval statistics of the merged arrival stream (D0 = C0, D1 = C_H + C_N).
struct ArrivalMoments {
  double mean_interarrival = 0.0;
  double lag1_correlation = 0.0;
  double variation = 0.0;          // c_v
  double squared_variation = 0.0;  // c_v^2
};

ArrivalMoments arrival_correlation_variation(const MapProcess& map);

/// Phase-type distribution (init, subgen) with one or more absorption vectors.
/// Service distributions carry a single exit vector; the retrial distribution
/// carries two: exits[0] leaves the cell, exits[1] is a retrial attempt.
struct PhDistribution {
  RowVector init;
  Matrix subgen;
  std::vector<Vector> exits;

  int phases() const { return static_cast<int>(subgen.rows()); }
  Vector total_exit() const;
};

/// Service PH: the exit vector is derived as -subgen * e.
PhDistribution make_service_ph(const RowVector& init, const Matrix& subgen);

/// Retrial PH with explicit leave / attempt vectors. If the supplied vectors
/// close the rows within `tolerance`, the subgen diagonal is corrected so they
/// close exactly.
PhDistribution make_retrial_ph(const RowVector& init, const Matrix& subgen, const Vector& leave,
                               const Vector& attempt, double tolerance = kInputRowSumTolerance);

/// Retrial PH where the total exit -subgen * e is split as
/// leave = p * total, attempt = (1 - p) * total.
PhDistribution make_retrial_ph_split(const RowVector& init, const Matrix& subgen,
                                     double leave_fraction);

PhDistribution exponential_ph(double rate);
PhDistribution exponential_retrial(double rate, double leave_fraction);

void validate_ph(const PhDistribution& d, double tolerance = 1e-12);

/// 1 / (init * (-subgen)^{-1} * e).
double ph_fundamental_rate(const PhDistribution& d);

/// Multiplies subgen and exits by target_rate / current rate.
PhDistribution scale_ph(const PhDistribution& d, double target_rate);

/// Share of absorptions that go through exits[0] for a PH with two exits,
/// starting from init. Used to carry the abandonment split across case
/// reductions.
double leave_probability(const PhDistribution& retrial);

/// Complete model instance.
struct ModelParams {
  MapProcess arrivals;
  PhDistribution service_new;
  PhDistribution service_handoff;
  PhDistribution retrial;
  int channels = 1;    // S
  int guard = 0;       // G
  double failure_rate = 0.0;  // per busy channel
  double repair_rate = 1.0;   // per failed channel

  double theta() const { return ph_fundamental_rate(retrial); }
};

void validate_model(const ModelParams& model);

/// Multiplies C_H by `factor` and moves the difference into C0, so the phase
/// process and C_N are unchanged. Throws when C0 would turn negative.
MapProcess scale_handoff_arrivals(const MapProcess& map, double factor);
/// Rescales the whole MAP in time so that the total intensity becomes `total`.
MapProcess scale_map_to_total(const MapProcess& map, double total);
/// One-phase MAP with the given handoff and new-call rates.
MapProcess poisson_map(double handoff_rate, double new_rate);

/// The reference cell: S = 5, G = 3, lambda_f = 0.5, mu_r = 1, two-phase MAP,
/// service and retrial PHs. `leave_fraction` splits the retrial exit rate into
/// abandonment and attempts.
ModelParams reference_model(double leave_fraction = 0.5);

}  // namespace rqbd
