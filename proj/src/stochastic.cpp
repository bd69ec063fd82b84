#include "retrialqbd/stochastic.hpp"

#include <cmath>
#include <sstream>

namespace rqbd {

namespace {

void require_square(const Matrix& m, int n, const char* what) {
  if (m.rows() != n || m.cols() != n) {
    std::ostringstream os;
    os << what << ": expected " << n << "x" << n << " matrix, got " << m.rows() << "x" << m.cols();
    throw ModelError(os.str());
  }
}

// Strong connectivity of the directed graph given by positive off-diagonals.
bool irreducible(const Matrix& gen) {
  const int n = static_cast<int>(gen.rows());
  auto reach_all = [&](bool transpose) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        double w = transpose ? gen(v, u) : gen(u, v);
        if (v != u && w > 0.0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    for (char s : seen)
      if (!s) return false;
    return true;
  };
  return reach_all(false) && reach_all(true);
}

// Solves pi * gen = 0, pi * e = 1 by replacing the last column with ones.
RowVector stationary_vector(const Matrix& gen) {
  const auto n = gen.rows();
  Matrix a = gen;
  a.col(n - 1).setOnes();
  RowVector rhs = RowVector::Zero(n);
  rhs(n - 1) = 1.0;
  RowVector pi = a.transpose().fullPivLu().solve(rhs.transpose()).transpose();
  return pi;
}

}  // namespace

MapProcess validate_map(const Matrix& c0, const Matrix& c_handoff, const Matrix& c_new,
                        double tolerance) {
  const int n = static_cast<int>(c0.rows());
  if (n == 0) throw ModelError("MAP: empty C0");
  require_square(c0, n, "MAP C0");
  require_square(c_handoff, n, "MAP C_H");
  require_square(c_new, n, "MAP C_N");
  if ((c_handoff.array() < 0.0).any() || (c_new.array() < 0.0).any())
    throw ModelError("MAP: negative arrival block entry");
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (r != c && c0(r, c) < 0.0) throw ModelError("MAP: negative off-diagonal entry in C0");
    }
  for (int r = 0; r < n; ++r)
    if (!(c0(r, r) < 0.0)) throw ModelError("MAP: C0 diagonal must be strictly negative");

  MapProcess m;
  m.no_arrival = c0;
  m.handoff = c_handoff;
  m.fresh = c_new;
  Vector sums = m.generator().rowwise().sum();
  m.row_sum_residual = sums.cwiseAbs().maxCoeff();
  if (m.row_sum_residual > tolerance) {
    std::ostringstream os;
    os << "MAP: row-sum residual " << m.row_sum_residual << " exceeds tolerance " << tolerance;
    throw ModelError(os.str());
  }
  for (int r = 0; r < n; ++r) m.no_arrival(r, r) -= sums(r);
  if (!(m.no_arrival.diagonal().array() < 0.0).all())
    throw ModelError("MAP: C0 diagonal must be strictly negative");

  const Matrix gen = m.generator();
  if (!irreducible(gen)) throw ModelError("MAP: generator C is reducible");
  m.stationary = stationary_vector(gen);
  return m;
}

ArrivalIntensities arrival_intensities(const MapProcess& map) {
  const Vector e = Vector::Ones(map.phases());
  ArrivalIntensities out;
  out.handoff = map.stationary * map.handoff * e;
  out.fresh = map.stationary * map.fresh * e;
  out.total = out.handoff + out.fresh;
  return out;
}

ArrivalMoments arrival_correlation_variation(const MapProcess& map) {
  const int n = map.phases();
  const Vector e = Vector::Ones(n);
  const Matrix d1 = map.handoff + map.fresh;
  const Matrix inv = (-map.no_arrival).inverse();
  const double lambda = map.stationary * d1 * e;
  if (!(lambda > 0.0)) throw ModelError("MAP: zero arrival intensity");
  const RowVector phi = map.stationary * d1 / lambda;
  const double m1 = phi * inv * e;
  const double m2 = 2.0 * (phi * inv * inv * e)(0);
  const double var = m2 - m1 * m1;
  const Matrix embedded = inv * d1;
  const double joint = (phi * inv * embedded * inv * e)(0);

  ArrivalMoments out;
  out.mean_interarrival = m1;
  out.squared_variation = var / (m1 * m1);
  out.variation = std::sqrt(out.squared_variation);
  out.lag1_correlation = var > 0.0 ? (joint - m1 * m1) / var : 0.0;
  // One-phase MAPs are Poisson; cut off round-off noise.
  if (n == 1) out.lag1_correlation = 0.0;
  return out;
}

Vector PhDistribution::total_exit() const {
  Vector t = Vector::Zero(phases());
  for (const auto& x : exits) t += x;
  return t;
}

void validate_ph(const PhDistribution& d, double tolerance) {
  const int w = d.phases();
  if (w == 0) throw ModelError("PH: empty sub-generator");
  require_square(d.subgen, w, "PH sub-generator");
  if (d.init.size() != w) throw ModelError("PH: initial vector size mismatch");
  if ((d.init.array() < 0.0).any()) throw ModelError("PH: negative initial probability");
  if (std::abs(d.init.sum() - 1.0) > 1e-9) throw ModelError("PH: initial vector must sum to 1");
  if (d.exits.empty()) throw ModelError("PH: no exit vector");
  for (const auto& x : d.exits) {
    if (x.size() != w) throw ModelError("PH: exit vector size mismatch");
    if ((x.array() < 0.0).any()) throw ModelError("PH: negative exit rate");
  }
  for (int r = 0; r < w; ++r) {
    if (!(d.subgen(r, r) < 0.0)) throw ModelError("PH: sub-generator diagonal must be negative");
    for (int c = 0; c < w; ++c)
      if (r != c && d.subgen(r, c) < 0.0) throw ModelError("PH: negative off-diagonal rate");
  }
  Vector closure = d.subgen.rowwise().sum() + d.total_exit();
  if (closure.cwiseAbs().maxCoeff() > tolerance)
    throw ModelError("PH: sub-generator rows and exit vectors do not sum to zero");
  if (!(d.total_exit().array() > 0.0).any()) throw ModelError("PH: no absorbing transition");
}

PhDistribution make_service_ph(const RowVector& init, const Matrix& subgen) {
  PhDistribution d;
  d.init = init;
  d.subgen = subgen;
  d.exits = {-(subgen.rowwise().sum())};
  // Clean round-off that would otherwise show up as tiny negative exits.
  for (auto& x : d.exits[0]) {
    if (x < 0.0 && x > -1e-12) x = 0.0;
  }
  validate_ph(d);
  return d;
}

PhDistribution make_retrial_ph(const RowVector& init, const Matrix& subgen, const Vector& leave,
                               const Vector& attempt, double tolerance) {
  PhDistribution d;
  d.init = init;
  d.subgen = subgen;
  d.exits = {leave, attempt};
  if (leave.size() != subgen.rows() || attempt.size() != subgen.rows())
    throw ModelError("retrial PH: exit vector size mismatch");
  Vector closure = subgen.rowwise().sum() + leave + attempt;
  if (closure.cwiseAbs().maxCoeff() > tolerance)
    throw ModelError("retrial PH: Gamma e + Gamma0(1) + Gamma0(2) residual exceeds tolerance");
  for (int r = 0; r < d.phases(); ++r) d.subgen(r, r) -= closure(r);
  validate_ph(d);
  return d;
}

PhDistribution make_retrial_ph_split(const RowVector& init, const Matrix& subgen,
                                     double leave_fraction) {
  if (!(leave_fraction >= 0.0 && leave_fraction <= 1.0))
    throw ModelError("retrial PH: leave fraction must lie in [0, 1]");
  Vector total = -(subgen.rowwise().sum());
  for (auto& x : total)
    if (x < 0.0 && x > -1e-12) x = 0.0;
  PhDistribution d;
  d.init = init;
  d.subgen = subgen;
  d.exits = {leave_fraction * total, total - leave_fraction * total};
  validate_ph(d);
  return d;
}

PhDistribution exponential_ph(double rate) {
  if (!(rate > 0.0)) throw ModelError("exponential: rate must be positive");
  return make_service_ph(RowVector::Ones(1), Matrix::Constant(1, 1, -rate));
}

PhDistribution exponential_retrial(double rate, double leave_fraction) {
  if (!(rate > 0.0)) throw ModelError("exponential retrial: rate must be positive");
  return make_retrial_ph_split(RowVector::Ones(1), Matrix::Constant(1, 1, -rate), leave_fraction);
}

double ph_fundamental_rate(const PhDistribution& d) {
  const Vector e = Vector::Ones(d.phases());
  Eigen::FullPivLU<Matrix> lu(-d.subgen);
  if (!lu.isInvertible()) throw ModelError("PH: singular sub-generator");
  const double mean = d.init * lu.solve(e);
  return 1.0 / mean;
}

PhDistribution scale_ph(const PhDistribution& d, double target_rate) {
  if (!(target_rate > 0.0)) throw ModelError("scale_ph: target rate must be positive");
  const double factor = target_rate / ph_fundamental_rate(d);
  PhDistribution out = d;
  out.subgen *= factor;
  for (auto& x : out.exits) x *= factor;
  return out;
}

double leave_probability(const PhDistribution& retrial) {
  if (retrial.exits.size() < 2) return 0.0;
  const Vector absorb = (-retrial.subgen).fullPivLu().solve(retrial.exits[0]);
  return retrial.init * absorb;
}

void validate_model(const ModelParams& model) {
  if (model.channels < 1) throw ModelError("channels: S must be positive");
  if (model.guard < 0 || model.guard >= model.channels)
    throw ModelError("guard: G must satisfy 0 <= G < S");
  if (!(model.failure_rate >= 0.0)) throw ModelError("failure_rate: must be nonnegative");
  if (!(model.repair_rate > 0.0)) throw ModelError("repair_rate: must be positive");
  validate_ph(model.service_new);
  validate_ph(model.service_handoff);
  validate_ph(model.retrial);
  if (model.service_new.phases() != model.service_handoff.phases())
    throw ModelError("service: new and handoff PH must share dimension W1");
  if (model.service_new.exits.size() != 1 || model.service_handoff.exits.size() != 1)
    throw ModelError("service: PH must have exactly one exit vector");
  if (model.retrial.exits.size() != 2)
    throw ModelError("retrial: PH must have leave and attempt exit vectors");
  if (model.arrivals.phases() == 0) throw ModelError("arrivals: empty MAP");
}

MapProcess scale_handoff_arrivals(const MapProcess& map, double factor) {
  if (!(factor >= 0.0)) throw ModelError("handoff scaling factor must be nonnegative");
  // Moving (1 - factor) C_H into C0 keeps C0 + C_H + C_N, hence the phase
  // process, unchanged.
  const Matrix c0 = map.no_arrival + (1.0 - factor) * map.handoff;
  for (int r = 0; r < map.phases(); ++r)
    for (int c = 0; c < map.phases(); ++c)
      if (r != c && c0(r, c) < 0.0) {
        std::ostringstream os;
        os << "handoff scaling factor " << factor
           << " would make C0 negative off the diagonal; the phase process cannot be kept";
        throw ModelError(os.str());
      }
  return validate_map(c0, map.handoff * factor, map.fresh, 1e-9);
}

MapProcess scale_map_to_total(const MapProcess& map, double total) {
  if (!(total > 0.0)) throw ModelError("total arrival intensity must be positive");
  const double factor = total / arrival_intensities(map).total;
  return validate_map(map.no_arrival * factor, map.handoff * factor, map.fresh * factor, 1e-9);
}

MapProcess poisson_map(double handoff_rate, double new_rate) {
  if (!(handoff_rate >= 0.0 && new_rate >= 0.0 && handoff_rate + new_rate > 0.0))
    throw ModelError("Poisson MAP: rates must be nonnegative with positive total");
  return validate_map(Matrix::Constant(1, 1, -(handoff_rate + new_rate)),
                      Matrix::Constant(1, 1, handoff_rate), Matrix::Constant(1, 1, new_rate));
}

ModelParams reference_model(double leave_fraction) {
  ModelParams m;
  Matrix c0(2, 2), ch(2, 2);
  c0 << -1.3431, 0.0230, 0.0, -17.183;
  ch << 0.6600, 0.0, 0.2567, 8.3351;
  m.arrivals = validate_map(c0, ch, ch);
  Matrix lh(2, 2), ln(2, 2), gm(2, 2);
  lh << -1.999, 1.99, 0.0, -0.999;
  ln << -1.0, 1.0, 0.0, -1.0;
  gm << -2.0, 2.0, 0.0, -2.0;
  m.service_handoff = make_service_ph((RowVector(2) << 0.9, 0.1).finished(), lh);
  m.service_new = make_service_ph((RowVector(2) << 0.0, 1.0).finished(), ln);
  m.retrial = make_retrial_ph_split((RowVector(2) << 0.5, 0.5).finished(), gm, leave_fraction);
  m.channels = 5;
  m.guard = 3;
  m.failure_rate = 0.5;
  m.repair_rate = 1.0;
  validate_model(m);
  return m;
}

}  // namespace rqbd
