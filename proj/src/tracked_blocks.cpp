// Generator blocks with one phase per tracked call, built from Kronecker
// lifts. Cell phase order: MAP (L) x new calls (W1^j) x handoff calls
// (W1^{k-j}) x retrials (W2^l). Arriving calls are appended at the end of
// their tuple.

#include "blocks_internal.hpp"

namespace rqbd::detail {

namespace {

class Lifter {
 public:
  Lifter(const ModelParams& m, const GeneratorOptions& o)
      : m_(m),
        o_(o),
        pieces_(LiftPieces::from_model(m)),
        c0_(SparseMatrix::from_dense(m.arrivals.no_arrival)),
        ch_(SparseMatrix::from_dense(m.arrivals.handoff)),
        cn_(SparseMatrix::from_dense(m.arrivals.fresh)),
        phases_(m.arrivals.phases()),
        w1_(m.service_new.phases()),
        w2_(m.retrial.phases()) {}

  const ModelParams& model() const { return m_; }
  const LiftPieces& pieces() const { return pieces_; }
  Index cap() const { return o_.dimension_cap; }

  SparseMatrix eye(Index n) const { return SparseMatrix::identity(n); }
  Index service_dim(int k) const { return checked_power(w1_, k, cap()); }
  Index orbit_dim(int l) const { return checked_power(w2_, l, cap()); }
  Index phases() const { return phases_; }

  SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) const {
    return kron_product(a, b, cap());
  }
  SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b, const SparseMatrix& c,
                    const SparseMatrix& d) const {
    return kron(kron(kron(a, b), c), d);
  }
  SparseMatrix lift(LiftKind kind, int k) const {
    return rqbd::lift(PhaseLift{kind, k}, pieces_, cap());
  }

  // Arriving call appended to a tuple of k service phases.
  SparseMatrix append_service(int k, const RowVector& init) const {
    return kron(eye(service_dim(k)), SparseMatrix::row(init));
  }

  const SparseMatrix& c0() const { return c0_; }
  const SparseMatrix& ch() const { return ch_; }
  const SparseMatrix& cn() const { return cn_; }
  Index w1() const { return w1_; }
  Index w2() const { return w2_; }

 private:
  const ModelParams& m_;
  const GeneratorOptions& o_;
  LiftPieces pieces_;
  SparseMatrix c0_, ch_, cn_;
  Index phases_, w1_, w2_;
};

Vector kron_vec(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

}  // namespace

SparseMatrix tracked_diag(const ModelParams& m, const GeneratorOptions& o, const LevelLayout& lay,
                          bool truncation_level) {
  Lifter t(m, o);
  const int S = m.channels;
  const int G = m.guard;
  const int l = lay.level;
  SparseMatrix out(lay.dimension, lay.dimension);

  for (std::size_t ci = 0; ci < lay.cells.size(); ++ci) {
    const Cell c = lay.cells[ci];
    const Index row0 = lay.offset[ci];
    const int j = c.fresh;
    const int h = c.handoff();
    const bool handoff_in = policy::handoff_admitted(c, S);
    const bool new_in = policy::new_admitted(c, S, G);
    const bool new_orbit = policy::new_joins_orbit(c, S, G) && !truncation_level;
    const double mult = policy::failure_multiplier(c, S, G, o.strict_paper_blocks);

    // Local evolution: arrivals that are lost only move the MAP phase.
    SparseMatrix local_map = t.c0();
    if (!handoff_in) local_map = local_map + t.ch();
    if (!new_in && !new_orbit) local_map = local_map + t.cn();

    SparseMatrix y = kron_sum(local_map, t.lift(LiftKind::ServiceNew, j), t.cap());
    y = kron_sum(y, t.lift(LiftKind::ServiceHandoff, h), t.cap());
    y = kron_sum(y, t.lift(LiftKind::Orbit, l), t.cap());
    if (l > 0 && !policy::retrial_succeeds(c, S, G, o.strict_paper_blocks)) {
      y.add_block(t.kron(t.eye(t.phases() * t.service_dim(c.busy)),
                         t.lift(LiftKind::OrbitFailedRetry, l)),
                  0, 0);
    }
    const double outflow = c.failed * m.repair_rate + mult * c.busy * m.failure_rate;
    if (outflow != 0.0) y.add_block(t.eye(y.rows()), 0, 0, -outflow);
    out.add_block(y, row0, row0);

    const Index orbit = t.orbit_dim(l);
    auto place = [&](const Cell& target, const SparseMatrix& block, double scale) {
      const int ti = lay.find(target);
      if (ti < 0) throw std::logic_error("tracked_diag: transition into inadmissible cell");
      out.add_block(block, row0, lay.offset[ti], scale);
    };

    if (c.failed > 0) {
      place({c.busy, j, c.failed - 1}, t.eye(lay.block_size[ci]), c.failed * m.repair_rate);
    }
    if (handoff_in) {
      place({c.busy + 1, j, c.failed},
            t.kron(t.ch(), t.eye(t.service_dim(j)), t.append_service(h, t.pieces().init_handoff),
                   t.eye(orbit)),
            1.0);
    }
    if (new_in) {
      place({c.busy + 1, j + 1, c.failed},
            t.kron(t.cn(), t.append_service(j, t.pieces().init_new), t.eye(t.service_dim(h)),
                   t.eye(orbit)),
            1.0);
    }
    if (j > 0) {
      place({c.busy - 1, j - 1, c.failed},
            t.kron(t.eye(t.phases()), t.lift(LiftKind::ExitNew, j), t.eye(t.service_dim(h)),
                   t.eye(orbit)),
            1.0);
    }
    if (h > 0) {
      place({c.busy - 1, j, c.failed},
            t.kron(t.eye(t.phases()), t.eye(t.service_dim(j)), t.lift(LiftKind::ExitHandoff, h),
                   t.eye(orbit)),
            1.0);
    }
    if (m.failure_rate > 0.0) {
      const SparseMatrix ones = SparseMatrix::column(Vector::Ones(t.w1()));
      if (j > 0) {
        place({c.busy - 1, j - 1, c.failed + 1},
              t.kron(t.eye(t.phases()), slot_sum(ones, t.w1(), j, t.cap()),
                     t.eye(t.service_dim(h)), t.eye(orbit)),
              mult * m.failure_rate);
      }
      if (h > 0) {
        place({c.busy - 1, j, c.failed + 1},
              t.kron(t.eye(t.phases()), t.eye(t.service_dim(j)), slot_sum(ones, t.w1(), h, t.cap()),
                     t.eye(orbit)),
              mult * m.failure_rate);
      }
    }
  }
  out.canonicalize();
  return out;
}

SparseMatrix tracked_upper(const ModelParams& m, const GeneratorOptions& o, const LevelLayout& from,
                           const LevelLayout& to) {
  Lifter t(m, o);
  SparseMatrix out(from.dimension, to.dimension);
  const SparseMatrix join = t.kron(t.eye(t.orbit_dim(from.level)),
                                   SparseMatrix::row(t.pieces().init_retrial));
  for (std::size_t ci = 0; ci < from.cells.size(); ++ci) {
    const Cell c = from.cells[ci];
    if (!policy::new_joins_orbit(c, m.channels, m.guard)) continue;
    const SparseMatrix block = t.kron(t.kron(t.cn(), t.eye(t.service_dim(c.busy))), join);
    out.add_block(block, from.offset[ci], to.offset_of(c));
  }
  out.canonicalize();
  return out;
}

SparseMatrix tracked_lower(const ModelParams& m, const GeneratorOptions& o, const LevelLayout& from,
                           const LevelLayout& to) {
  Lifter t(m, o);
  const int n = from.level;  // retrials present in the source level
  SparseMatrix out(from.dimension, to.dimension);
  const SparseMatrix leave = t.lift(LiftKind::OrbitLeave, n);
  const SparseMatrix attempt = slot_sum(t.pieces().retrial_attempt, t.w2(), n, t.cap());
  for (std::size_t ci = 0; ci < from.cells.size(); ++ci) {
    const Cell c = from.cells[ci];
    const Index row0 = from.offset[ci];
    out.add_block(t.kron(t.eye(t.phases() * t.service_dim(c.busy)), leave), row0,
                  to.offset_of(c));
    if (policy::retrial_succeeds(c, m.channels, m.guard, o.strict_paper_blocks)) {
      const Cell target{c.busy + 1, c.fresh + 1, c.failed};
      out.add_block(t.kron(t.eye(t.phases()), t.append_service(c.fresh, t.pieces().init_new),
                           t.eye(t.service_dim(c.handoff())), attempt),
                    row0, to.offset_of(target));
    }
  }
  out.canonicalize();
  return out;
}

CellRates tracked_cell_rates(const ModelParams& m, const GeneratorOptions& o, int level,
                             const Cell& c) {
  Lifter t(m, o);
  const Index L = t.phases();
  const Vector eL = Vector::Ones(L);
  const Vector new_ones = Vector::Ones(t.service_dim(c.fresh));
  const Vector handoff_ones = Vector::Ones(t.service_dim(c.handoff()));
  const Vector orbit_ones = Vector::Ones(t.orbit_dim(level));
  const Vector service_ones = Vector::Ones(t.service_dim(c.busy));

  auto exits = [](const SparseMatrix& psi) { return psi.row_sums(); };
  CellRates r;
  r.handoff_arrival = kron_vec(m.arrivals.handoff.rowwise().sum(), kron_vec(service_ones, orbit_ones));
  r.new_arrival = kron_vec(m.arrivals.fresh.rowwise().sum(), kron_vec(service_ones, orbit_ones));
  r.new_exit = kron_vec(eL, kron_vec(exits(t.lift(LiftKind::ExitNew, c.fresh)),
                                     kron_vec(handoff_ones, orbit_ones)));
  r.handoff_exit =
      kron_vec(kron_vec(eL, new_ones),
               kron_vec(exits(t.lift(LiftKind::ExitHandoff, c.handoff())), orbit_ones));
  const Vector lead = kron_vec(eL, service_ones);
  r.orbit_leave = kron_vec(lead, exits(t.lift(LiftKind::OrbitLeave, level)));
  r.orbit_attempt =
      kron_vec(lead, exits(slot_sum(t.pieces().retrial_attempt, t.w2(), level, t.cap())));
  return r;
}

}  // namespace rqbd::detail
