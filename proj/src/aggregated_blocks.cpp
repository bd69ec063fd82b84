// Generator blocks with exchangeable calls: a phase block records the MAP
// phase and how many new calls, handoff calls and retrials occupy each phase.
// Local index = ((v * nA + a) * nB + b) * nR + r with a, b, r the ranks of
// the three occupancy vectors.

#include <map>
#include <unordered_map>

#include "blocks_internal.hpp"

namespace rqbd::detail {

Index multiset_count(int n, int w, Index cap) {
  // C(n + w - 1, w - 1) computed incrementally; exact at every step.
  Index c = 1;
  for (int k = 1; k < w; ++k) {
    c = c * (n + k) / k;
    if (c > cap) throw DimensionCapError("aggregated phase block exceeds dimension cap");
  }
  return c;
}

std::vector<int> reachable_phases(const PhDistribution& d) {
  const int w = d.phases();
  std::vector<char> seen(w, 0);
  std::vector<int> stack;
  for (int p = 0; p < w; ++p) {
    if (d.init(p) > 0.0) {
      seen[p] = 1;
      stack.push_back(p);
    }
  }
  while (!stack.empty()) {
    const int p = stack.back();
    stack.pop_back();
    for (int q = 0; q < w; ++q) {
      if (!seen[q] && q != p && d.subgen(p, q) > 0.0) {
        seen[q] = 1;
        stack.push_back(q);
      }
    }
  }
  std::vector<int> out;
  for (int p = 0; p < w; ++p)
    if (seen[p]) out.push_back(p);
  return out;
}

namespace {

class Compositions {
 public:
  Compositions(int total, int parts) : total_(total), parts_(parts) {
    std::vector<int> cur(parts, 0);
    fill(cur, 0, total);
    for (std::size_t i = 0; i < size(); ++i) rank_.emplace(key(&flat_[i * parts_]), i);
  }

  std::size_t size() const { return parts_ == 0 ? 0 : flat_.size() / parts_; }
  const int* at(std::size_t i) const { return &flat_[i * parts_]; }
  Index index_of(const int* counts) const {
    auto it = rank_.find(key(counts));
    if (it == rank_.end()) throw std::logic_error("composition not found");
    return static_cast<Index>(it->second);
  }

 private:
  void fill(std::vector<int>& cur, int pos, int left) {
    if (pos == parts_ - 1) {
      cur[pos] = left;
      flat_.insert(flat_.end(), cur.begin(), cur.end());
      return;
    }
    for (int c = 0; c <= left; ++c) {
      cur[pos] = c;
      fill(cur, pos + 1, left - c);
    }
  }
  std::uint64_t key(const int* counts) const {
    std::uint64_t k = 0;
    for (int p = 0; p < parts_; ++p) k = k * static_cast<std::uint64_t>(total_ + 1) + counts[p];
    return k;
  }

  int total_, parts_;
  std::vector<int> flat_;
  std::unordered_map<std::uint64_t, std::size_t> rank_;
};

class CompositionCache {
 public:
  const Compositions& get(int total, int parts) {
    auto key = std::make_pair(total, parts);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, Compositions(total, parts)).first;
    return it->second;
  }

 private:
  std::map<std::pair<int, int>, Compositions> cache_;
};

struct LocalState {
  int v;
  std::vector<int> a, b, r;
};

class Enumerator {
 public:
  Enumerator(const ModelParams& m, const GeneratorOptions& o)
      : m_(m),
        o_(o),
        L_(static_cast<int>(m.arrivals.phases())),
        act_n_(reachable_phases(m.service_new)),
        act_h_(reachable_phases(m.service_handoff)),
        act_r_(reachable_phases(m.retrial)),
        wn_(static_cast<int>(act_n_.size())),
        wh_(static_cast<int>(act_h_.size())),
        wr_(static_cast<int>(act_r_.size())) {}

  Index local_index(const Cell& c, int level, int v, const std::vector<int>& a,
                    const std::vector<int>& b, const std::vector<int>& r) {
    const auto& ca = comps_.get(c.fresh, wn_);
    const auto& cb = comps_.get(c.handoff(), wh_);
    const auto& cr = comps_.get(level, wr_);
    const Index na = static_cast<Index>(ca.size());
    const Index nb = static_cast<Index>(cb.size());
    const Index nr = static_cast<Index>(cr.size());
    return ((v * na + ca.index_of(a.data())) * nb + cb.index_of(b.data())) * nr +
           cr.index_of(r.data());
  }

  LocalState decode(const Cell& c, int level, Index local) {
    const auto& ca = comps_.get(c.fresh, wn_);
    const auto& cb = comps_.get(c.handoff(), wh_);
    const auto& cr = comps_.get(level, wr_);
    const Index na = static_cast<Index>(ca.size());
    const Index nb = static_cast<Index>(cb.size());
    const Index nr = static_cast<Index>(cr.size());
    LocalState s;
    const Index ri = local % nr;
    local /= nr;
    const Index bi = local % nb;
    local /= nb;
    const Index ai = local % na;
    s.v = static_cast<int>(local / na);
    s.a.assign(ca.at(ai), ca.at(ai) + wn_);
    s.b.assign(cb.at(bi), cb.at(bi) + wh_);
    s.r.assign(cr.at(ri), cr.at(ri) + wr_);
    return s;
  }

  /// Calls emit(level_shift, target_cell, target_local, rate) for every
  /// transition out of (level, cell, local) with a nonzero rate.
  template <class Emit>
  void for_each(int level, const Cell& c, Index local, bool truncation_level, Emit&& emit) {
    const int S = m_.channels;
    const int G = m_.guard;
    const bool strict = o_.strict_paper_blocks;
    const LocalState s = decode(c, level, local);
    const auto& C0 = m_.arrivals.no_arrival;
    const auto& CH = m_.arrivals.handoff;
    const auto& CN = m_.arrivals.fresh;
    const auto& sn = m_.service_new;
    const auto& sh = m_.service_handoff;
    const auto& rt = m_.retrial;

    const bool handoff_in = policy::handoff_admitted(c, S);
    const bool new_in = policy::new_admitted(c, S, G);
    const bool new_orbit = policy::new_joins_orbit(c, S, G) && !truncation_level;
    const double mult = policy::failure_multiplier(c, S, G, strict);

    auto send = [&](int shift, const Cell& tc, int v, const std::vector<int>& a,
                    const std::vector<int>& b, const std::vector<int>& r, double rate) {
      if (rate == 0.0) return;
      emit(shift, tc, local_index(tc, level + shift, v, a, b, r), rate);
    };

    // MAP phase moves, including arrivals that are lost.
    for (int w = 0; w < L_; ++w) {
      if (w == s.v) continue;
      double rate = C0(s.v, w);
      if (!handoff_in) rate += CH(s.v, w);
      if (!new_in && !new_orbit) rate += CN(s.v, w);
      send(0, c, w, s.a, s.b, s.r, rate);
    }
    for (int w = 0; w < L_; ++w) {
      if (handoff_in && CH(s.v, w) != 0.0) {
        const Cell tc{c.busy + 1, c.fresh, c.failed};
        for (int p = 0; p < wh_; ++p) {
          auto b = s.b;
          ++b[p];
          send(0, tc, w, s.a, b, s.r, CH(s.v, w) * sh.init(act_h_[p]));
        }
      }
      if (CN(s.v, w) == 0.0) continue;
      if (new_in) {
        const Cell tc{c.busy + 1, c.fresh + 1, c.failed};
        for (int p = 0; p < wn_; ++p) {
          auto a = s.a;
          ++a[p];
          send(0, tc, w, a, s.b, s.r, CN(s.v, w) * sn.init(act_n_[p]));
        }
      } else if (new_orbit) {
        for (int p = 0; p < wr_; ++p) {
          auto r = s.r;
          ++r[p];
          send(+1, c, w, s.a, s.b, r, CN(s.v, w) * rt.init(act_r_[p]));
        }
      }
    }

    // Calls in service: phase changes, completions, channel failures.
    auto serve = [&](const std::vector<int>& occ, const PhDistribution& ph,
                     const std::vector<int>& act, bool fresh) {
      const int w = static_cast<int>(act.size());
      for (int p = 0; p < w; ++p) {
        if (occ[p] == 0) continue;
        const double n = occ[p];
        auto moved = occ;
        --moved[p];
        for (int q = 0; q < w; ++q) {
          const double rate = q == p ? 0.0 : ph.subgen(act[p], act[q]);
          if (rate == 0.0) continue;
          auto next = moved;
          ++next[q];
          if (fresh) {
            send(0, c, s.v, next, s.b, s.r, n * rate);
          } else {
            send(0, c, s.v, s.a, next, s.r, n * rate);
          }
        }
        const Cell done{c.busy - 1, c.fresh - (fresh ? 1 : 0), c.failed};
        const Cell killed{c.busy - 1, c.fresh - (fresh ? 1 : 0), c.failed + 1};
        const double exit = ph.exits[0](act[p]);
        if (fresh) {
          send(0, done, s.v, moved, s.b, s.r, n * exit);
          send(0, killed, s.v, moved, s.b, s.r, n * mult * m_.failure_rate);
        } else {
          send(0, done, s.v, s.a, moved, s.r, n * exit);
          send(0, killed, s.v, s.a, moved, s.r, n * mult * m_.failure_rate);
        }
      }
    };
    serve(s.a, sn, act_n_, true);
    serve(s.b, sh, act_h_, false);

    if (c.failed > 0) {
      send(0, {c.busy, c.fresh, c.failed - 1}, s.v, s.a, s.b, s.r, c.failed * m_.repair_rate);
    }

    // Retrials.
    const bool success = policy::retrial_succeeds(c, S, G, strict);
    for (int p = 0; p < wr_; ++p) {
      if (s.r[p] == 0) continue;
      const double n = s.r[p];
      const int pp = act_r_[p];
      auto moved = s.r;
      --moved[p];
      for (int q = 0; q < wr_; ++q) {
        if (q == p) continue;
        double rate = rt.subgen(pp, act_r_[q]);
        if (!success) rate += rt.exits[1](pp) * rt.init(act_r_[q]);
        if (rate == 0.0) continue;
        auto next = moved;
        ++next[q];
        send(0, c, s.v, s.a, s.b, next, n * rate);
      }
      send(-1, c, s.v, s.a, s.b, moved, n * rt.exits[0](pp));
      if (success) {
        const Cell tc{c.busy + 1, c.fresh + 1, c.failed};
        for (int q = 0; q < wn_; ++q) {
          auto a = s.a;
          ++a[q];
          send(-1, tc, s.v, a, s.b, moved, n * rt.exits[1](pp) * sn.init(act_n_[q]));
        }
      }
    }
  }

  const std::vector<int>& active_new() const { return act_n_; }
  const std::vector<int>& active_handoff() const { return act_h_; }
  const std::vector<int>& active_retrial() const { return act_r_; }

 private:
  const ModelParams& m_;
  const GeneratorOptions& o_;
  int L_;
  // Occupancy vectors only cover phases reachable from the initial vector.
  std::vector<int> act_n_, act_h_, act_r_;
  int wn_, wh_, wr_;
  CompositionCache comps_;
};

}  // namespace

SparseMatrix aggregated_diag(const ModelParams& m, const GeneratorOptions& o, const LevelLayout& lay,
                             bool truncation_level) {
  Enumerator en(m, o);
  SparseMatrix out(lay.dimension, lay.dimension);
  for (std::size_t ci = 0; ci < lay.cells.size(); ++ci) {
    const Cell c = lay.cells[ci];
    for (Index k = 0; k < lay.block_size[ci]; ++k) {
      const Index row = lay.offset[ci] + k;
      double outflow = 0.0;
      en.for_each(lay.level, c, k, truncation_level,
                  [&](int shift, const Cell& tc, Index tl, double rate) {
                    outflow += rate;
                    if (shift != 0) return;
                    const int ti = lay.find(tc);
                    if (ti < 0) throw std::logic_error("aggregated_diag: inadmissible target cell");
                    out.add(row, lay.offset[ti] + tl, rate);
                  });
      out.add(row, row, -outflow);
    }
  }
  out.canonicalize();
  return out;
}

SparseMatrix aggregated_upper(const ModelParams& m, const GeneratorOptions& o,
                              const LevelLayout& from, const LevelLayout& to) {
  Enumerator en(m, o);
  SparseMatrix out(from.dimension, to.dimension);
  for (std::size_t ci = 0; ci < from.cells.size(); ++ci) {
    const Cell c = from.cells[ci];
    if (!policy::new_joins_orbit(c, m.channels, m.guard)) continue;
    for (Index k = 0; k < from.block_size[ci]; ++k) {
      en.for_each(from.level, c, k, false, [&](int shift, const Cell& tc, Index tl, double rate) {
        if (shift != 1) return;
        out.add(from.offset[ci] + k, to.offset_of(tc) + tl, rate);
      });
    }
  }
  out.canonicalize();
  return out;
}

SparseMatrix aggregated_lower(const ModelParams& m, const GeneratorOptions& o,
                              const LevelLayout& from, const LevelLayout& to) {
  Enumerator en(m, o);
  SparseMatrix out(from.dimension, to.dimension);
  for (std::size_t ci = 0; ci < from.cells.size(); ++ci) {
    const Cell c = from.cells[ci];
    for (Index k = 0; k < from.block_size[ci]; ++k) {
      en.for_each(from.level, c, k, false, [&](int shift, const Cell& tc, Index tl, double rate) {
        if (shift != -1) return;
        out.add(from.offset[ci] + k, to.offset_of(tc) + tl, rate);
      });
    }
  }
  out.canonicalize();
  return out;
}

CellRates aggregated_cell_rates(const ModelParams& m, const GeneratorOptions& o, int level,
                                const Cell& c) {
  Enumerator en(m, o);
  const Index n = phase_block_size(m, c, level, o);
  CellRates r;
  r.handoff_arrival = r.new_arrival = r.handoff_exit = r.new_exit = r.orbit_leave =
      r.orbit_attempt = Vector::Zero(n);
  const Vector ch = m.arrivals.handoff.rowwise().sum();
  const Vector cn = m.arrivals.fresh.rowwise().sum();
  for (Index k = 0; k < n; ++k) {
    const LocalState s = en.decode(c, level, k);
    r.handoff_arrival(k) = ch(s.v);
    r.new_arrival(k) = cn(s.v);
    for (std::size_t p = 0; p < s.a.size(); ++p)
      r.new_exit(k) += s.a[p] * m.service_new.exits[0](en.active_new()[p]);
    for (std::size_t p = 0; p < s.b.size(); ++p)
      r.handoff_exit(k) += s.b[p] * m.service_handoff.exits[0](en.active_handoff()[p]);
    for (std::size_t p = 0; p < s.r.size(); ++p) {
      r.orbit_leave(k) += s.r[p] * m.retrial.exits[0](en.active_retrial()[p]);
      r.orbit_attempt(k) += s.r[p] * m.retrial.exits[1](en.active_retrial()[p]);
    }
  }
  return r;
}

}  // namespace rqbd::detail
