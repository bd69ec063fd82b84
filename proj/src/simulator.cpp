#include "retrialqbd/simulator.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>
#include <thread>

#include "retrialqbd/generator.hpp"

namespace rqbd {

namespace {

enum class EventKind : std::uint8_t { MapJump, ServicePhase, Failure, Repair, OrbitPhase };

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::MapJump: return "map";
    case EventKind::ServicePhase: return "service";
    case EventKind::Failure: return "failure";
    case EventKind::Repair: return "repair";
    case EventKind::OrbitPhase: return "orbit";
  }
  return "?";
}

struct Event {
  double time;
  EventKind kind;
  std::uint32_t id;
  std::uint32_t version;
  bool operator>(const Event& o) const { return time > o.time; }
};

struct Entity {
  CallType type = CallType::New;
  int phase = 0;
  std::uint32_t version = 0;
  bool alive = false;
};

// Slot pool; a slot's version is bumped when its occupant leaves so that
// pending events for it become stale.
class Pool {
 public:
  std::uint32_t add(CallType type, int phase) {
    std::uint32_t id;
    if (!free_.empty()) {
      id = free_.back();
      free_.pop_back();
    } else {
      id = static_cast<std::uint32_t>(items_.size());
      items_.emplace_back();
    }
    Entity& e = items_[id];
    e.type = type;
    e.phase = phase;
    e.alive = true;
    ++size_;
    return id;
  }
  void remove(std::uint32_t id) {
    Entity& e = items_[id];
    e.alive = false;
    ++e.version;
    free_.push_back(id);
    --size_;
  }
  Entity& operator[](std::uint32_t id) { return items_[id]; }
  bool current(std::uint32_t id, std::uint32_t version) const {
    return id < items_.size() && items_[id].alive && items_[id].version == version;
  }
  int size() const { return size_; }

 private:
  std::vector<Entity> items_;
  std::vector<std::uint32_t> free_;
  int size_ = 0;
};

int draw_index(const RowVector& weights, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, weights.sum());
  double x = u(rng);
  for (int k = 0; k < weights.size(); ++k) {
    x -= weights(k);
    if (x < 0.0) return k;
  }
  // Round-off fallback: last positive weight.
  for (int k = weights.size() - 1; k >= 0; --k)
    if (weights(k) > 0.0) return k;
  throw std::logic_error("draw_index: no positive weight");
}

class Replication {
 public:
  Replication(const ModelParams& m, double horizon, double warmup, std::mt19937_64& rng,
              std::ostream* trace)
      : m_(m), horizon_(horizon), warmup_(warmup), rng_(rng), trace_(trace) {
    S_ = m.channels;
    G_ = m.guard;
    theta_ = ph_fundamental_rate(m.retrial);
  }

  SimReplication run() {
    v_ = draw_index(m_.arrivals.stationary, rng_);
    schedule_map();
    while (!queue_.empty()) {
      const Event ev = queue_.top();
      if (ev.time > horizon_) break;
      queue_.pop();
      if (!valid(ev)) continue;
      advance(ev.time);
      handle(ev);
      ++out_.events;
      check_state();
      if (trace_) {
        *trace_ << ev.time << ' ' << last_kind_ << ' ' << busy() << ' ' << fresh_ << ' ' << failed_
                << ' ' << orbit_.size() << '\n';
      }
    }
    advance(horizon_);
    const double window = horizon_ - warmup_;
    out_.eb = area_busy_ / window;
    out_.er = area_orbit_ / window;
    out_.en = area_failed_ / window;
    out_.p_c_avail = area_any_busy_ / window;
    out_.p_drop = handoff_arrivals_ > 0 ? double(handoff_dropped_) / handoff_arrivals_ : 0.0;
    out_.p_block = new_arrivals_ > 0 ? double(new_lost_) / new_arrivals_ : 0.0;
    out_.p_block_immediate = new_arrivals_ > 0 ? double(new_not_admitted_) / new_arrivals_ : 0.0;
    out_.lambda_h_out = handoff_done_ / window;
    out_.theta_r_succ = theta_ * retrial_success_ / window;
    out_.handoff_arrivals = handoff_arrivals_;
    out_.new_arrivals = new_arrivals_;
    return out_;
  }

 private:
  int busy() const { return calls_.size(); }
  Cell cell() const { return Cell{busy(), fresh_, failed_}; }
  bool counting() const { return now_ >= warmup_; }

  double exp_time(double rate) {
    std::exponential_distribution<double> d(rate);
    return now_ + d(rng_);
  }
  void push(double time, EventKind kind, std::uint32_t id, std::uint32_t version) {
    queue_.push(Event{time, kind, id, version});
  }

  bool valid(const Event& ev) const {
    switch (ev.kind) {
      case EventKind::MapJump:
      case EventKind::Repair:
        return true;
      case EventKind::ServicePhase:
      case EventKind::Failure:
        return calls_.current(ev.id, ev.version);
      case EventKind::OrbitPhase:
        return orbit_.current(ev.id, ev.version);
    }
    return false;
  }

  void advance(double t) {
    const double from = std::max(now_, warmup_);
    if (t > from) {
      const double dt = t - from;
      area_busy_ += dt * busy();
      area_orbit_ += dt * orbit_.size();
      area_failed_ += dt * failed_;
      if (busy() >= 1) area_any_busy_ += dt;
    }
    now_ = t;
  }

  void schedule_map() { push(exp_time(-m_.arrivals.no_arrival(v_, v_)), EventKind::MapJump, 0, 0); }

  const PhDistribution& service(CallType t) const {
    return t == CallType::New ? m_.service_new : m_.service_handoff;
  }

  void start_call(CallType type) {
    const PhDistribution& d = service(type);
    const std::uint32_t id = calls_.add(type, draw_index(d.init, rng_));
    if (type == CallType::New) ++fresh_;
    schedule_service(id);
    if (m_.failure_rate > 0.0) {
      push(exp_time(m_.failure_rate), EventKind::Failure, id, calls_[id].version);
    }
  }
  void schedule_service(std::uint32_t id) {
    const Entity& c = calls_[id];
    const PhDistribution& d = service(c.type);
    push(exp_time(-d.subgen(c.phase, c.phase)), EventKind::ServicePhase, id, c.version);
  }
  void end_call(std::uint32_t id) {
    if (calls_[id].type == CallType::New) --fresh_;
    calls_.remove(id);
  }

  void join_orbit() {
    const std::uint32_t id = orbit_.add(CallType::New, draw_index(m_.retrial.init, rng_));
    schedule_orbit(id);
  }
  void schedule_orbit(std::uint32_t id) {
    const Entity& o = orbit_[id];
    push(exp_time(-m_.retrial.subgen(o.phase, o.phase)), EventKind::OrbitPhase, id, o.version);
  }

  void handle(const Event& ev) {
    last_kind_ = kind_name(ev.kind);
    switch (ev.kind) {
      case EventKind::MapJump: return on_map();
      case EventKind::ServicePhase: return on_service(ev.id);
      case EventKind::Failure: return on_failure(ev.id);
      case EventKind::Repair: return on_repair();
      case EventKind::OrbitPhase: return on_orbit(ev.id);
    }
  }

  void on_map() {
    const auto& a = m_.arrivals;
    const int L = a.phases();
    RowVector w(3 * L);
    for (int k = 0; k < L; ++k) {
      w(k) = k == v_ ? 0.0 : a.no_arrival(v_, k);
      w(L + k) = a.handoff(v_, k);
      w(2 * L + k) = a.fresh(v_, k);
    }
    const int pick = draw_index(w, rng_);
    const int kind = pick / L;
    v_ = pick % L;
    if (kind == 1) arrive_handoff();
    if (kind == 2) arrive_new();
    schedule_map();
  }

  void arrive_handoff() {
    if (counting()) ++handoff_arrivals_;
    if (policy::handoff_admitted(cell(), S_)) {
      start_call(CallType::Handoff);
    } else if (counting()) {
      ++handoff_dropped_;
    }
  }

  void arrive_new() {
    if (counting()) ++new_arrivals_;
    const Cell c = cell();
    if (policy::new_admitted(c, S_, G_)) {
      start_call(CallType::New);
      return;
    }
    if (counting()) ++new_not_admitted_;
    if (policy::new_joins_orbit(c, S_, G_)) {
      join_orbit();
    } else if (counting()) {
      ++new_lost_;
    }
  }

  void on_service(std::uint32_t id) {
    Entity& c = calls_[id];
    const PhDistribution& d = service(c.type);
    const int W = d.phases();
    RowVector w(W + 1);
    for (int q = 0; q < W; ++q) w(q) = q == c.phase ? 0.0 : d.subgen(c.phase, q);
    w(W) = d.exits[0](c.phase);
    const int pick = draw_index(w, rng_);
    if (pick < W) {
      c.phase = pick;
      schedule_service(id);
      return;
    }
    if (c.type == CallType::Handoff && counting()) ++handoff_done_;
    end_call(id);
  }

  void on_failure(std::uint32_t id) {
    end_call(id);
    ++failed_;
    ++out_.failures;
    push(exp_time(m_.repair_rate), EventKind::Repair, 0, 0);
  }

  void on_repair() { --failed_; }

  void on_orbit(std::uint32_t id) {
    Entity& o = orbit_[id];
    const PhDistribution& d = m_.retrial;
    const int W = d.phases();
    RowVector w(W + 2);
    for (int q = 0; q < W; ++q) w(q) = q == o.phase ? 0.0 : d.subgen(o.phase, q);
    w(W) = d.exits[0](o.phase);
    w(W + 1) = d.exits[1](o.phase);
    const int pick = draw_index(w, rng_);
    if (pick < W) {
      o.phase = pick;
      schedule_orbit(id);
    } else if (pick == W) {
      orbit_.remove(id);
    } else if (policy::retrial_succeeds(cell(), S_, G_, false)) {
      orbit_.remove(id);
      if (counting()) ++retrial_success_;
      start_call(CallType::New);
    } else {
      o.phase = draw_index(d.init, rng_);
      schedule_orbit(id);
    }
  }

  void check_state() const {
    if (busy() + failed_ > S_ || fresh_ > std::min(busy(), S_ - G_) || failed_ < 0 || fresh_ < 0)
      throw std::logic_error("simulator reached an inadmissible state");
  }

  const ModelParams& m_;
  double horizon_, warmup_;
  std::mt19937_64& rng_;
  std::ostream* trace_;
  int S_ = 0, G_ = 0;
  double theta_ = 0.0;

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  Pool calls_, orbit_;
  int v_ = 0, fresh_ = 0, failed_ = 0;
  double now_ = 0.0;
  const char* last_kind_ = "";

  double area_busy_ = 0, area_orbit_ = 0, area_failed_ = 0, area_any_busy_ = 0;
  std::uint64_t handoff_arrivals_ = 0, handoff_dropped_ = 0, handoff_done_ = 0;
  std::uint64_t new_arrivals_ = 0, new_lost_ = 0, new_not_admitted_ = 0, retrial_success_ = 0;
  SimReplication out_;
};

std::mt19937_64 make_rng(std::uint64_t seed, int replication) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(replication)};
  return std::mt19937_64(seq);
}

}  // namespace

SimReplication simulate_replication(const ModelParams& model, double horizon, double warmup,
                                    std::uint64_t seed, int replication, std::ostream* trace) {
  std::mt19937_64 rng = make_rng(seed, replication);
  Replication r(model, horizon, warmup, rng, trace);
  return r.run();
}

SimEstimate summarize(const std::vector<double>& samples) {
  SimEstimate e;
  const std::size_t n = samples.size();
  if (n == 0) return e;
  for (double x : samples) e.mean += x;
  e.mean /= static_cast<double>(n);
  if (n < 2) return e;
  double ss = 0.0;
  for (double x : samples) ss += (x - e.mean) * (x - e.mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  boost::math::students_t dist(static_cast<double>(n - 1));
  e.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd /
                 std::sqrt(static_cast<double>(n));
  return e;
}

SimEstimates simulate(const ModelParams& model, const SimConfig& config) {
  validate_model(model);
  const double warmup = config.warmup < 0.0 ? 0.1 * config.horizon : config.warmup;
  if (!(config.horizon > warmup) || warmup < 0.0)
    throw std::invalid_argument("simulate: need horizon > warmup >= 0");
  if (config.replications < 1) throw std::invalid_argument("simulate: replications must be >= 1");

  std::vector<SimReplication> runs(config.replications);
  const int workers = std::clamp(config.workers, 1, config.replications);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int r = w; r < config.replications; r += workers) {
          runs[r] = simulate_replication(model, config.horizon, warmup, config.seed, r,
                                         r == 0 ? config.trace : nullptr);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  SimEstimates out;
  out.replications = config.replications;
  out.horizon = config.horizon;
  out.warmup = warmup;
  auto collect = [&runs](double SimReplication::*field) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(r.*field);
    return summarize(v);
  };
  out.eb = collect(&SimReplication::eb);
  out.er = collect(&SimReplication::er);
  out.en = collect(&SimReplication::en);
  out.p_drop = collect(&SimReplication::p_drop);
  out.p_block = collect(&SimReplication::p_block);
  out.p_block_immediate = collect(&SimReplication::p_block_immediate);
  out.p_c_avail = collect(&SimReplication::p_c_avail);
  out.lambda_h_out = collect(&SimReplication::lambda_h_out);
  out.theta_r_succ = collect(&SimReplication::theta_r_succ);
  for (const auto& r : runs) out.failures += r.failures;
  out.runs = std::move(runs);
  return out;
}

std::vector<ArrivalEvent> sample_interarrivals(const MapProcess& map, std::size_t n,
                                               std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_interarrivals: n must be >= 1");
  std::mt19937_64 rng = make_rng(seed, 0);
  const int L = map.phases();
  std::vector<ArrivalEvent> out;
  out.reserve(n);
  int v = draw_index(map.stationary, rng);
  double t = 0.0;
  RowVector w(3 * L);
  while (out.size() < n) {
    std::exponential_distribution<double> d(-map.no_arrival(v, v));
    t += d(rng);
    for (int k = 0; k < L; ++k) {
      w(k) = k == v ? 0.0 : map.no_arrival(v, k);
      w(L + k) = map.handoff(v, k);
      w(2 * L + k) = map.fresh(v, k);
    }
    const int pick = draw_index(w, rng);
    v = pick % L;
    if (pick >= L) out.push_back({t, pick < 2 * L ? CallType::Handoff : CallType::New});
  }
  return out;
}

}  // namespace rqbd
