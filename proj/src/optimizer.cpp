#include "retrialqbd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "retrialqbd/measures.hpp"

namespace rqbd {

void CostSpec::validate() const {
  if (!(c_eb >= 0.0 && c_en >= 0.0 && c_s >= 0.0 && c_r >= 0.0))
    throw std::invalid_argument("cost weights must be nonnegative");
}

void Box::validate() const {
  if (!(x_lo < x_hi && y_lo < y_hi) || !std::isfinite(x_hi) || !std::isfinite(y_hi))
    throw std::invalid_argument("box bounds must satisfy lo < hi and be finite");
}

bool Box::contains(double x, double y) const {
  return x >= x_lo && x <= x_hi && y >= y_lo && y <= y_hi;
}

ModelParams with_load(const ModelParams& base, double lambda, double failure_rate) {
  if (!(lambda > 0.0)) throw std::invalid_argument("arrival intensity must be positive");
  if (!(failure_rate >= 0.0)) throw std::invalid_argument("failure rate must be nonnegative");
  ModelParams m = base;
  m.arrivals = scale_map_to_total(base.arrivals, lambda);
  m.failure_rate = failure_rate;
  return m;
}

double service_ratio(const CostProblem& problem) {
  if (problem.split == ServiceSplit::Nominal) return problem.nominal_ratio;
  return ph_fundamental_rate(problem.base.service_handoff) /
         ph_fundamental_rate(problem.base.service_new);
}

ModelParams cost_model(const CostProblem& problem, double mu, double mu_r) {
  if (!(mu > 0.0) || !(mu_r > 0.0))
    throw std::invalid_argument("service and repair intensities must be positive");
  const double ratio = service_ratio(problem);
  ModelParams m = problem.base;
  m.service_handoff = scale_ph(problem.base.service_handoff, mu * ratio / (1.0 + ratio));
  m.service_new = scale_ph(problem.base.service_new, mu / (1.0 + ratio));
  m.repair_rate = mu_r;
  return m;
}

namespace {

std::string point_message(double mu, double mu_r, const std::string& what) {
  std::ostringstream os;
  os << "cost at (mu=" << mu << ", mu_r=" << mu_r << "): " << what;
  return os.str();
}

}  // namespace

CostError::CostError(double mu_, double mu_r_, const std::string& what)
    : std::runtime_error(point_message(mu_, mu_r_, what)), mu(mu_), mu_r(mu_r_) {}

CostValue evaluate_cost(const CostProblem& problem, double mu, double mu_r, int hint) {
  problem.weights.validate();
  try {
    const ModelParams m = cost_model(problem, mu, mu_r);
    TruncationOptions topt = problem.truncation;
    topt.initial = std::clamp(hint, 1, topt.max_truncation);
    const TruncationResult t = choose_truncation(m, problem.generator, problem.epsilon, topt);
    const BlockTridiagonalGenerator q = build_generator(m, t.truncation, problem.generator);
    const MeasureReport r = evaluate_measures(q, t.distribution);
    CostValue v;
    v.eb = r.eb;
    v.en = r.en;
    const CostSpec& w = problem.weights;
    v.f = w.c_eb * r.eb + w.c_en * r.en + w.c_s * mu + w.c_r * mu_r;
    v.truncation = t.truncation;
    v.tail_mass = t.tail_mass;
    v.met = t.met;
    return v;
  } catch (const std::exception& e) {
    throw CostError(mu, mu_r, e.what());
  }
}

CostObjective::CostObjective(CostProblem problem) : problem_(std::move(problem)) {
  problem_.weights.validate();
}

const CostValue& CostObjective::evaluate(double mu, double mu_r) {
  const std::pair<long long, long long> key{std::llround(mu * 1e4), std::llround(mu_r * 1e4)};
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  const CostValue v = evaluate_cost(problem_, key.first * 1e-4, key.second * 1e-4, hint_);
  ++solves_;
  hint_ = v.truncation;
  return memo_.emplace(key, v).first->second;
}

double CostObjective::operator()(double mu, double mu_r) { return evaluate(mu, mu_r).f; }

void SaConfig::validate() const {
  if (!(cooling > 0.0 && cooling < 1.0)) throw std::invalid_argument("cooling factor must be in (0,1)");
  if (!(stop_threshold > 0.0)) throw std::invalid_argument("stop threshold must be positive");
  if (!(step_scale > 0.0) || !(step_floor > 0.0))
    throw std::invalid_argument("step scale and floor must be positive");
  if (cooling_interval < 1 || patience < 1 || max_evaluations < 1 || pilot_samples < 1 ||
      refinement_budget < 0 || refinement_budget >= max_evaluations)
    throw std::invalid_argument("annealing counts must be positive");
  if (box) {
    box->validate();
    if (!box->contains(x0, y0)) throw std::invalid_argument("initial point outside the box");
  } else if (!(x0 >= 0.0 && y0 >= 0.0)) {
    throw std::invalid_argument("initial point must be nonnegative");
  }
}

namespace {

double reflect(double v, double lo, double hi) {
  // Fold back into [lo, hi]; repeated folds cover very long steps.
  const double width = hi - lo;
  double u = std::fmod(v - lo, 2.0 * width);
  if (u < 0.0) u += 2.0 * width;
  return lo + (u <= width ? u : 2.0 * width - u);
}

class Annealer {
 public:
  Annealer(const Objective2& f, const SaConfig& c) : f_(f), c_(c), rng_(c.seed) {}

  SaResult run() {
    c_.validate();
    x_ = c_.x0;
    y_ = c_.y0;
    fx_ = eval(x_, y_);
    if (!std::isfinite(fx_)) throw std::invalid_argument("objective is not finite at the initial point");
    best_ = {x_, y_, fx_};
    res_.initial_temperature = c_.initial_temperature > 0.0 ? c_.initial_temperature : pilot();
    anneal(res_.initial_temperature);
    if (c_.final_refinement) refine();
    res_.x = best_.x;
    res_.y = best_.y;
    res_.f = best_.f;
    return res_;
  }

 private:
  struct Point {
    double x, y, f;
  };

  void anneal(double t) {
    double mult = 1.0;
    int since_cooling = 0, accepted_in_interval = 0;
    std::vector<double> best_hist{best_.f}, cur_hist{fx_};
    const int budget = c_.max_evaluations - (c_.final_refinement ? c_.refinement_budget : 0);
    for (int it = 1; res_.evaluations < budget; ++it) {
      const auto [px, py] = propose(x_, y_, mult);
      const double fp = eval(px, py);
      SaStep s;
      s.iteration = it;
      s.x = px;
      s.y = py;
      s.f = fp;
      s.temperature = t;
      if (std::isfinite(fp)) {
        const double df = fp - fx_;
        if (df <= 0.0) {
          s.accepted = true;
        } else {
          s.uniform = uniform_(rng_);
          s.accepted = s.uniform < std::exp(-df / t);
        }
        if (s.accepted) {
          x_ = px;
          y_ = py;
          fx_ = fp;
          ++accepted_in_interval;
          if (fp < best_.f) best_ = {px, py, fp};
        }
      }
      s.current_f = fx_;
      s.best_f = best_.f;
      res_.trace.push_back(s);
      best_hist.push_back(best_.f);
      cur_hist.push_back(fx_);

      if (++since_cooling >= c_.cooling_interval) {
        t *= c_.cooling;
        if (c_.adapt_steps) {
          const double rate = static_cast<double>(accepted_in_interval) / c_.cooling_interval;
          if (rate > 0.5) mult = std::min(1.0, mult * 2.0);
          if (rate < 0.2) mult = std::max(1e-9, mult * 0.5);
        }
        since_cooling = 0;
        accepted_in_interval = 0;
      }
      const int n = static_cast<int>(best_hist.size());
      if (n > c_.patience) {
        const auto w = cur_hist.end() - (c_.patience + 1);
        const auto [lo, hi] = std::minmax_element(w, cur_hist.end());
        if (best_hist[n - 1 - c_.patience] - best_.f < c_.stop_threshold &&
            *hi - *lo < c_.stop_threshold) {
          res_.converged = true;
          break;
        }
      }
    }
  }

  // Compass search: try +-h along each axis, halve h when nothing improves.
  void refine() {
    double h = c_.step_scale * std::max({std::abs(best_.x), std::abs(best_.y), c_.step_floor});
    int it = res_.trace.empty() ? 0 : res_.trace.back().iteration;
    const int start = res_.evaluations;
    while (h >= c_.refinement_tolerance && res_.evaluations < c_.max_evaluations) {
      bool improved = false;
      const double dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      for (const auto& d : dirs) {
        if (res_.evaluations >= c_.max_evaluations) break;
        double px = best_.x + h * d[0], py = best_.y + h * d[1];
        if (c_.box) {
          if (!c_.box->contains(px, py)) continue;
        } else if (px < 0.0 || py < 0.0) {
          continue;
        }
        const double fp = eval(px, py);
        SaStep s;
        s.iteration = ++it;
        s.x = px;
        s.y = py;
        s.f = fp;
        s.temperature = 0.0;
        s.accepted = std::isfinite(fp) && fp < best_.f;
        if (s.accepted) {
          best_ = {px, py, fp};
          improved = true;
        }
        s.current_f = best_.f;
        s.best_f = best_.f;
        res_.trace.push_back(s);
        if (improved) break;
      }
      if (!improved) h *= 0.5;
    }
    res_.refinement_evaluations = res_.evaluations - start;
  }

  double eval(double x, double y) {
    ++res_.evaluations;
    double v;
    try {
      v = f_(x, y);
    } catch (const std::exception& e) {
      v = std::numeric_limits<double>::quiet_NaN();
      res_.log.push_back(e.what());
    }
    if (!std::isfinite(v)) {
      ++res_.nonfinite;
      std::ostringstream os;
      os << "rejected non-finite objective at (" << x << ", " << y << ")";
      res_.log.push_back(os.str());
      return std::numeric_limits<double>::quiet_NaN();
    }
    return v;
  }

  std::pair<double, double> propose(double x, double y, double scale) {
    // scale multiplies the base step (adaptive multiplier).
    const double sx = c_.step_scale * std::max(std::abs(x), c_.step_floor) * scale;
    const double sy = c_.step_scale * std::max(std::abs(y), c_.step_floor) * scale;
    double px = x + sx * normal_(rng_);
    double py = y + sy * normal_(rng_);
    if (c_.box) {
      px = reflect(px, c_.box->x_lo, c_.box->x_hi);
      py = reflect(py, c_.box->y_lo, c_.box->y_hi);
    } else {
      px = std::abs(px);
      py = std::abs(py);
    }
    return {px, py};
  }

  // Mean |delta f| between the start and neighbouring proposals.
  double pilot() {
    double sum = 0.0;
    int n = 0;
    for (int k = 0; k < c_.pilot_samples && res_.evaluations < c_.max_evaluations; ++k) {
      const auto [px, py] = propose(x_, y_, 1.0);
      const double fp = eval(px, py);
      if (!std::isfinite(fp)) continue;
      sum += std::abs(fp - fx_);
      ++n;
      if (fp < best_.f) best_ = {px, py, fp};
    }
    const double t = n > 0 ? sum / n : 0.0;
    // A flat neighbourhood still needs a positive temperature.
    return t > 0.0 ? t : 1.0;
  }

  const Objective2& f_;
  SaConfig c_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  double x_ = 0, y_ = 0, fx_ = 0;
  Point best_{0, 0, 0};
  SaResult res_;
};

}  // namespace

SaResult simulated_annealing(const Objective2& objective, const SaConfig& config) {
  Annealer a(objective, config);
  return a.run();
}

void write_trace_csv(std::ostream& os, const SaResult& result) {
  os << "iteration,mu,mu_r,f,T,accepted,uniform,current_f,best_f\n";
  for (const auto& s : result.trace) {
    os << s.iteration << ',' << format_number(s.x) << ',' << format_number(s.y) << ','
       << format_number(s.f) << ',' << format_number(s.temperature) << ',' << (s.accepted ? 1 : 0)
       << ',' << (s.uniform < 0.0 ? std::string() : format_number(s.uniform)) << ','
       << format_number(s.current_f) << ',' << format_number(s.best_f) << '\n';
  }
}

GridResult grid_search(const Objective2& objective, const Box& box, int n) {
  box.validate();
  if (n < 2) throw std::invalid_argument("grid search needs at least 2 points per axis");
  GridResult g;
  g.f = std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) {
    const double x = box.x_lo + (box.x_hi - box.x_lo) * a / (n - 1);
    for (int b0 = 0; b0 < n; ++b0) {
      // Serpentine order keeps consecutive points close.
      const int b = a % 2 == 0 ? b0 : n - 1 - b0;
      const double y = box.y_lo + (box.y_hi - box.y_lo) * b / (n - 1);
      ++g.points;
      double v;
      try {
        v = objective(x, y);
      } catch (const std::exception&) {
        ++g.failures;
        continue;
      }
      if (std::isfinite(v) && v < g.f) {
        g.f = v;
        g.x = x;
        g.y = y;
      } else if (!std::isfinite(v)) {
        ++g.failures;
      }
    }
  }
  if (!std::isfinite(g.f)) throw std::runtime_error("grid search found no finite objective value");
  return g;
}

std::pair<double, double> numerical_gradient(const Objective2& objective, double x, double y,
                                             double h) {
  const double gx = (objective(x + h, y) - objective(x - h, y)) / (2.0 * h);
  const double gy = (objective(x, y + h) - objective(x, y - h)) / (2.0 * h);
  return {gx, gy};
}

}  // namespace rqbd
