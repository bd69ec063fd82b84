#pragma once

// Independent test oracles: a CTMC enumerated directly from the model
// description for Poisson arrivals with exponential services and retrials,
// and random small models.

#include <map>
#include <random>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "retrialqbd/generator.hpp"
#include "retrialqbd/stochastic.hpp"

namespace oracle {

struct ExpModel {
  int S = 1, G = 0;
  double lambda_h = 0.0, lambda_n = 1.0;
  double mu_h = 1.0, mu_n = 1.0;
  double theta = 1.0, leave = 0.5;  // per orbit call: leave theta*p, attempt theta*(1-p)
  double lambda_f = 0.0, mu_r = 1.0;

  rqbd::ModelParams params() const {
    rqbd::ModelParams m;
    m.arrivals = rqbd::poisson_map(lambda_h, lambda_n);
    m.service_new = rqbd::exponential_ph(mu_n);
    m.service_handoff = rqbd::exponential_ph(mu_h);
    m.retrial = rqbd::exponential_retrial(theta, leave);
    m.channels = S;
    m.guard = G;
    m.failure_rate = lambda_f;
    m.repair_rate = mu_r;
    rqbd::validate_model(m);
    return m;
  }
};

/// (busy, fresh, failed, orbit)
using State = std::tuple<int, int, int, int>;

struct Chain {
  std::vector<State> states;
  std::map<State, int> index;
  Eigen::MatrixXd q;
};

inline Chain build_chain(const ExpModel& m, int M) {
  Chain c;
  for (int l = 0; l <= M; ++l)
    for (int k = 0; k <= m.S; ++k)
      for (int j = 0; j <= std::min(k, m.S - m.G); ++j)
        for (int i = 0; i + k <= m.S; ++i) {
          c.index[{k, j, i, l}] = static_cast<int>(c.states.size());
          c.states.push_back({k, j, i, l});
        }
  const int n = static_cast<int>(c.states.size());
  c.q = Eigen::MatrixXd::Zero(n, n);
  auto add = [&](int from, State to, double rate) {
    if (rate == 0.0) return;
    const int t = c.index.at(to);
    c.q(from, t) += rate;
    c.q(from, from) -= rate;
  };
  for (int s = 0; s < n; ++s) {
    const auto [k, j, i, l] = c.states[s];
    const int h = k - j;
    const bool idle_working = i < m.S - k;
    const bool all_idle_failed = k < m.S && i == m.S - k;
    const bool new_ok = k < m.S - m.G && idle_working;
    if (idle_working) add(s, {k + 1, j, i, l}, m.lambda_h);
    if (new_ok) {
      add(s, {k + 1, j + 1, i, l}, m.lambda_n);
    } else if (k >= m.S - m.G && !all_idle_failed && l < M) {
      add(s, {k, j, i, l + 1}, m.lambda_n);
    }
    if (h > 0) {
      add(s, {k - 1, j, i, l}, h * m.mu_h);
      add(s, {k - 1, j, i + 1, l}, h * m.lambda_f);
    }
    if (j > 0) {
      add(s, {k - 1, j - 1, i, l}, j * m.mu_n);
      add(s, {k - 1, j - 1, i + 1, l}, j * m.lambda_f);
    }
    if (i > 0) add(s, {k, j, i - 1, l}, i * m.mu_r);
    if (l > 0) {
      add(s, {k, j, i, l - 1}, l * m.theta * m.leave);
      if (new_ok) add(s, {k + 1, j + 1, i, l - 1}, l * m.theta * (1.0 - m.leave));
    }
  }
  return c;
}

/// Stationary vector of a dense generator: replace one balance equation by
/// the normalization and solve with full pivoting.
inline Eigen::RowVectorXd dense_stationary(const Eigen::MatrixXd& q) {
  const Eigen::Index n = q.rows();
  Eigen::MatrixXd a = q.transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  return a.fullPivLu().solve(b).transpose();
}

/// Position of an oracle state in the library's level-major ordering.
inline rqbd::Index library_index(const rqbd::BlockTridiagonalGenerator& g, const State& s) {
  const auto [k, j, i, l] = s;
  const rqbd::LevelLayout& lay = g.layouts.at(l);
  const int cell = lay.find(rqbd::Cell{k, j, i});
  if (cell < 0) return -1;
  return g.level_offset(l) + lay.offset[cell];
}

inline Eigen::MatrixXd random_generator(int n, std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> u(0.0, scale);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = i == j ? 0.0 : u(rng);
  return m;
}

/// Random MAP / PH / PH model with small phase counts.
inline rqbd::ModelParams random_model(std::mt19937& rng) {
  using rqbd::Matrix;
  using rqbd::RowVector;
  std::uniform_real_distribution<double> u(0.1, 1.5);
  std::uniform_int_distribution<int> phases(1, 2);
  const int L = phases(rng), W1 = phases(rng), W2 = phases(rng);
  rqbd::ModelParams m;
  Matrix c0 = random_generator(L, rng, 0.5);
  Matrix ch(L, L), cn(L, L);
  for (int a = 0; a < L; ++a)
    for (int b = 0; b < L; ++b) {
      ch(a, b) = 0.5 * u(rng);
      cn(a, b) = 0.5 * u(rng);
    }
  for (int a = 0; a < L; ++a) c0(a, a) = -(c0.row(a).sum() + ch.row(a).sum() + cn.row(a).sum());
  m.arrivals = rqbd::validate_map(c0, ch, cn, 1e-12);
  const auto ph = [&](int w) {
    Matrix s = random_generator(w, rng, 0.5);
    for (int a = 0; a < w; ++a) s(a, a) = -(s.row(a).sum() + u(rng));
    RowVector init(w);
    for (int a = 0; a < w; ++a) init(a) = u(rng);
    init /= init.sum();
    return std::make_pair(init, s);
  };
  const auto [dn, ln] = ph(W1);
  const auto [dh, lh] = ph(W1);
  const auto [g, gm] = ph(W2);
  m.service_new = rqbd::make_service_ph(dn, ln);
  m.service_handoff = rqbd::make_service_ph(dh, lh);
  std::uniform_real_distribution<double> p(0.1, 0.9);
  m.retrial = rqbd::make_retrial_ph_split(g, gm, p(rng));
  std::uniform_int_distribution<int> s(1, 3);
  m.channels = s(rng);
  m.guard = std::uniform_int_distribution<int>(0, m.channels - 1)(rng);
  m.failure_rate = 0.5 * u(rng);
  m.repair_rate = u(rng);
  rqbd::validate_model(m);
  return m;
}

}  // namespace oracle
