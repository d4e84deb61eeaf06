#pragma once
// Independent reference computations for the test suite. Each oracle uses a
// different method from the production code: truncated series and power
// iteration instead of linear solves, exhaustive enumeration instead of
// dynamic programming, per-tuple loops instead of count aggregation.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "lowrank/mdp_core.hpp"
#include "lowrank/model_class.hpp"

namespace oracle {

using lowrank::Matrix;
using lowrank::Vector;

// P^pi built entry by entry.
inline Matrix policy_kernel(const lowrank::TransitionTable& t, const Matrix& pi) {
  Matrix out = Matrix::Zero(t.n_states, t.n_states);
  for (int s = 0; s < t.n_states; ++s)
    for (int a = 0; a < t.n_actions; ++a)
      for (int s2 = 0; s2 < t.n_states; ++s2) out(s, s2) += pi(s, a) * t.p(s * t.n_actions + a, s2);
  return out;
}

/// V^pi by value iteration of the Bellman evaluation operator for `iters` sweeps.
inline Vector power_iteration_value(const lowrank::TransitionTable& t, const Matrix& loss, const Matrix& pi,
                                    double gamma, int iters) {
  const Matrix ppi = policy_kernel(t, pi);
  Vector lpi(t.n_states);
  for (int s = 0; s < t.n_states; ++s) lpi(s) = pi.row(s).dot(loss.row(s));
  Vector v = Vector::Zero(t.n_states);
  for (int i = 0; i < iters; ++i) v = lpi + gamma * ppi * v;
  return v;
}

/// State occupancy by the truncated series (1-gamma) sum_{h<=H} gamma^h d0^T (P^pi)^h.
inline Vector truncated_occupancy(const lowrank::TransitionTable& t, const Matrix& pi, const Vector& d0,
                                  double gamma, int horizon) {
  const Matrix ppi = policy_kernel(t, pi);
  Eigen::RowVectorXd dh = d0.transpose();
  Vector acc = Vector::Zero(t.n_states);
  double w = 1.0 - gamma;
  for (int h = 0; h <= horizon; ++h) {
    acc += w * dh.transpose();
    dh = dh * ppi;
    w *= gamma;
  }
  return acc;
}

/// Calls f on every deterministic policy (A^S of them) as an action vector.
inline void for_each_deterministic(int S, int A, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> acts(static_cast<std::size_t>(S), 0);
  while (true) {
    f(acts);
    int i = 0;
    while (i < S && ++acts[static_cast<std::size_t>(i)] == A) acts[static_cast<std::size_t>(i++)] = 0;
    if (i == S) return;
  }
}

inline Matrix deterministic_table(const std::vector<int>& acts, int A) {
  Matrix pi = Matrix::Zero(static_cast<Eigen::Index>(acts.size()), A);
  for (std::size_t s = 0; s < acts.size(); ++s) pi(static_cast<Eigen::Index>(s), acts[s]) = 1.0;
  return pi;
}

struct BestPolicy {
  double value = std::numeric_limits<double>::infinity();
  std::vector<int> actions;
};

/// Minimum of d0 . V^pi over all deterministic policies, values by power iteration.
inline BestPolicy best_deterministic(const lowrank::TransitionTable& t, const Matrix& loss, const Vector& d0,
                                     double gamma) {
  BestPolicy best;
  const int iters = static_cast<int>(std::ceil(std::log(1e-14) / std::log(gamma))) + 50;
  for_each_deterministic(t.n_states, t.n_actions, [&](const std::vector<int>& acts) {
    const Vector v = power_iteration_value(t, loss, deterministic_table(acts, t.n_actions), gamma, iters);
    const double value = d0.dot(v);
    if (value < best.value - 1e-13) {
      best.value = value;
      best.actions = acts;
    }
  });
  return best;
}

/// sup over vertices g in {0,1}^S of ||sum_s mu(s) g(s)||_2 by plain bitmask enumeration.
inline std::pair<double, std::vector<int>> regularity_by_vertices(const Matrix& mu) {
  const int S = static_cast<int>(mu.rows());
  double best = -1.0;
  std::vector<int> arg;
  for (unsigned long mask = 0; mask < (1UL << S); ++mask) {
    Vector sum = Vector::Zero(mu.cols());
    std::vector<int> g(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
      g[static_cast<std::size_t>(s)] = (mask >> s) & 1UL;
      if (g[static_cast<std::size_t>(s)]) sum += mu.row(s).transpose();
    }
    if (sum.norm() > best + 1e-12) {
      best = sum.norm();
      arg = g;
    }
  }
  return {best, arg};
}

/// Sum of ln max(P, floor) over individual tuples, divided by their number.
inline double per_tuple_log_likelihood(const lowrank::ModelCandidate& m,
                                       const std::vector<lowrank::Transition>& tuples) {
  double total = 0.0;
  for (const auto& t : tuples) {
    const double p = m.table.p(static_cast<Eigen::Index>(t.s) * m.table.n_actions + t.a, t.s_next);
    total += std::log(std::max(p, lowrank::kLikelihoodFloor));
  }
  return total / static_cast<double>(tuples.size());
}

/// sum_i phi_i phi_i^T + lambda I over individual tuples.
inline Matrix per_tuple_covariance(const std::vector<lowrank::Transition>& tuples, const Matrix& phi, int A,
                                   double lambda) {
  Matrix out = lambda * Matrix::Identity(phi.cols(), phi.cols());
  for (const auto& t : tuples) {
    const Vector f = phi.row(static_cast<Eigen::Index>(t.s) * A + t.a).transpose();
    out += f * f.transpose();
  }
  return out;
}

}  // namespace oracle
