#include <doctest.h>

#include <cmath>

#include <Eigen/LU>

#include "lowrank/diagnostics.hpp"
#include "oracles.hpp"

using namespace lowrank;

namespace {

Policy random_policy(int S, int A, RngStream& rng) {
  Matrix probs(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) probs(s, a) = rng.gamma(0.7);
    probs.row(s) /= probs.row(s).sum();
  }
  return Policy(probs);
}

Matrix random_table(int S, int A, double lo, double hi, RngStream& rng) {
  Matrix m(S, A);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * rng.uniform();
  return m;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("both forms of the simulation identity hold exactly on random instances") {
  RngStream rng(301);
  for (int trial = 0; trial < 50; ++trial) {
    const int S = 2 + rng.uniform_int(5), A = 2 + rng.uniform_int(3), d = 1 + rng.uniform_int(3);
    const double gamma = 0.5 + 0.45 * rng.uniform();
    const LowRankMdp p = random_low_rank(S, A, d, gamma, rng);
    const LowRankMdp q = random_low_rank(S, A, d, gamma, rng);
    const Matrix loss = random_table(S, A, 0.0, 1.0, rng);
    const Matrix bonus = random_table(S, A, 0.0, 2.0 / (1.0 - gamma), rng);
    const Policy pi = random_policy(S, A, rng);
    const SimulationResiduals r = simulation_identity_residuals(q.table(), p.table(), loss, bonus, pi, p.init_dist(), gamma);
    CHECK(r.under_p_prime <= 1e-9);
    CHECK(r.under_p <= 1e-9);
    const double direct = initial_value(policy_evaluation(q.table(), loss - bonus, pi, gamma), p.init_dist()) -
                          initial_value(policy_evaluation(p.table(), loss, pi, gamma), p.init_dist());
    CHECK(r.lhs == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("occupancy decomposition holds exactly for any pair of policies") {
  RngStream rng(302);
  for (int trial = 0; trial < 50; ++trial) {
    const int S = 2 + rng.uniform_int(5), A = 2 + rng.uniform_int(3);
    const double gamma = 0.9 * rng.uniform();
    const LowRankMdp p = random_low_rank(S, A, 2, gamma, rng);
    const Matrix g = random_table(S, A, -3.0, 3.0, rng);
    CHECK(occupancy_decomposition_residual(p.table(), random_policy(S, A, rng), random_policy(S, A, rng), g,
                                           p.init_dist(), gamma) <= 1e-9);
  }
}

TEST_CASE("initial-state bound holds when rho dominates (1-gamma) d0 and pibar mixes in xi uniform") {
  RngStream rng(303);
  for (int trial = 0; trial < 50; ++trial) {
    const int S = 5, A = 3;
    const double gamma = 0.8, xi = 0.05 + 0.9 * rng.uniform();
    const LowRankMdp p = random_low_rank(S, A, 3, gamma, rng);
    const Policy pi = random_policy(S, A, rng);
    const OccupancyMeasure occ = occupancy_measure(p.table(), random_policy(S, A, rng), p.init_dist(), gamma);
    const Matrix pibar = xi * Matrix::Constant(S, A, 1.0 / A) + (1.0 - xi) * random_policy(S, A, rng).probs();
    const Matrix g = random_table(S, A, 0.0, 1.0, rng);
    CHECK(initial_state_bound(p.init_dist(), pi, g, occ.s, pibar, xi, gamma).holds());
  }
}

TEST_CASE("one-step-back inequality in the true model on averaged occupancies") {
  RngStream rng(304);
  for (int trial = 0; trial < 30; ++trial) {
    const int S = 6, A = 3, d = 3, k = 1 + rng.uniform_int(20);
    const double gamma = 0.9, xi = 0.1 + 0.8 * rng.uniform(), lambda = 1.0 + 3.0 * rng.uniform(), B = 1.0;
    const LowRankMdp p = random_low_rank(S, A, d, gamma, rng);
    Matrix rho_sa = Matrix::Zero(S, A);
    Matrix tilde = Matrix::Zero(S, A);
    for (int i = 0; i < k; ++i) {
      const Policy pt = random_policy(S, A, rng);
      const Matrix behave = xi * Matrix::Constant(S, A, 1.0 / A) + (1.0 - xi) * pt.probs();
      // Roll in with pi~_i and act with the behaviour policy at the sampled state.
      const Vector ds = occupancy_measure(p.table(), pt, p.init_dist(), gamma).s;
      rho_sa += (ds.asDiagonal() * behave) / k;
      tilde += pt.probs() / k;
    }
    const Matrix pibar = xi * Matrix::Constant(S, A, 1.0 / A) + (1.0 - xi) * tilde;
    const Matrix g = random_table(S, A, 0.0, B, rng);
    const InequalityCheck c = one_step_back_true(p.table(), p.phi(), random_policy(S, A, rng), p.init_dist(), gamma,
                                                 rho_sa, pibar, k, xi, lambda, g, B);
    CHECK(c.holds());
    CHECK(c.lhs >= 0.0);
  }
}

TEST_CASE("next-state distribution and weighted squares") {
  RngStream rng(305);
  const LowRankMdp p = random_low_rank(5, 2, 2, 0.9, rng);
  const Vector rho = p.init_dist();
  const Matrix pibar = random_policy(5, 2, rng).probs();
  const Vector next = next_state_distribution(p.table(), rho, pibar);
  CHECK(next.sum() == doctest::Approx(1.0).epsilon(1e-14));
  Vector ref = Vector::Zero(5);
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 2; ++a) ref += rho(s) * pibar(s, a) * p.table().row(s, a).transpose();
  CHECK((next - ref).cwiseAbs().maxCoeff() <= 1e-14);

  const Matrix f = random_table(5, 2, -1.0, 1.0, rng);
  double ws = 0.0;
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 2; ++a) ws += rho(s) * pibar(s, a) * f(s, a) * f(s, a);
  CHECK(weighted_square(rho, pibar, f) == doctest::Approx(ws).epsilon(1e-14));
}

TEST_CASE("population covariances agree and the self-ratio is one") {
  RngStream rng(306);
  const LowRankMdp p = random_low_rank(5, 3, 3, 0.9, rng);
  const Vector rho = p.init_dist();
  const Matrix pibar = random_policy(5, 3, rng).probs();
  const Matrix a = policy_covariance(rho, pibar, p.phi(), 40, 2.0);
  const Matrix b = occupancy_covariance(rho.asDiagonal() * pibar, p.phi(), 40, 2.0);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
  const RatioRange r = covariance_norm_ratio(a, a, p.phi());
  CHECK(r.min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.max == doctest::Approx(1.0).epsilon(1e-12));
  // Scaling the first matrix by 4 halves every norm.
  const RatioRange half = covariance_norm_ratio(4.0 * a, a, p.phi());
  CHECK(half.max == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("elliptical potential sum stays below the log-determinant gap and the bound") {
  RngStream rng(307);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + rng.uniform_int(5);
    const double lambda0 = 1.0 + rng.uniform();
    EllipticalPotential pot(d, lambda0);
    Matrix m = lambda0 * Matrix::Identity(d, d);
    for (int k = 0; k < 500; ++k) {
      Vector x(d);
      for (int i = 0; i < d; ++i) x(i) = rng.uniform() - 0.5;
      x /= std::max(1.0, x.norm());
      pot.add(x);
      m += x * x.transpose();
    }
    const double log_det = 2.0 * (std::log(m.determinant()) - d * std::log(lambda0));
    CHECK(pot.log_det_gap() == doctest::Approx(log_det).epsilon(1e-9));
    CHECK(pot.sum() <= pot.log_det_gap() + 1e-12);
    CHECK(pot.sum() <= pot.bound());
    CHECK(pot.count() == 500);
  }
  CHECK_THROWS(EllipticalPotential(2, 0.0));
}

TEST_CASE("per-term regret bound formulas") {
  CHECK(omd_term_bound(100, 4, 2, 0.5) == doctest::Approx(100 * std::sqrt(2 * std::log(2.0)) / (2.0 * 0.25)));
  CHECK(optimism_term_bound(100, 4, 25, 3, 8, 0.01, 0.5, 0.5) ==
        doctest::Approx((4 + 10) * std::sqrt(3 * std::log(8 * 25 / 0.01) / (0.5 * 0.125))));
}

}  // TEST_SUITE
