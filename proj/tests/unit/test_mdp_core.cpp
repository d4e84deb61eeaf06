#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>

#include "lowrank/hard_instances.hpp"
#include "lowrank/mdp_core.hpp"
#include "oracles.hpp"

using namespace lowrank;

namespace {

HardInstance hard_m0() { return build_hard_instance(HardInstanceParams{}); }

HardInstance hard_target(int i, int a, double eps = 0.1) {
  HardInstanceParams p;
  p.epsilon = eps;
  p.target = HardTarget{i, a};
  return build_hard_instance(p);
}

Policy random_policy(int S, int A, RngStream& rng) {
  Matrix probs(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) probs(s, a) = rng.gamma(1.0);
    probs.row(s) /= probs.row(s).sum();
  }
  return Policy(probs);
}

}  // namespace

TEST_SUITE("mdp_core") {

TEST_CASE("transition_prob routes s11 actions to the matching second-level state") {
  const HardInstance h = hard_m0();
  for (int i = 0; i < h.layout.n_second(); ++i) {
    const Vector p = transition_prob(h.mdp, h.layout.s11(), i);
    Vector expected = Vector::Zero(h.mdp.n_states());
    expected(h.layout.s2(i)) = 1.0;
    CHECK((p - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
}

TEST_CASE("transition_prob from the hub is uniform over the outliers") {
  const HardInstance h = hard_m0();
  const int n_out = h.layout.n_outliers();
  for (int a = 0; a < h.mdp.n_actions(); ++a) {
    const Vector p = transition_prob(h.mdp, h.layout.hub(), a);
    for (int s = 0; s < h.mdp.n_states(); ++s) {
      const double expected = h.layout.is_outlier(s) ? 1.0 / n_out : 0.0;
      CHECK(p(s) == doctest::Approx(expected).epsilon(1e-15));
    }
  }
}

TEST_CASE("rank-one factorization returns mu for every pair") {
  const int S = 4, A = 3;
  Matrix mu(S, 1);
  mu << 0.1, 0.2, 0.3, 0.4;
  const Matrix phi = Matrix::Ones(S * A, 1);
  const LowRankMdp mdp(S, A, 1, 0.5, Vector::Constant(S, 0.25), phi, mu);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) CHECK((transition_prob(mdp, s, a) - mu.col(0)).norm() < 1e-15);
  }
  CHECK_THROWS_AS(transition_prob(mdp, S, 0), std::out_of_range);
  CHECK_THROWS_AS(transition_prob(mdp, 0, A), std::out_of_range);
}

TEST_CASE("hard instance M0 passes every validation check") {
  const ValidationReport r = validate_low_rank(hard_m0().mdp);
  CHECK(r.all_passed());
  CHECK_FALSE(r.regularity_bound_only);
}

TEST_CASE("scaling one phi row by two fails the norm check with that pair as witness") {
  RngStream rng(11);
  const LowRankMdp good = random_low_rank(5, 3, 3, 0.9, rng);
  Matrix phi = good.phi();
  phi.row(2 * 3 + 1) *= 2.0;
  const LowRankMdp bad(5, 3, 3, 0.9, good.init_dist(), phi, good.mu());
  const ValidationReport r = validate_low_rank(bad);
  CHECK_FALSE(r.all_passed());
  const ValidationCheck* norm = r.find("phi_norm");
  REQUIRE(norm != nullptr);
  CHECK_FALSE(norm->passed);
  CHECK(norm->witness == "(s=2, a=1)");
}

TEST_CASE("mu regularity matches exhaustive vertex enumeration") {
  RngStream rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const LowRankMdp mdp = random_low_rank(4, 2, 3, 0.9, rng);
    const RegularityResult got = mu_regularity(mdp.mu());
    const auto [value, vertex] = oracle::regularity_by_vertices(mdp.mu());
    CHECK(got.value == doctest::Approx(value).epsilon(1e-14));
    CHECK(got.maximizer == vertex);
    CHECK_FALSE(got.bound_only);
  }
}

TEST_CASE("mu regularity on a signed mu against enumeration") {
  RngStream rng(13);
  Matrix mu(6, 3);
  for (Eigen::Index i = 0; i < mu.size(); ++i) mu.data()[i] = 2.0 * rng.uniform() - 1.0;
  const auto [value, vertex] = oracle::regularity_by_vertices(mu);
  const RegularityResult got = mu_regularity(mu);
  CHECK(got.value == doctest::Approx(value).epsilon(1e-14));
  CHECK(got.maximizer == vertex);
}

TEST_CASE("mu regularity above twenty states reports the sufficient bound") {
  HardInstanceParams p;
  p.S = 30;
  const HardInstance h = build_hard_instance(p);
  const RegularityResult r = mu_regularity(h.mdp.mu());
  CHECK(r.bound_only);
  CHECK(r.value == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
  const ValidationReport report = validate_low_rank(h.mdp);
  CHECK(report.all_passed());
  CHECK(report.regularity_bound_only);
  CHECK(report.to_string().find("bound-only") != std::string::npos);
}

TEST_CASE("policy evaluation on a single absorbing state") {
  const TransitionTable t(1, 1, Matrix::Ones(1, 1));
  const ValueTables v = policy_evaluation(t, Matrix::Ones(1, 1), Policy::uniform(1, 1), 0.9);
  CHECK(v.v(0) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(v.q(0, 0) == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("optimal reward-space value of the hard instance is 4.86") {
  const HardInstance h = hard_target(1, 2);
  const OptimalSolution opt = value_iteration(h.mdp.table(), h.loss.values(), 0.9, 1e-12);
  const ValueTables reward_values = policy_evaluation(h.mdp.table(), h.reward.values(), opt.policy, 0.9);
  CHECK(std::abs(reward_values.v(h.layout.s11()) - 4.86) <= 1e-9);
}

TEST_CASE("policy evaluation agrees with power iteration on random instances") {
  RngStream rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const LowRankMdp mdp = random_low_rank(5, 3, 3, 0.9, rng);
    const LossFunction loss = random_loss(5, 3, rng);
    const Policy pi = random_policy(5, 3, rng);
    const ValueTables v = policy_evaluation(mdp.table(), loss.values(), pi, 0.9);
    const Vector ref = oracle::power_iteration_value(mdp.table(), loss.values(), pi.probs(), 0.9, 10000);
    CHECK((v.v - ref).cwiseAbs().maxCoeff() <= 1e-8);

    // Bellman residual and q/v consistency.
    const Matrix ppi = policy_transition(mdp.table(), pi);
    const Vector lpi = pi.probs().cwiseProduct(loss.values()).rowwise().sum();
    CHECK((v.v - (lpi + 0.9 * ppi * v.v)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((v.v - pi.probs().cwiseProduct(v.q).rowwise().sum()).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("policy evaluation accepts negative losses") {
  RngStream rng(22);
  const LowRankMdp mdp = random_low_rank(4, 2, 2, 0.8, rng);
  const Matrix loss = -Matrix::Ones(4, 2) * 0.5;
  const ValueTables v = policy_evaluation(mdp.table(), loss, Policy::uniform(4, 2), 0.8);
  CHECK((v.v.array() + 2.5).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("policy evaluation is linear in the loss") {
  RngStream rng(23);
  const LowRankMdp mdp = random_low_rank(6, 3, 4, 0.95, rng);
  const Policy pi = random_policy(6, 3, rng);
  const Matrix l1 = random_loss(6, 3, rng).values();
  const Matrix l2 = random_loss(6, 3, rng).values();
  const ValueTables a = policy_evaluation(mdp.table(), l1, pi, 0.95);
  const ValueTables b = policy_evaluation(mdp.table(), l2, pi, 0.95);
  const ValueTables c = policy_evaluation(mdp.table(), l1 + l2, pi, 0.95);
  CHECK((c.v - a.v - b.v).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((c.q - a.q - b.q).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("policy evaluation rejects a non-stochastic table and gamma outside [0, 1)") {
  Matrix p(2, 2);
  p << 0.5, 0.6, 0.0, 1.0;
  const TransitionTable t(2, 1, p);
  CHECK_THROWS(policy_evaluation(t, Matrix::Zero(2, 1), Policy::uniform(2, 1), 0.5));
  const TransitionTable ok(1, 1, Matrix::Ones(1, 1));
  CHECK_THROWS(policy_evaluation(ok, Matrix::Zero(1, 1), Policy::uniform(1, 1), 1.0));
}

TEST_CASE("value iteration on a targeted hard instance takes a_i* then a*") {
  for (int i = 0; i < 4; ++i) {
    for (int a = 0; a < 5; ++a) {
      const HardInstance h = hard_target(i, a);
      const OptimalSolution opt = value_iteration(h.mdp.table(), h.loss.values(), 0.9, 1e-12);
      CHECK(opt.actions[static_cast<std::size_t>(h.layout.s11())] == i);
      CHECK(opt.actions[static_cast<std::size_t>(h.layout.s2(i))] == a);
    }
  }
}

TEST_CASE("value iteration on zero loss returns zeros and action 0") {
  RngStream rng(31);
  const LowRankMdp mdp = random_low_rank(5, 3, 2, 0.9, rng);
  const OptimalSolution opt = value_iteration(mdp.table(), Matrix::Zero(5, 3), 0.9, 1e-12);
  CHECK(opt.values.v.cwiseAbs().maxCoeff() == 0.0);
  for (int a : opt.actions) CHECK(a == 0);
  CHECK_THROWS_AS(value_iteration(mdp.table(), Matrix::Zero(5, 3), 0.9, 0.0), std::invalid_argument);
}

TEST_CASE("value iteration matches exhaustive deterministic-policy enumeration") {
  RngStream rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const LowRankMdp mdp = random_low_rank(4, 3, 3, 0.9, rng);
    const LossFunction loss = random_loss(4, 3, rng);
    const OptimalSolution opt = value_iteration(mdp.table(), loss.values(), 0.9, 1e-12);
    const oracle::BestPolicy best = oracle::best_deterministic(mdp.table(), loss.values(), mdp.init_dist(), 0.9);
    CHECK(std::abs(initial_value(opt.values, mdp.init_dist()) - best.value) <= 1e-9);
  }
}

TEST_CASE("occupancy of a single absorbing state") {
  const TransitionTable t(1, 3, Matrix::Ones(3, 1));
  Matrix pi(1, 3);
  pi << 0.2, 0.3, 0.5;
  const OccupancyMeasure occ = occupancy_measure(t, Policy(pi), Vector::Ones(1), 0.9);
  CHECK(occ.s(0) == doctest::Approx(1.0));
  CHECK((occ.sa - pi).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("occupancy of the two-state chain at gamma 0.5") {
  Matrix p(2, 2);
  p << 0.0, 1.0, 0.0, 1.0;
  const TransitionTable t(2, 1, p);
  Vector d0(2);
  d0 << 1.0, 0.0;
  const OccupancyMeasure occ = occupancy_measure(t, Policy::uniform(2, 1), d0, 0.5);
  CHECK(occ.s(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(occ.s(1) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("occupancy matches the truncated series on random instances") {
  RngStream rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const LowRankMdp mdp = random_low_rank(5, 3, 3, 0.9, rng);
    const Policy pi = random_policy(5, 3, rng);
    const OccupancyMeasure occ = occupancy_measure(mdp.table(), pi, mdp.init_dist(), 0.9);
    const Vector ref = oracle::truncated_occupancy(mdp.table(), pi.probs(), mdp.init_dist(), 0.9, 400);
    CHECK((occ.s - ref).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(occ.sa.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((occ.sa.rowwise().sum() - occ.s).cwiseAbs().maxCoeff() <= 1e-14);
    // Flow equations: d = (1-gamma) d0 + gamma (P^pi)^T d.
    const Matrix ppi = policy_transition(mdp.table(), pi);
    CHECK((occ.s - (0.1 * mdp.init_dist() + 0.9 * ppi.transpose() * occ.s)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("roll-in with gamma 0 returns the initial state without stepping") {
  RngStream rng(51);
  const LowRankMdp mdp = random_low_rank(4, 2, 2, 0.0, rng);
  RngStream draws(52);
  Vector hist = Vector::Zero(4);
  for (int i = 0; i < 20000; ++i) {
    const RollInResult r = roll_in_sample(mdp, Policy::uniform(4, 2), draws);
    CHECK(r.steps == 0);
    hist(r.state) += 1.0;
  }
  hist /= 20000.0;
  CHECK(0.5 * (hist - mdp.init_dist()).cwiseAbs().sum() <= 0.02);
}

TEST_CASE("roll-in step count is geometric with mean gamma/(1-gamma)") {
  RngStream rng(53);
  const LowRankMdp mdp = random_low_rank(5, 3, 3, 0.9, rng);
  RngStream draws(54);
  const Policy pi = Policy::uniform(5, 3);
  double total = 0.0;
  for (int i = 0; i < 100000; ++i) total += roll_in_sample(mdp, pi, draws).steps;
  CHECK(std::abs(total / 100000.0 - 9.0) <= 0.3);
  CHECK(roll_in_cap(0.9) == static_cast<int>(std::ceil(std::log(1e6) / 0.1 - 1e-9)));
}

TEST_CASE("roll-in state histogram matches the occupancy measure") {
  RngStream rng(55);
  const LowRankMdp mdp = random_low_rank(5, 3, 3, 0.9, rng);
  const Policy pi = random_policy(5, 3, rng);
  const OccupancyMeasure occ = occupancy_measure(mdp.table(), pi, mdp.init_dist(), 0.9);
  RngStream draws(56);
  Vector hist = Vector::Zero(5);
  for (int i = 0; i < 100000; ++i) hist(roll_in_sample(mdp, pi, draws).state) += 1.0;
  hist /= 100000.0;
  CHECK(0.5 * (hist - occ.s).cwiseAbs().sum() <= 0.02);
}

TEST_CASE("step_sample follows a deterministic row") {
  Matrix p(2, 2);
  p << 0.0, 1.0, 1.0, 0.0;
  const TransitionTable t(2, 1, p);
  RngStream rng(61);
  for (int i = 0; i < 100; ++i) {
    CHECK(step_sample(t, 0, 0, rng) == 1);
    CHECK(step_sample(t, 1, 0, rng) == 0);
  }
}

TEST_CASE("step_sample from a second-level state of M0 hits the good state half the time") {
  const HardInstance h = hard_m0();
  RngStream rng(62);
  int good = 0;
  for (int i = 0; i < 100000; ++i) good += step_sample(h.mdp.table(), h.layout.s2(0), 3, rng) == h.layout.good();
  CHECK(std::abs(good / 100000.0 - 0.5) <= 0.01);
}

TEST_CASE("step_sample passes a chi-square goodness-of-fit test") {
  RngStream rng(63);
  const LowRankMdp mdp = random_low_rank(6, 2, 3, 0.9, rng);
  RngStream draws(64);
  for (int s = 0; s < 3; ++s) {
    const int n = 100000;
    Vector counts = Vector::Zero(6);
    for (int i = 0; i < n; ++i) counts(step_sample(mdp.table(), s, 1, draws)) += 1.0;
    const Vector p = mdp.table().row(s, 1).transpose();
    double chi2 = 0.0;
    int cells = 0;
    for (int j = 0; j < 6; ++j) {
      if (p(j) == 0.0) {
        CHECK(counts(j) == 0.0);
        continue;
      }
      const double e = n * p(j);
      chi2 += (counts(j) - e) * (counts(j) - e) / e;
      ++cells;
    }
    const double p_value = boost::math::gamma_q((cells - 1) / 2.0, chi2 / 2.0);
    CHECK(p_value > 0.001);
  }
}

TEST_CASE("random generators satisfy every regularity condition") {
  RngStream rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const LowRankMdp mdp = random_low_rank(6, 3, 4, 0.9, rng, 0.3, 0.3);
    CHECK(validate_low_rank(mdp).all_passed());
  }
}

TEST_CASE("Policy and LossFunction reject invalid tables") {
  Matrix bad(1, 2);
  bad << 0.7, 0.7;
  CHECK_THROWS_AS(Policy{bad}, std::invalid_argument);
  bad << -0.1, 1.1;
  CHECK_THROWS_AS(Policy{bad}, std::invalid_argument);
  CHECK_THROWS_AS(LossFunction{bad}, std::invalid_argument);
  CHECK_THROWS_AS(Policy::deterministic({0, 3}, 2), std::out_of_range);
}

}  // TEST_SUITE
