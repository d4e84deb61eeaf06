#include "lowrank/hard_instances.hpp"

#include <cmath>
#include <stdexcept>

namespace lowrank {

void check_params(const HardInstanceParams& p) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("hard instance: " + what); };
  if (p.d < 8) fail("requires d >= 8");
  if (p.S < p.d + 1) fail("requires S >= d + 1");
  if (p.A < p.d - 3) fail("requires A >= d - 3");
  if (p.K < 2 * (p.d - 4) * p.A) fail("requires K >= 2(d-4)A");
  if (!(p.gamma >= 0.0 && p.gamma < 1.0)) fail("requires gamma in [0, 1)");
  if (!(p.epsilon >= 0.0 && p.epsilon <= 0.25)) fail("requires epsilon in [0, 1/4]");
  if (p.target) {
    if (p.target->i_star < 0 || p.target->i_star >= p.d - 4) fail("i_star out of range [0, d-4)");
    if (p.target->a_star < 0 || p.target->a_star >= p.A) fail("a_star out of range [0, A)");
  }
}

HardInstance build_hard_instance(const HardInstanceParams& params) {
  check_params(params);
  const int d = params.d;
  const int S = params.S;
  const int A = params.A;
  const HardLayout L{d, S};

  Matrix mu = Matrix::Zero(S, d);
  for (int i = 0; i < L.n_second(); ++i) mu(L.s2(i), i) = 1.0;
  mu(L.good(), L.coord_good()) = 1.0;
  mu(L.bad(), L.coord_bad()) = 1.0;
  mu(L.hub(), L.coord_hub()) = 1.0;
  const double share = 1.0 / L.n_outliers();
  for (int j = 0; j < L.n_outliers(); ++j) mu(L.outlier(j), L.coord_outlier()) = share;

  Matrix phi = Matrix::Zero(static_cast<Eigen::Index>(S) * A, d);
  auto row = [A](int s, int a) { return static_cast<Eigen::Index>(s) * A + a; };
  for (int a = 0; a < A; ++a) {
    if (a < L.n_second()) {
      phi(row(L.s11(), a), a) = 1.0;
    } else {
      phi(row(L.s11(), a), L.coord_hub()) = 1.0;
    }
    for (int i = 0; i < L.n_second(); ++i) {
      phi(row(L.s2(i), a), L.coord_good()) = 0.5;
      phi(row(L.s2(i), a), L.coord_bad()) = 0.5;
    }
    phi(row(L.good(), a), L.coord_good()) = 1.0;
    phi(row(L.bad(), a), L.coord_bad()) = 1.0;
    phi(row(L.hub(), a), L.coord_outlier()) = 1.0;
    for (int j = 0; j < L.n_outliers(); ++j) phi(row(L.outlier(j), a), L.coord_outlier()) = 1.0;
  }
  if (params.target) {
    const auto r = row(L.s2(params.target->i_star), params.target->a_star);
    phi(r, L.coord_good()) = 0.5 + params.epsilon;
    phi(r, L.coord_bad()) = 0.5 - params.epsilon;
  }

  Vector init = Vector::Zero(S);
  init[L.s11()] = 1.0;

  Matrix reward = Matrix::Zero(S, A);
  reward.row(L.good()).setOnes();
  for (int j = 0; j < L.n_outliers(); ++j) reward.row(L.outlier(j)).setConstant(0.5);
  Matrix loss = Matrix::Ones(S, A) - reward;

  return HardInstance{params, L,
                      LowRankMdp(S, A, d, params.gamma, std::move(init), std::move(phi), std::move(mu)),
                      LossFunction(std::move(reward)), LossFunction(std::move(loss))};
}

double lower_bound_epsilon(int d, int A, int K) {
  const int arms = (d - 4) * A;
  if (arms < 1 || K < 1) throw std::invalid_argument("lower_bound_epsilon: requires d >= 5, A >= 1, K >= 1");
  if (arms == 1) {
    throw std::invalid_argument(
        "lower_bound_epsilon: (d-4)A = 1 gives epsilon = 0, so every instance coincides with M_0");
  }
  if (K < 2 * arms) throw std::invalid_argument("lower_bound_epsilon: requires K >= 2(d-4)A");
  const double eps = (1.0 / (2.0 * std::sqrt(2.0))) * (1.0 - 1.0 / arms) *
                     std::sqrt(static_cast<double>(arms) / K);
  if (eps > 0.25) throw std::logic_error("lower_bound_epsilon: epsilon exceeds 1/4");
  return eps;
}

double optimal_value_closed_form(double gamma, double epsilon) {
  return policy_value_closed_form(gamma, epsilon, 1.0);
}

double policy_value_closed_form(double gamma, double epsilon, double reach) {
  return gamma * gamma / (1.0 - gamma) * (0.5 + epsilon * reach);
}

double reach_probability(const HardInstance& instance, const Policy& policy) {
  if (!instance.params.target) throw std::invalid_argument("reach_probability: instance has no target");
  const auto& t = *instance.params.target;
  return policy(instance.layout.s11(), t.i_star) * policy(instance.layout.s2(t.i_star), t.a_star);
}

double per_row_kl(double epsilon) {
  const double hi = 0.5 + epsilon;
  const double lo = 0.5 - epsilon;
  double kl = hi * std::log(hi / 0.5);
  if (lo > 0.0) kl += lo * std::log(lo / 0.5);
  return kl;
}

}  // namespace lowrank
