#include "lowrank/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace lowrank {

namespace {

// E_{(s~,a~)~sa, s~P(.|s~,a~), a~pi}[g] computed as sum_{s~,a~} sa * P (pi . g).
double one_step_expectation(const TransitionTable& p, const Matrix& sa, const Matrix& pi, const Matrix& g) {
  const Vector pig = pi.cwiseProduct(g).rowwise().sum();  // per next state
  const Vector next = p.p * pig;                           // per (s~, a~) row
  double total = 0.0;
  for (int s = 0; s < p.n_states; ++s) {
    for (int a = 0; a < p.n_actions; ++a) total += sa(s, a) * next(p.row_index(s, a));
  }
  return total;
}

double quad_norm(const Eigen::LLT<Matrix>& llt, const Vector& x) {
  return std::sqrt(std::max(0.0, x.dot(llt.solve(x))));
}

// E_{(s,a)~sa}[||phi(s,a)||_{sigma^{-1}}].
double expected_feature_norm(const Matrix& sa, const Matrix& phi, const Matrix& sigma) {
  const Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw std::domain_error("covariance is not positive definite");
  const auto A = sa.cols();
  double total = 0.0;
  for (Eigen::Index s = 0; s < sa.rows(); ++s) {
    for (Eigen::Index a = 0; a < A; ++a) {
      if (sa(s, a) == 0.0) continue;
      total += sa(s, a) * quad_norm(llt, phi.row(s * A + a).transpose());
    }
  }
  return total;
}

}  // namespace

SimulationResiduals simulation_identity_residuals(const TransitionTable& p_prime, const TransitionTable& p,
                                               const Matrix& loss, const Matrix& bonus,
                                               const Policy& pi, const Vector& init, double gamma) {
  const Matrix shifted = loss - bonus;
  const ValueTables v_prime = policy_evaluation(p_prime, shifted, pi, gamma);
  const ValueTables v_true = policy_evaluation(p, loss, pi, gamma);
  SimulationResiduals out;
  out.lhs = init.dot(v_prime.v) - init.dot(v_true.v);

  // Per-pair integrand -b + gamma (P' - P)^T V for a given V.
  auto integrand = [&](const Vector& v) {
    const Vector diff = (p_prime.p - p.p) * v;
    Matrix h(p.n_states, p.n_actions);
    for (int s = 0; s < p.n_states; ++s) {
      for (int a = 0; a < p.n_actions; ++a) h(s, a) = -bonus(s, a) + gamma * diff(p.row_index(s, a));
    }
    return h;
  };
  const OccupancyMeasure d_prime = occupancy_measure(p_prime, pi, init, gamma);
  const OccupancyMeasure d_true = occupancy_measure(p, pi, init, gamma);
  const double rhs1 = d_prime.sa.cwiseProduct(integrand(v_true.v)).sum() / (1.0 - gamma);
  const double rhs2 = d_true.sa.cwiseProduct(integrand(v_prime.v)).sum() / (1.0 - gamma);
  out.under_p_prime = std::abs(out.lhs - rhs1);
  out.under_p = std::abs(out.lhs - rhs2);
  return out;
}

double occupancy_decomposition_residual(const TransitionTable& p, const Policy& pi1, const Policy& pi2,
                                        const Matrix& g, const Vector& init, double gamma) {
  const OccupancyMeasure d1 = occupancy_measure(p, pi1, init, gamma);
  const Vector pig = pi2.probs().cwiseProduct(g).rowwise().sum();
  const double lhs = d1.s.dot(pig);
  const double back = one_step_expectation(p, d1.sa, pi2.probs(), g);
  const double start = init.dot(pig);
  return std::abs(lhs - (gamma * back + (1.0 - gamma) * start));
}

InequalityCheck initial_state_bound(const Vector& init, const Policy& pi, const Matrix& g,
                                    const Vector& rho_s, const Matrix& pibar, double xi, double gamma) {
  if (!(xi > 0.0)) throw std::invalid_argument("initial_state_bound: xi must be positive");
  InequalityCheck out;
  out.lhs = init.dot(pi.probs().cwiseProduct(g).rowwise().sum());
  const double A = static_cast<double>(pi.n_actions());
  out.rhs = std::sqrt(A / ((1.0 - gamma) * xi) * weighted_square(rho_s, pibar, g));
  return out;
}

InequalityCheck one_step_back_true(const TransitionTable& p_true, const Matrix& phi_true,
                                   const Policy& pi_k, const Vector& init, double gamma,
                                   const Matrix& rho_sa, const Matrix& pibar, int k_i, double xi,
                                   double lambda, const Matrix& g, double B) {
  if (!(xi > 0.0) || !(gamma > 0.0)) {
    throw std::invalid_argument("one_step_back_true: requires xi > 0 and gamma > 0");
  }
  const OccupancyMeasure d = occupancy_measure(p_true, pi_k, init, gamma);
  InequalityCheck out;
  out.lhs = one_step_expectation(p_true, d.sa, pi_k.probs(), g);
  const Matrix sigma = occupancy_covariance(rho_sa, phi_true, k_i, lambda);
  const double lead = expected_feature_norm(d.sa, phi_true, sigma);
  const Vector rho_s = rho_sa.rowwise().sum();
  const double A = static_cast<double>(pi_k.n_actions());
  const double d_dim = static_cast<double>(phi_true.cols());
  out.rhs = lead * std::sqrt(k_i * A / (xi * gamma) * weighted_square(rho_s, pibar, g) +
                             lambda * d_dim * B * B);
  return out;
}

InequalityCheck one_step_back_learned(const TransitionTable& p_hat, const Matrix& phi_hat,
                                      const TransitionTable& p_true, const Policy& pi,
                                      const Vector& init, double gamma, const Vector& rho_s,
                                      const Matrix& pibar, int k_i, double xi, double lambda,
                                      double zeta, const Matrix& g, double B) {
  if (!(xi > 0.0)) throw std::invalid_argument("one_step_back_learned: requires xi > 0");
  const OccupancyMeasure d = occupancy_measure(p_hat, pi, init, gamma);
  InequalityCheck out;
  out.lhs = one_step_expectation(p_hat, d.sa, pi.probs(), g);
  const Matrix sigma = policy_covariance(rho_s, pibar, phi_hat, k_i, lambda);
  const double lead = expected_feature_norm(d.sa, phi_hat, sigma);
  const Vector rho_next = next_state_distribution(p_true, rho_s, pibar);
  const double A = static_cast<double>(pi.n_actions());
  const double d_dim = static_cast<double>(phi_hat.cols());
  out.rhs = lead * std::sqrt(k_i * A / xi * weighted_square(rho_next, pibar, g) +
                             B * B * lambda * d_dim + k_i * B * B * zeta);
  return out;
}

Vector next_state_distribution(const TransitionTable& p, const Vector& rho_s, const Matrix& pibar) {
  Vector out = Vector::Zero(p.n_states);
  for (int s = 0; s < p.n_states; ++s) {
    if (rho_s[s] == 0.0) continue;
    for (int a = 0; a < p.n_actions; ++a) {
      const double w = rho_s[s] * pibar(s, a);
      if (w != 0.0) out += w * p.row(s, a).transpose();
    }
  }
  return out;
}

double weighted_square(const Vector& dist, const Matrix& pibar, const Matrix& f) {
  return dist.dot(pibar.cwiseProduct(f.cwiseAbs2()).rowwise().sum());
}

Matrix policy_covariance(const Vector& rho_s, const Matrix& pibar, const Matrix& phi, int k,
                         double lambda) {
  return occupancy_covariance(rho_s.asDiagonal() * pibar, phi, k, lambda);
}

Matrix occupancy_covariance(const Matrix& rho_sa, const Matrix& phi, int k, double lambda) {
  const auto A = rho_sa.cols();
  const auto d = phi.cols();
  Matrix out = lambda * Matrix::Identity(d, d);
  for (Eigen::Index s = 0; s < rho_sa.rows(); ++s) {
    for (Eigen::Index a = 0; a < A; ++a) {
      const double w = rho_sa(s, a);
      if (w == 0.0) continue;
      const auto f = phi.row(s * A + a);
      out.noalias() += (k * w) * f.transpose() * f;
    }
  }
  return out;
}

RatioRange covariance_norm_ratio(const Matrix& a, const Matrix& b, const Matrix& phi) {
  const Eigen::LLT<Matrix> la(a);
  const Eigen::LLT<Matrix> lb(b);
  if (la.info() != Eigen::Success || lb.info() != Eigen::Success) {
    throw std::domain_error("covariance_norm_ratio: matrices must be positive definite");
  }
  RatioRange out{std::numeric_limits<double>::infinity(), 0.0};
  for (Eigen::Index r = 0; r < phi.rows(); ++r) {
    const Vector x = phi.row(r).transpose();
    const double nb = quad_norm(lb, x);
    if (nb == 0.0) continue;
    const double ratio = quad_norm(la, x) / nb;
    out.min = std::min(out.min, ratio);
    out.max = std::max(out.max, ratio);
  }
  if (out.max == 0.0) out.min = out.max = 1.0;
  return out;
}

EllipticalPotential::EllipticalPotential(int dim, double lambda0)
    : dim_(dim), lambda0_(lambda0), inverse_(Matrix::Identity(dim, dim) / lambda0) {
  if (dim < 1 || !(lambda0 > 0.0)) throw std::invalid_argument("EllipticalPotential: need d >= 1, lambda0 > 0");
}

void EllipticalPotential::add(const Vector& x) {
  if (x.size() != dim_) throw std::invalid_argument("EllipticalPotential: dimension mismatch");
  const Vector mx = inverse_ * x;
  const double t = x.dot(mx);
  sum_ += t;
  log_det_gap_ += 2.0 * std::log1p(t);
  // Sherman-Morrison keeps M_k^{-1} current without refactorizing.
  inverse_ -= (mx * mx.transpose()) / (1.0 + t);
  ++count_;
}

double EllipticalPotential::bound(double B) const {
  return 2.0 * dim_ * std::log1p(static_cast<double>(count_) * B * B / (dim_ * lambda0_));
}

double omd_term_bound(int K, int L, int A, double gamma) {
  return K * std::sqrt(2.0 * std::log(static_cast<double>(A))) /
         (std::sqrt(static_cast<double>(L)) * (1.0 - gamma) * (1.0 - gamma));
}

double optimism_term_bound(int K, int L, int N, int A, std::size_t M, double delta, double xi,
                           double gamma) {
  const double log_term = std::log(static_cast<double>(M) * N / delta);
  return (L + std::sqrt(static_cast<double>(K))) *
         std::sqrt(A * log_term / (xi * std::pow(1.0 - gamma, 3)));
}

}  // namespace lowrank
