#pragma once

#include <cstddef>

#include "lowrank/mdp_core.hpp"

namespace lowrank {

// Exact numerical counterparts of the analysis identities and inequalities.
// Distributions are dense: rho_s is a state distribution, rho_sa an S x A
// state-action distribution, pibar an S x A row-stochastic policy table.

struct SimulationResiduals {
  double lhs = 0.0;  // V_{P', l-b} - V_{P, l} at the initial distribution
  double under_p_prime = 0.0;  // |lhs - rhs| with the expectation under d_{P'}
  double under_p = 0.0;  // |lhs - rhs| with the expectation under d_{P}
};

/// Both forms of the simulation identity for models (P', l - b) and (P, l).
SimulationResiduals simulation_identity_residuals(const TransitionTable& p_prime, const TransitionTable& p,
                                               const Matrix& loss, const Matrix& bonus,
                                               const Policy& pi, const Vector& init, double gamma);

/// |E_{s~d^{pi1}, a~pi2}[g] - gamma E_{(s~,a~)~d^{pi1}, s~P, a~pi2}[g]
///   - (1-gamma) E_{s~d0, a~pi2}[g]|.
double occupancy_decomposition_residual(const TransitionTable& p, const Policy& pi1, const Policy& pi2,
                                        const Matrix& g, const Vector& init, double gamma);

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds(double slack = 1e-9) const { return lhs <= rhs + slack; }
};

/// E_{s~d0, a~pi}[g] <= sqrt(A / ((1-gamma) xi) E_{s~rho, a~pibar}[g^2]).
InequalityCheck initial_state_bound(const Vector& init, const Policy& pi, const Matrix& g,
                                    const Vector& rho_s, const Matrix& pibar, double xi, double gamma);

/// One-step-back inequality in the true model at an epoch start k_i.
/// rho_sa is the averaged state-action occupancy of pi~_1..pi~_{k_i}.
InequalityCheck one_step_back_true(const TransitionTable& p_true, const Matrix& phi_true,
                                   const Policy& pi_k, const Vector& init, double gamma,
                                   const Matrix& rho_sa, const Matrix& pibar, int k_i, double xi,
                                   double lambda, const Matrix& g, double B);

/// One-step-back inequality in the learned model; meaningful when the MLE
/// error under rho x pibar is at most zeta.
InequalityCheck one_step_back_learned(const TransitionTable& p_hat, const Matrix& phi_hat,
                                      const TransitionTable& p_true, const Policy& pi,
                                      const Vector& init, double gamma, const Vector& rho_s,
                                      const Matrix& pibar, int k_i, double xi, double lambda,
                                      double zeta, const Matrix& g, double B);

/// rho'(s') = sum_{s,a} rho(s) pibar(a|s) P(s'|s,a).
Vector next_state_distribution(const TransitionTable& p, const Vector& rho_s, const Matrix& pibar);

/// E_{s~dist, a~pibar}[f(s,a)^2].
double weighted_square(const Vector& dist, const Matrix& pibar, const Matrix& f);

/// k E_{s~rho, a~pibar}[phi phi^T] + lambda I.
Matrix policy_covariance(const Vector& rho_s, const Matrix& pibar, const Matrix& phi, int k,
                         double lambda);

/// k E_{(s,a)~rho_sa}[phi phi^T] + lambda I.
Matrix occupancy_covariance(const Matrix& rho_sa, const Matrix& phi, int k, double lambda);

struct RatioRange {
  double min = 0.0;
  double max = 0.0;
};

/// Range over rows of phi of ||phi||_{a^{-1}} / ||phi||_{b^{-1}}; rows with a
/// zero norm under b are skipped.
RatioRange covariance_norm_ratio(const Matrix& a, const Matrix& b, const Matrix& phi);

/// Running sum of Tr(G_k M_{k-1}^{-1}) for rank-one G_k = x x^T, M_0 = lambda0 I.
class EllipticalPotential {
 public:
  EllipticalPotential(int dim, double lambda0);

  void add(const Vector& x);

  double sum() const { return sum_; }
  /// 2 ln det M_K - 2 ln det M_0.
  double log_det_gap() const { return log_det_gap_; }
  /// 2 d ln(1 + K B^2 / (d lambda0)) for the number of terms added so far.
  double bound(double B = 1.0) const;
  std::size_t count() const { return count_; }
  double lambda0() const { return lambda0_; }

 private:
  int dim_;
  double lambda0_;
  Matrix inverse_;
  double sum_ = 0.0;
  double log_det_gap_ = 0.0;
  std::size_t count_ = 0;
};

/// K sqrt(2 ln A) / (sqrt(L) (1-gamma)^2).
double omd_term_bound(int K, int L, int A, double gamma);

/// (L + sqrt(K)) sqrt(A ln(M N / delta) / (xi (1-gamma)^3)).
double optimism_term_bound(int K, int L, int N, int A, std::size_t M, double delta, double xi,
                           double gamma);

}  // namespace lowrank
