#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "lowrank/rng.hpp"

namespace lowrank {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense transition kernel. Row `s * n_actions + a` holds P(. | s, a).
struct TransitionTable {
  int n_states = 0;
  int n_actions = 0;
  Matrix p;

  TransitionTable() = default;
  TransitionTable(int states, int actions, Matrix probs);

  Eigen::Index row_index(int s, int a) const { return static_cast<Eigen::Index>(s) * n_actions + a; }
  auto row(int s, int a) const { return p.row(row_index(s, a)); }
};

/**
Finite discounted MDP whose kernel factorizes as P(s'|s,a) = mu(s')^T phi(s,a).

phi is stored as an (S*A) x d matrix with row s*A + a, mu as an S x d matrix.
The transition table is materialized once at construction; entries below
zero are clamped and rows renormalized when their drift is at most 1e-6.
Content checks (norms, stochasticity, regularity) live in validate_low_rank
so that corrupted inputs can be reported rather than rejected.
*/
class LowRankMdp {
 public:
  LowRankMdp(int n_states, int n_actions, int dim, double gamma, Vector init_dist, Matrix phi,
             Matrix mu);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  int dim() const { return dim_; }
  double gamma() const { return gamma_; }
  const Vector& init_dist() const { return init_dist_; }
  const Matrix& phi() const { return phi_; }
  const Matrix& mu() const { return mu_; }
  const TransitionTable& table() const { return table_; }

  auto phi_row(int s, int a) const { return phi_.row(static_cast<Eigen::Index>(s) * n_actions_ + a); }

 private:
  int n_states_;
  int n_actions_;
  int dim_;
  double gamma_;
  Vector init_dist_;
  Matrix phi_;
  Matrix mu_;
  TransitionTable table_;
};

/// Builds the clamped, drift-corrected table for a (mu, phi) factorization.
TransitionTable factored_table(const Matrix& mu, const Matrix& phi, int n_states, int n_actions);

/// Stochastic policy; each row of `probs` is a distribution over actions.
class Policy {
 public:
  Policy() = default;
  explicit Policy(Matrix probs);

  static Policy uniform(int n_states, int n_actions);
  static Policy deterministic(const std::vector<int>& actions, int n_actions);

  int n_states() const { return static_cast<int>(probs_.rows()); }
  int n_actions() const { return static_cast<int>(probs_.cols()); }
  const Matrix& probs() const { return probs_; }
  double operator()(int s, int a) const { return probs_(s, a); }

 private:
  Matrix probs_;
};

/// Per-episode loss table with entries in [0, 1].
class LossFunction {
 public:
  LossFunction() = default;
  explicit LossFunction(Matrix values);

  const Matrix& values() const { return values_; }
  int n_states() const { return static_cast<int>(values_.rows()); }
  int n_actions() const { return static_cast<int>(values_.cols()); }
  double operator()(int s, int a) const { return values_(s, a); }

 private:
  Matrix values_;
};

struct ValueTables {
  Vector v;  // per state
  Matrix q;  // S x A
};

struct OccupancyMeasure {
  Matrix sa;  // S x A, sums to 1
  Vector s;   // state marginal
};

// --- transition access -----------------------------------------------------

/// (mu(s')^T phi(s,a))_{s'} with negatives clamped; throws std::out_of_range.
Vector transition_prob(const LowRankMdp& mdp, int s, int a);

// --- validation ------------------------------------------------------------

struct ValidationCheck {
  std::string name;
  bool passed = true;
  double worst = 0.0;   // worst observed statistic
  double limit = 0.0;   // allowed threshold
  std::string witness;  // where the worst statistic was observed
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool regularity_bound_only = false;

  bool all_passed() const;
  const ValidationCheck* find(const std::string& name) const;
  std::string to_string() const;
};

/// Largest S for which the mu-regularity supremum is computed exactly.
inline constexpr int kExactRegularityMaxStates = 20;

struct RegularityResult {
  double value = 0.0;           // exact supremum, or the sufficient bound
  std::vector<int> maximizer;   // 0/1 vertex achieving the supremum (exact mode only)
  bool bound_only = false;
};

/// sup over g in [0,1]^S of ||sum_s mu(s) g(s)||_2. Exact vertex enumeration
/// for S <= 20, otherwise sqrt(sum_j (sum_s |mu_j(s)|)^2).
RegularityResult mu_regularity(const Matrix& mu);

ValidationReport validate_factorization(const Matrix& mu, const Matrix& phi, int n_states,
                                        int n_actions);
ValidationReport validate_low_rank(const LowRankMdp& mdp);

// --- exact dynamic programming ---------------------------------------------

/// P^pi as an S x S matrix.
Matrix policy_transition(const TransitionTable& table, const Policy& policy);

/// Exact Q/V of `policy` for an arbitrary real-valued S x A loss.
ValueTables policy_evaluation(const TransitionTable& table, const Matrix& loss, const Policy& policy,
                              double gamma);

/// E_{s0 ~ init}[V(s0)].
double initial_value(const ValueTables& values, const Vector& init_dist);

struct OptimalSolution {
  ValueTables values;
  std::vector<int> actions;
  Policy policy;
};

/// Minimum-loss optimal values and a greedy deterministic policy.
/// Value iteration to `tol`, then policy-iteration polishing so that the
/// returned values are the exact values of the returned policy.
/// Ties in the argmin go to the lowest action index.
OptimalSolution value_iteration(const TransitionTable& table, const Matrix& loss, double gamma,
                                double tol);

OccupancyMeasure occupancy_measure(const TransitionTable& table, const Policy& policy,
                                   const Vector& init_dist, double gamma);

// --- sampling --------------------------------------------------------------

struct RollInResult {
  int state = 0;
  int steps = 0;
  bool truncated = false;
};

/// ceil(ln(1e6) / (1 - gamma)).
int roll_in_cap(double gamma);

/// Geometric roll-in: returns s ~ d^pi_P (state marginal of the occupancy).
RollInResult roll_in_sample(const LowRankMdp& mdp, const Policy& policy, RngStream& rng);

int step_sample(const TransitionTable& table, int s, int a, RngStream& rng);

// --- generators ------------------------------------------------------------

/// Random latent-variable low-rank MDP: phi(s,a) ~ Dirichlet(concentration) on
/// the d-simplex, each mu_j a Dirichlet distribution over states. Satisfies
/// every regularity condition by construction.
LowRankMdp random_low_rank(int n_states, int n_actions, int dim, double gamma, RngStream& rng,
                           double phi_concentration = 1.0, double mu_concentration = 1.0);

/// Random S x A loss in [0,1].
LossFunction random_loss(int n_states, int n_actions, RngStream& rng);

}  // namespace lowrank
