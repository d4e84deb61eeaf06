#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/adversary.hpp"
#include "lowrank/mdp_core.hpp"
#include "lowrank/model_class.hpp"
#include "lowrank/rng.hpp"

namespace lowrank {

// --- hyperparameters -------------------------------------------------------

struct HyperParams {
  int K = 1;
  double xi = 1.0;   // exploration probability used for the post-roll-in actions
  int L = 1;         // epoch length
  double eta = 0.0;  // OMD learning rate
  double c_alpha = 0.5;
  double c_lambda = 1.0;
  double delta = 1.0;
  double gamma = 0.0;
  int A = 2;
  int d = 1;
  // Exploration level entering alpha_k through A/xi. Equals xi except for the
  // no-exploration ablation, which keeps the bonus of the run it ablates.
  double xi_bonus = 1.0;

  /// max(1, ln(M k / delta)); the floor keeps lambda_k > 0 when M = k = K = 1.
  double log_term(int k, std::size_t M) const;
  /// c_alpha * sqrt(gamma (A/xi_bonus + d^2) ln(M k / delta)).
  double alpha(int k, std::size_t M) const;
  /// c_lambda * d * ln(M k / delta).
  double lambda(int k, std::size_t M) const;
};

/// Epoch starts k_1 = 1, k_{i+1} = k_i + L (1-based episodes); the last epoch
/// is shorter when L does not divide K.
struct EpochSchedule {
  std::vector<int> epoch_starts;
  int n_epochs = 0;

  static EpochSchedule make(int K, int L);
  /// 1-based epoch containing episode k.
  int epoch_of(int k) const;
  bool is_start(int k) const;
};

struct Schedule {
  HyperParams params;
  EpochSchedule epochs;
};

/// Rate-optimal schedule: xi = min(1, K^{-1/6} A^{1/2} d / (1-gamma)),
/// L = max(1, round(K^{1/2} A^{-1/2} d^{-1} xi (1-gamma))),
/// eta = (1-gamma) sqrt(ln A / (2L)), delta = 1/K. Throws for A < 2 or K < 1.
Schedule rate_optimal_schedule(int K, int A, int d, double gamma, double c_alpha = 0.5,
                                double c_lambda = 1.0);

/// Explicit replacements for the derived constants. An overridden xi feeds the
/// L formula unless L is overridden too, and L feeds eta the same way.
struct ScheduleOverrides {
  std::optional<double> xi;
  std::optional<int> L;
  std::optional<double> eta;
  std::optional<double> c_alpha;
  std::optional<double> c_lambda;
};

Schedule resolve_schedule(int K, int A, int d, double gamma, const ScheduleOverrides& overrides);

// --- covariance and bonus --------------------------------------------------

/// Sigma_hat = sum over D of phi_hat phi_hat^T + lambda I.
struct CovarianceAccumulator {
  Matrix sum_outer;
  std::size_t count = 0;
  double lambda = 0.0;

  static CovarianceAccumulator from_dataset(const Dataset& data, const Matrix& phi, double lambda);
  Matrix sigma() const;
};

struct BonusFunction {
  Matrix values;  // S x A
  double alpha = 0.0;
};

/// b(s,a) = min(alpha ||phi(s,a)||_{Sigma^{-1}}, 2) / (1 - gamma).
/// Throws std::domain_error when Sigma_hat is not positive definite.
BonusFunction bonus_eval(const CovarianceAccumulator& cov, const Matrix& phi, int n_states,
                         int n_actions, double alpha, double gamma);

/// Exact Q of `policy` in (model, loss - bonus). Throws std::logic_error if
/// |Q| exceeds 2/(1-gamma)^2 + 1/(1-gamma).
ValueTables evaluate_q_hat(const TransitionTable& model, const LossFunction& loss,
                           const BonusFunction& bonus, const Policy& policy, double gamma);

/// Exponential-weights step pi'(a|s) ∝ pi(a|s) exp(-eta Q(s,a)), in log space.
Policy omd_step(const Policy& policy, const Matrix& q_hat, double eta);

// --- learner ---------------------------------------------------------------

struct EpisodeLog {
  int k = 0;
  int epoch = 0;
  int c = 0;
  int s = 0;
  int a = 0;
  int s_next = 0;
  int a_next = 0;
  int s_next2 = 0;
  std::size_t mle_index = 0;
  double alpha = 0.0;
  double lambda = 0.0;
  double max_bonus = 0.0;
  int roll_in_steps = 0;
  bool roll_in_truncated = false;
};

/// Everything that stays frozen for one epoch.
struct EpochModel {
  int epoch = 0;
  int start_k = 0;
  std::size_t mle_index = 0;
  std::vector<double> mle_scores;  // empty when the MLE was skipped
  const ModelCandidate* model = nullptr;
  CovarianceAccumulator cov;
  double alpha = 0.0;
  double lambda = 0.0;
  BonusFunction bonus;
};

struct LearnerOptions {
  /// Known-feature variant: the class must be a singleton and is never refit.
  bool skip_mle = false;
};

/// POLO's mutable state and episode loop.
///
/// Episode k: roll in s_k ~ d^{pi~_k}; draw c_k ~ Bernoulli(xi); take a_k at
/// s_k and a'_k at s'_k from the uniform policy when c_k = 1 and from pi~_k
/// otherwise, appending one tuple to D and one to D'. At an epoch start the
/// model is refit by MLE on D u D' (including episode k's tuples) and the
/// covariance, alpha, lambda and bonus are frozen for the epoch. Q_hat_k is
/// pi~_k's value in (P_hat, l_k - b_hat); pi~_{k+1} is uniform at an epoch
/// start and the exponential-weights update of pi~_k otherwise.
class PoloLearner {
 public:
  PoloLearner(const LowRankMdp& mdp, const ModelClass& models, Schedule schedule,
              std::uint64_t seed, LearnerOptions options = {});
  // The learner keeps references to the environment and the class.
  PoloLearner(LowRankMdp&&, const ModelClass&, Schedule, std::uint64_t, LearnerOptions = {}) = delete;
  PoloLearner(const LowRankMdp&, ModelClass&&, Schedule, std::uint64_t, LearnerOptions = {}) = delete;

  EpisodeLog run_episode(const LossFunction& loss);

  int episodes_done() const { return k_; }
  const Schedule& schedule() const { return schedule_; }
  const ModelClass& models() const { return models_; }
  const Dataset& main_data() const { return main_; }
  const Dataset& aux_data() const { return aux_; }
  /// Policy for the next episode.
  const Policy& policy_tilde() const { return next_policy_; }
  /// Policy played in the last completed episode.
  const Policy& played_policy() const { return played_policy_; }
  const ValueTables& q_hat() const { return q_hat_; }
  const EpochModel& epoch_model() const { return epoch_model_; }
  /// xi U + (1 - xi) mean of pi~_1..pi~_k after k episodes.
  Matrix avg_policy() const;
  const Matrix& tilde_sum() const { return tilde_sum_; }

 private:
  void refresh_model(int k);

  const LowRankMdp& mdp_;
  const ModelClass& models_;
  Schedule schedule_;
  LearnerOptions options_;
  RngStream rollin_rng_;
  RngStream bernoulli_rng_;
  RngStream action_rng_;
  RngStream transition_rng_;
  Dataset main_;
  Dataset aux_;
  Policy next_policy_;
  Policy played_policy_;
  ValueTables q_hat_;
  EpochModel epoch_model_;
  Matrix tilde_sum_;
  int k_ = 0;
};

struct RunArtifact {
  std::vector<EpisodeLog> logs;
  std::vector<EpochModel> snapshots;
  std::vector<Policy> policies;  // pi~_k per episode, when recorded
};

using EpisodeObserver = std::function<void(const PoloLearner&, const EpisodeLog&)>;

/// Runs all K episodes. The observer sees the learner after each episode,
/// before the state is advanced further.
RunArtifact run_polo(const LowRankMdp& mdp, const ModelClass& models, const LossSequence& losses,
                     const Schedule& schedule, std::uint64_t seed, LearnerOptions options = {},
                     const EpisodeObserver& observer = {}, bool record_policies = false);

/// One delimited line per episode: k,epoch,c,s,a,s',a',s'',mle_index,alpha,lambda,max_bonus.
std::string format_episode_log(const EpisodeLog& log);
inline constexpr const char* kEpisodeLogHeader =
    "k,epoch,c,s,a,s_next,a_next,s_next2,mle_index,alpha,lambda,max_bonus";

}  // namespace lowrank
