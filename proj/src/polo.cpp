#include "lowrank/polo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace lowrank {

// --- hyperparameters -------------------------------------------------------

double HyperParams::log_term(int k, std::size_t M) const {
  return std::max(1.0, std::log(static_cast<double>(M) * k / delta));
}

double HyperParams::alpha(int k, std::size_t M) const {
  if (c_alpha == 0.0) return 0.0;
  return c_alpha * std::sqrt(gamma * (A / xi_bonus + static_cast<double>(d) * d) * log_term(k, M));
}

double HyperParams::lambda(int k, std::size_t M) const {
  return c_lambda * d * log_term(k, M);
}

EpochSchedule EpochSchedule::make(int K, int L) {
  if (K < 1 || L < 1) throw std::invalid_argument("EpochSchedule: K and L must be >= 1");
  EpochSchedule out;
  for (int k = 1; k <= K; k += L) out.epoch_starts.push_back(k);
  out.n_epochs = static_cast<int>(out.epoch_starts.size());
  return out;
}

int EpochSchedule::epoch_of(int k) const {
  const auto it = std::upper_bound(epoch_starts.begin(), epoch_starts.end(), k);
  if (it == epoch_starts.begin()) throw std::out_of_range("EpochSchedule: episode before k_1");
  return static_cast<int>(it - epoch_starts.begin());
}

bool EpochSchedule::is_start(int k) const {
  return std::binary_search(epoch_starts.begin(), epoch_starts.end(), k);
}

namespace {

int epoch_length(int K, int A, int d, double gamma, double xi) {
  const double raw = std::sqrt(static_cast<double>(K)) / std::sqrt(static_cast<double>(A)) / d * xi *
                     (1.0 - gamma);
  return std::max(1, static_cast<int>(std::lround(raw)));
}

double learning_rate(int A, int L, double gamma) {
  return (1.0 - gamma) * std::sqrt(std::log(static_cast<double>(A)) / (2.0 * L));
}

void validate(const HyperParams& p) {
  if (p.K < 1) throw std::invalid_argument("schedule: K must be >= 1");
  if (p.A < 2) throw std::invalid_argument("schedule: A must be >= 2 (eta needs ln A > 0)");
  if (p.d < 1) throw std::invalid_argument("schedule: d must be >= 1");
  if (!(p.gamma >= 0.0 && p.gamma < 1.0)) throw std::invalid_argument("schedule: gamma must lie in [0, 1)");
  if (!(p.xi >= 0.0 && p.xi <= 1.0)) throw std::invalid_argument("schedule: xi must lie in [0, 1]");
  if (!(p.xi_bonus > 0.0 && p.xi_bonus <= 1.0)) throw std::invalid_argument("schedule: bonus xi must lie in (0, 1]");
  if (p.L < 1) throw std::invalid_argument("schedule: L must be >= 1");
  if (!(p.eta > 0.0)) throw std::invalid_argument("schedule: eta must be positive");
  if (!(p.c_alpha >= 0.0)) throw std::invalid_argument("schedule: c_alpha must be >= 0");
  if (!(p.c_lambda > 0.0)) throw std::invalid_argument("schedule: c_lambda must be > 0");
}

}  // namespace

Schedule rate_optimal_schedule(int K, int A, int d, double gamma, double c_alpha, double c_lambda) {
  return resolve_schedule(K, A, d, gamma, ScheduleOverrides{std::nullopt, std::nullopt, std::nullopt, c_alpha, c_lambda});
}

Schedule resolve_schedule(int K, int A, int d, double gamma, const ScheduleOverrides& o) {
  if (K < 1) throw std::invalid_argument("schedule: K must be >= 1");
  if (A < 2) throw std::invalid_argument("schedule: A must be >= 2 (eta needs ln A > 0)");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("schedule: gamma must lie in [0, 1)");
  HyperParams p;
  p.K = K;
  p.A = A;
  p.d = d;
  p.gamma = gamma;
  const double xi_theory =
      std::min(1.0, std::pow(static_cast<double>(K), -1.0 / 6.0) * std::sqrt(static_cast<double>(A)) * d /
                        (1.0 - gamma));
  p.xi = o.xi.value_or(xi_theory);
  p.xi_bonus = p.xi > 0.0 ? p.xi : xi_theory;
  p.L = o.L.value_or(epoch_length(K, A, d, gamma, p.xi));
  p.eta = o.eta.value_or(learning_rate(A, p.L, gamma));
  p.c_alpha = o.c_alpha.value_or(0.5);
  p.c_lambda = o.c_lambda.value_or(1.0);
  p.delta = 1.0 / K;
  validate(p);
  return Schedule{p, EpochSchedule::make(K, p.L)};
}

// --- covariance and bonus --------------------------------------------------

CovarianceAccumulator CovarianceAccumulator::from_dataset(const Dataset& data, const Matrix& phi,
                                                          double lambda) {
  if (phi.rows() != static_cast<Eigen::Index>(data.n_states()) * data.n_actions()) {
    throw std::invalid_argument("CovarianceAccumulator: phi rows must equal S*A");
  }
  CovarianceAccumulator cov;
  cov.sum_outer = Matrix::Zero(phi.cols(), phi.cols());
  const Matrix n = data.pair_counts();
  for (int s = 0; s < data.n_states(); ++s) {
    for (int a = 0; a < data.n_actions(); ++a) {
      const double w = n(s, a);
      if (w == 0.0) continue;
      const auto f = phi.row(static_cast<Eigen::Index>(s) * data.n_actions() + a);
      cov.sum_outer.noalias() += w * f.transpose() * f;
    }
  }
  // Rounding in the rank-one updates can leave the two triangles a few ulps
  // apart; downstream code relies on exact symmetry.
  cov.sum_outer = 0.5 * (cov.sum_outer + cov.sum_outer.transpose()).eval();
  cov.count = data.size();
  cov.lambda = lambda;
  return cov;
}

Matrix CovarianceAccumulator::sigma() const {
  return sum_outer + lambda * Matrix::Identity(sum_outer.rows(), sum_outer.cols());
}

BonusFunction bonus_eval(const CovarianceAccumulator& cov, const Matrix& phi, int n_states,
                         int n_actions, double alpha, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("bonus_eval: gamma must lie in [0, 1)");
  if (!(alpha >= 0.0)) throw std::invalid_argument("bonus_eval: alpha must be >= 0");
  const Eigen::LLT<Matrix> llt(cov.sigma());
  if (llt.info() != Eigen::Success || !(cov.lambda > 0.0)) {
    throw std::domain_error("bonus_eval: covariance is not positive definite (lambda must be > 0)");
  }
  BonusFunction out;
  out.alpha = alpha;
  out.values.resize(n_states, n_actions);
  const double cap = 2.0 / (1.0 - gamma);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      const Vector f = phi.row(static_cast<Eigen::Index>(s) * n_actions + a).transpose();
      const double quad = std::max(0.0, f.dot(llt.solve(f)));
      out.values(s, a) = std::min(alpha * std::sqrt(quad), 2.0) / (1.0 - gamma);
      out.values(s, a) = std::min(out.values(s, a), cap);
    }
  }
  return out;
}

ValueTables evaluate_q_hat(const TransitionTable& model, const LossFunction& loss,
                           const BonusFunction& bonus, const Policy& policy, double gamma) {
  ValueTables q = policy_evaluation(model, loss.values() - bonus.values, policy, gamma);
  const double guard = 2.0 / ((1.0 - gamma) * (1.0 - gamma)) + 1.0 / (1.0 - gamma);
  if (q.q.cwiseAbs().maxCoeff() > guard + 1e-9) {
    throw std::logic_error("evaluate_q_hat: |Q_hat| exceeds 2/(1-gamma)^2 + 1/(1-gamma)");
  }
  return q;
}

Policy omd_step(const Policy& policy, const Matrix& q_hat, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("omd_step: eta must be positive");
  if (q_hat.rows() != policy.n_states() || q_hat.cols() != policy.n_actions()) {
    throw std::invalid_argument("omd_step: Q shape mismatch");
  }
  const int A = policy.n_actions();
  Matrix next(policy.n_states(), A);
  Vector logits(A);
  for (int s = 0; s < policy.n_states(); ++s) {
    double top = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) {
      const double p = policy(s, a);
      logits[a] = p > 0.0 ? std::log(p) - eta * q_hat(s, a) : -std::numeric_limits<double>::infinity();
      top = std::max(top, logits[a]);
    }
    double z = 0.0;
    for (int a = 0; a < A; ++a) {
      logits[a] = std::isinf(logits[a]) ? 0.0 : std::exp(logits[a] - top);
      z += logits[a];
    }
    next.row(s) = (logits / z).transpose();
  }
  return Policy(std::move(next));
}

// --- learner ---------------------------------------------------------------

PoloLearner::PoloLearner(const LowRankMdp& mdp, const ModelClass& models, Schedule schedule,
                         std::uint64_t seed, LearnerOptions options)
    : mdp_(mdp),
      models_(models),
      schedule_(std::move(schedule)),
      options_(options),
      rollin_rng_(RngStream(seed).substream("rollin")),
      bernoulli_rng_(RngStream(seed).substream("bernoulli")),
      action_rng_(RngStream(seed).substream("actions")),
      transition_rng_(RngStream(seed).substream("transitions")),
      main_(mdp.n_states(), mdp.n_actions(), DatasetTag::kMain),
      aux_(mdp.n_states(), mdp.n_actions(), DatasetTag::kAux),
      next_policy_(Policy::uniform(mdp.n_states(), mdp.n_actions())),
      played_policy_(next_policy_),
      tilde_sum_(Matrix::Zero(mdp.n_states(), mdp.n_actions())) {
  if (models.n_states() != mdp.n_states() || models.n_actions() != mdp.n_actions()) {
    throw std::invalid_argument("PoloLearner: model class shape differs from the environment");
  }
  if (schedule_.params.A != mdp.n_actions()) {
    throw std::invalid_argument("PoloLearner: schedule was resolved for a different action count");
  }
  if (options_.skip_mle && models.size() != 1) {
    throw std::invalid_argument("PoloLearner: skipping the MLE requires a singleton class");
  }
}

Matrix PoloLearner::avg_policy() const {
  const double xi = schedule_.params.xi;
  const int A = mdp_.n_actions();
  if (k_ == 0) return Matrix::Constant(mdp_.n_states(), A, 1.0 / A);
  return Matrix::Constant(mdp_.n_states(), A, xi / A) + (1.0 - xi) / k_ * tilde_sum_;
}

void PoloLearner::refresh_model(int k) {
  const std::size_t M = models_.size();
  const HyperParams& p = schedule_.params;
  EpochModel em;
  em.epoch = schedule_.epochs.epoch_of(k);
  em.start_k = k;
  if (options_.skip_mle) {
    em.mle_index = 0;
  } else {
    MleResult fit = mle_fit(models_, main_, aux_);
    em.mle_index = fit.index;
    em.mle_scores = std::move(fit.scores);
  }
  em.model = &models_[em.mle_index];
  em.lambda = p.lambda(k, M);
  em.alpha = p.alpha(k, M);
  em.cov = CovarianceAccumulator::from_dataset(main_, em.model->phi, em.lambda);
  em.bonus = bonus_eval(em.cov, em.model->phi, mdp_.n_states(), mdp_.n_actions(), em.alpha, p.gamma);
  epoch_model_ = std::move(em);
}

EpisodeLog PoloLearner::run_episode(const LossFunction& loss) {
  const HyperParams& p = schedule_.params;
  if (k_ >= p.K) throw std::logic_error("PoloLearner: all K episodes already played");
  if (loss.n_states() != mdp_.n_states() || loss.n_actions() != mdp_.n_actions()) {
    throw std::invalid_argument("PoloLearner: loss shape mismatch");
  }
  const int k = ++k_;
  const int A = mdp_.n_actions();
  played_policy_ = next_policy_;
  const Matrix& pi = played_policy_.probs();

  EpisodeLog log;
  log.k = k;
  log.epoch = schedule_.epochs.epoch_of(k);

  const RollInResult roll = roll_in_sample(mdp_, played_policy_, rollin_rng_);
  log.s = roll.state;
  log.roll_in_steps = roll.steps;
  log.roll_in_truncated = roll.truncated;

  log.c = bernoulli_rng_.bernoulli(p.xi) ? 1 : 0;
  auto act = [&](int s) {
    return log.c == 1 ? action_rng_.uniform_int(A) : action_rng_.categorical(pi.row(s).transpose());
  };
  log.a = act(log.s);
  log.s_next = step_sample(mdp_.table(), log.s, log.a, transition_rng_);
  main_.append(log.s, log.a, log.s_next);
  log.a_next = act(log.s_next);
  log.s_next2 = step_sample(mdp_.table(), log.s_next, log.a_next, transition_rng_);
  aux_.append(log.s_next, log.a_next, log.s_next2);

  tilde_sum_ += pi;
  if (schedule_.epochs.is_start(k)) refresh_model(k);

  log.mle_index = epoch_model_.mle_index;
  log.alpha = epoch_model_.alpha;
  log.lambda = epoch_model_.lambda;
  log.max_bonus = epoch_model_.bonus.values.maxCoeff();

  q_hat_ = evaluate_q_hat(epoch_model_.model->table, loss, epoch_model_.bonus, played_policy_, p.gamma);
  if (k < p.K && schedule_.epochs.is_start(k + 1)) {
    next_policy_ = Policy::uniform(mdp_.n_states(), A);
  } else {
    next_policy_ = omd_step(played_policy_, q_hat_.q, p.eta);
  }
  return log;
}

RunArtifact run_polo(const LowRankMdp& mdp, const ModelClass& models, const LossSequence& losses,
                     const Schedule& schedule, std::uint64_t seed, LearnerOptions options,
                     const EpisodeObserver& observer, bool record_policies) {
  if (static_cast<int>(losses.size()) != schedule.params.K) {
    throw std::invalid_argument("run_polo: loss sequence length differs from K");
  }
  PoloLearner learner(mdp, models, schedule, seed, options);
  RunArtifact out;
  out.logs.reserve(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    EpisodeLog log = learner.run_episode(losses[i]);
    if (learner.epoch_model().start_k == log.k) out.snapshots.push_back(learner.epoch_model());
    if (record_policies) out.policies.push_back(learner.played_policy());
    if (observer) observer(learner, log);
    out.logs.push_back(log);
  }
  return out;
}

std::string format_episode_log(const EpisodeLog& l) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%d,%d,%d,%d,%zu,%.17g,%.17g,%.17g", l.k, l.epoch, l.c, l.s,
                l.a, l.s_next, l.a_next, l.s_next2, l.mle_index, l.alpha, l.lambda, l.max_bonus);
  return buf;
}

}  // namespace lowrank
