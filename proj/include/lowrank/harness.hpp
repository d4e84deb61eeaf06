#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/adversary.hpp"
#include "lowrank/diagnostics.hpp"
#include "lowrank/mdp_core.hpp"
#include "lowrank/model_class.hpp"
#include "lowrank/polo.hpp"

namespace lowrank {

enum class Algo { kPolo, kUniform, kKnownFeatures, kGreedy, kNoExploration };

std::string algo_name(Algo algo);
/// Accepts "polo", "uniform", "known_features", "greedy", "no_exploration".
std::optional<Algo> parse_algo(const std::string& name);

/// Optimal deterministic policy of (P, mean loss); equivalently the best fixed
/// policy in hindsight for the whole sequence.
OptimalSolution comparator_solution(const TransitionTable& table, const LossSequence& losses, double gamma);
Policy comparator_policy(const LowRankMdp& mdp, const LossSequence& losses);

/// xi V^U + (1 - xi) V^{pi~} at the initial distribution, both exact.
double per_episode_value(const LowRankMdp& mdp, const LossFunction& loss, const Policy& pi_tilde,
                         double xi);

struct RegretPoint {
  int k = 0;
  double v_mixed = 0.0;
  double v_comparator = 0.0;
  double cum_regret = 0.0;
};

struct RegretRecord {
  std::vector<RegretPoint> per_episode;
  std::vector<std::uint64_t> seeds;
  double slope_loglog = std::numeric_limits<double>::quiet_NaN();
};

struct SlopeFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;  // false when some cum_regret in the range is not positive
  std::size_t points = 0;
};

/// Least-squares slope of ln cum_regret against ln k over k in [k_min, K].
SlopeFit loglog_slope(const RegretRecord& record, int k_min);

/// One CSV row worth of per-episode data.
struct EpisodeRecord {
  int k = 0;
  int epoch = 0;
  double v_mixed = 0.0;
  double v_comparator = 0.0;
  double cum_regret = 0.0;
  double omd_term = std::numeric_limits<double>::quiet_NaN();
  double optimism_term = std::numeric_limits<double>::quiet_NaN();
  double estbias_term = std::numeric_limits<double>::quiet_NaN();
  double max_bonus = std::numeric_limits<double>::quiet_NaN();
  long mle_index = -1;
  double v_tilde = 0.0;  // V^{pi~_k} under the true model
};

/// Per-epoch-start diagnostics computed from tracked rho, rho', pibar.
struct EpochDiagnostics {
  int k = 0;
  std::size_t mle_index = 0;
  bool mle_correct = false;
  double err_rho = 0.0;      // E_{rho x pibar}[f^2]
  double err_rho_next = 0.0; // E_{rho' x pibar}[f^2]
  double err_mixture = 0.0;  // E_{(rho + rho')/2 x pibar}[f^2]
  double zeta = 0.0;         // ln(M / delta) / k
  double ratio_min = 0.0;    // covariance norm ratio over every candidate phi
  double ratio_max = 0.0;
  double cov_monotone_min_eig = 0.0;  // of Sigma_new - Sigma_prev (matched phi, lambda)
  InequalityCheck initial_state;
  InequalityCheck osb_true;
  InequalityCheck osb_learned;
  bool mle_event = false;  // err under rho and rho' both <= ln(MN/delta)/k
};

struct RunDiagnostics {
  double max_decomposition_residual = 0.0;
  double omd_sum = 0.0;
  double omd_bound = 0.0;
  double optimism_sum = 0.0;
  double optimism_bound = std::numeric_limits<double>::quiet_NaN();
  double estbias_sum = 0.0;
  double exploit_regret = 0.0;  // sum of V^{pi~_k} - V^{pi*}
  double exploration_regret_bound = 0.0;         // exploit_regret + xi K / (1 - gamma)
  double max_bonus = 0.0;
  double bonus_cap = 0.0;
  double min_bonus = 0.0;
  bool simplex_ok = true;
  double min_cov_monotone_eig = 0.0;
  double elliptical_sum = 0.0;
  double elliptical_log_det = 0.0;
  double elliptical_bound = 0.0;
  double elliptical_lambda0 = 0.0;
  int roll_in_truncations = 0;
  std::vector<EpochDiagnostics> epochs;
};

struct RunResult {
  Algo algo = Algo::kPolo;
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;
  RunDiagnostics diag;
  HyperParams params;
  int n_epochs = 0;
  std::optional<std::size_t> true_index;
  std::optional<std::size_t> final_mle_index;
  std::size_t class_size = 1;

  RegretRecord regret() const;
  double cum_regret() const { return episodes.empty() ? 0.0 : episodes.back().cum_regret; }
};

struct DiagnosticsOptions {
  bool epoch_diagnostics = true;  // rho tracking, MLE trend, covariance ratios, inequalities
};

/// Problem shared by every run of an experiment. Loss sequences and model
/// classes are regenerated per seed from named sub-streams of that seed.
struct ExperimentSetup {
  explicit ExperimentSetup(LowRankMdp m) : mdp(std::move(m)) {}

  LowRankMdp mdp;
  int K = 1;
  std::vector<std::uint64_t> seeds;
  std::vector<Algo> algos{Algo::kPolo};
  ScheduleOverrides overrides;
  int class_size = 1;
  double perturb_scale = 0.3;
  std::function<LossSequence(std::uint64_t seed)> losses;
  DiagnosticsOptions diagnostics;
  int jobs = 1;
};

/// Schedule POLO uses for this setup (rate-optimal values plus overrides).
Schedule polo_schedule(const ExperimentSetup& setup);
/// Schedule of an ablation derived from POLO's schedule.
Schedule algo_schedule(const Schedule& polo, Algo algo);
/// The per-seed model class: truth plus distractors from the "distractors" stream.
ModelClass seed_model_class(const ExperimentSetup& setup, std::uint64_t seed);

RunResult run_single(const ExperimentSetup& setup, Algo algo, std::uint64_t seed);

struct AlgoSummary {
  Algo algo = Algo::kPolo;
  std::size_t n_seeds = 0;
  double mean_cum_regret = 0.0;
  double se_cum_regret = 0.0;
  double mean_slope = std::numeric_limits<double>::quiet_NaN();
  double se_slope = std::numeric_limits<double>::quiet_NaN();
  std::size_t slope_fits = 0;
};

struct ExperimentResult {
  std::vector<RunResult> runs;  // algo-major, seed-minor
  std::vector<AlgoSummary> summary;
  Schedule schedule;
};

/// Runs every (algo, seed) pair on up to `setup.jobs` worker threads; results
/// do not depend on the worker count.
ExperimentResult run_experiment(const ExperimentSetup& setup);

AlgoSummary summarize(Algo algo, const std::vector<const RunResult*>& runs, int k_min);

}  // namespace lowrank
