#include "lowrank/harness.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include <Eigen/Eigenvalues>

namespace lowrank {

std::string algo_name(Algo algo) {
  switch (algo) {
    case Algo::kPolo: return "polo";
    case Algo::kUniform: return "uniform";
    case Algo::kKnownFeatures: return "known_features";
    case Algo::kGreedy: return "greedy";
    case Algo::kNoExploration: return "no_exploration";
  }
  return "unknown";
}

std::optional<Algo> parse_algo(const std::string& name) {
  for (Algo a : {Algo::kPolo, Algo::kUniform, Algo::kKnownFeatures, Algo::kGreedy, Algo::kNoExploration}) {
    if (algo_name(a) == name) return a;
  }
  return std::nullopt;
}

OptimalSolution comparator_solution(const TransitionTable& table, const LossSequence& losses, double gamma) {
  return value_iteration(table, losses.mean(), gamma, 1e-12);
}

Policy comparator_policy(const LowRankMdp& mdp, const LossSequence& losses) {
  return comparator_solution(mdp.table(), losses, mdp.gamma()).policy;
}

double per_episode_value(const LowRankMdp& mdp, const LossFunction& loss, const Policy& pi_tilde,
                         double xi) {
  if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("per_episode_value: xi must lie in [0, 1]");
  const double v_tilde =
      initial_value(policy_evaluation(mdp.table(), loss.values(), pi_tilde, mdp.gamma()), mdp.init_dist());
  if (xi == 0.0) return v_tilde;
  const Policy uniform = Policy::uniform(mdp.n_states(), mdp.n_actions());
  const double v_uniform =
      initial_value(policy_evaluation(mdp.table(), loss.values(), uniform, mdp.gamma()), mdp.init_dist());
  if (xi == 1.0) return v_uniform;
  return xi * v_uniform + (1.0 - xi) * v_tilde;
}

SlopeFit loglog_slope(const RegretRecord& record, int k_min) {
  SlopeFit fit;
  const int K = static_cast<int>(record.per_episode.size());
  if (k_min < 1 || k_min >= K) return fit;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int k = k_min; k <= K; ++k) {
    const RegretPoint& p = record.per_episode[static_cast<std::size_t>(k - 1)];
    if (!(p.cum_regret > 0.0)) return fit;
    const double x = std::log(static_cast<double>(p.k));
    const double y = std::log(p.cum_regret);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++fit.points;
  }
  const double n = static_cast<double>(fit.points);
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) return fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.ok = true;
  return fit;
}

RegretRecord RunResult::regret() const {
  RegretRecord out;
  out.per_episode.reserve(episodes.size());
  for (const auto& e : episodes) out.per_episode.push_back({e.k, e.v_mixed, e.v_comparator, e.cum_regret});
  out.seeds = {seed};
  const SlopeFit fit = loglog_slope(out, std::max(1, static_cast<int>(episodes.size()) / 4));
  if (fit.ok) out.slope_loglog = fit.slope;
  return out;
}

Schedule polo_schedule(const ExperimentSetup& setup) {
  return resolve_schedule(setup.K, setup.mdp.n_actions(), setup.mdp.dim(), setup.mdp.gamma(), setup.overrides);
}

Schedule algo_schedule(const Schedule& polo, Algo algo) {
  Schedule out = polo;
  if (algo == Algo::kGreedy) out.params.c_alpha = 0.0;
  if (algo == Algo::kNoExploration) out.params.xi = 0.0;  // the bonus keeps POLO's xi
  return out;
}

ModelClass seed_model_class(const ExperimentSetup& setup, std::uint64_t seed) {
  if (setup.class_size <= 1) return ModelClass::singleton(setup.mdp);
  RngStream rng = RngStream(seed).substream("distractors");
  return build_distractor_class(setup.mdp, setup.class_size, rng, setup.perturb_scale);
}

namespace {

double min_eigenvalue(const Matrix& m) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Matrix matched_covariance(const Matrix& counts, const Matrix& phi, double lambda) {
  return occupancy_covariance(counts, phi, 1, lambda);
}

bool on_simplex(const Policy& pi) {
  for (int s = 0; s < pi.n_states(); ++s) {
    if (pi.probs().row(s).minCoeff() < 0.0 || std::abs(pi.probs().row(s).sum() - 1.0) > 1e-12) return false;
  }
  return true;
}

// Exact per-table values shared across the episodes that reuse a table.
struct TableValues {
  double v_star = 0.0;
  double v_uniform = 0.0;
};

}  // namespace

RunResult run_single(const ExperimentSetup& setup, Algo algo, std::uint64_t seed) {
  const LowRankMdp& mdp = setup.mdp;
  const double gamma = mdp.gamma();
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  const Vector& d0 = mdp.init_dist();
  const LossSequence losses = setup.losses(seed);
  if (static_cast<int>(losses.size()) != setup.K) {
    throw std::invalid_argument("run_single: loss sequence length differs from K");
  }

  const OptimalSolution comparator = comparator_solution(mdp.table(), losses, gamma);
  const Policy& pi_star = comparator.policy;
  const Policy uniform = Policy::uniform(S, A);
  std::vector<TableValues> table_values;
  for (const auto& t : losses.tables()) {
    table_values.push_back(
        {initial_value(policy_evaluation(mdp.table(), t.values(), pi_star, gamma), d0),
         initial_value(policy_evaluation(mdp.table(), t.values(), uniform, gamma), d0)});
  }

  const Schedule schedule = algo_schedule(polo_schedule(setup), algo);
  const HyperParams& hp = schedule.params;
  RunResult result;
  result.algo = algo;
  result.seed = seed;
  result.params = hp;
  result.n_epochs = schedule.epochs.n_epochs;
  result.episodes.reserve(static_cast<std::size_t>(setup.K));
  RunDiagnostics& diag = result.diag;
  diag.bonus_cap = 2.0 / (1.0 - gamma);
  diag.omd_bound = omd_term_bound(setup.K, hp.L, A, gamma);

  if (algo == Algo::kUniform) {
    double cum = 0.0;
    for (int k = 1; k <= setup.K; ++k) {
      const TableValues& tv = table_values[losses.table_index(static_cast<std::size_t>(k - 1))];
      EpisodeRecord rec;
      rec.k = k;
      rec.v_mixed = tv.v_uniform;
      rec.v_comparator = tv.v_star;
      rec.v_tilde = tv.v_uniform;
      cum += rec.v_mixed - rec.v_comparator;
      rec.cum_regret = cum;
      diag.exploit_regret += tv.v_uniform - tv.v_star;
      result.episodes.push_back(rec);
    }
    diag.exploration_regret_bound = diag.exploit_regret;
    diag.omd_bound = std::numeric_limits<double>::quiet_NaN();
    return result;
  }

  const ModelClass models =
      algo == Algo::kKnownFeatures ? ModelClass::singleton(mdp) : seed_model_class(setup, seed);
  const std::size_t M = models.size();
  result.class_size = M;
  result.true_index = algo == Algo::kKnownFeatures ? std::optional<std::size_t>(0) : models.true_index();
  LearnerOptions options;
  options.skip_mle = algo == Algo::kKnownFeatures;

  const bool track = setup.diagnostics.epoch_diagnostics;
  Matrix rho_sa_sum = Matrix::Zero(S, A);
  EllipticalPotential potential(mdp.dim(), std::max(1.0, hp.lambda(1, M)));
  RngStream diag_rng = RngStream(seed).substream("diagnostics");
  std::vector<std::optional<double>> hat_star(losses.tables().size());
  std::optional<Matrix> prev_counts;
  double cum = 0.0;
  diag.min_bonus = std::numeric_limits<double>::infinity();
  diag.min_cov_monotone_eig = std::numeric_limits<double>::infinity();

  auto observer = [&](const PoloLearner& learner, const EpisodeLog& log) {
    const int k = log.k;
    const std::size_t t = losses.table_index(static_cast<std::size_t>(k - 1));
    const LossFunction& loss = losses[static_cast<std::size_t>(k - 1)];
    const Policy& pi = learner.played_policy();
    const EpochModel& em = learner.epoch_model();
    if (!on_simplex(learner.policy_tilde())) diag.simplex_ok = false;
    if (log.roll_in_truncated) ++diag.roll_in_truncations;
    potential.add(mdp.phi_row(log.s, log.a).transpose());
    if (track) rho_sa_sum += occupancy_measure(mdp.table(), pi, d0, gamma).sa;

    if (em.start_k == k) {
      std::fill(hat_star.begin(), hat_star.end(), std::nullopt);
      diag.max_bonus = std::max(diag.max_bonus, em.bonus.values.maxCoeff());
      diag.min_bonus = std::min(diag.min_bonus, em.bonus.values.minCoeff());
      const Matrix counts = learner.main_data().pair_counts();
      EpochDiagnostics ed;
      ed.k = k;
      ed.mle_index = em.mle_index;
      ed.mle_correct = result.true_index && *result.true_index == em.mle_index;
      if (prev_counts) {
        const Matrix diff = em.cov.sigma() - matched_covariance(*prev_counts, em.model->phi, em.lambda);
        ed.cov_monotone_min_eig = min_eigenvalue(diff);
        diag.min_cov_monotone_eig = std::min(diag.min_cov_monotone_eig, ed.cov_monotone_min_eig);
      }
      prev_counts = counts;

      if (track) {
        const Matrix rho_sa = rho_sa_sum / k;
        const Vector rho_s = rho_sa.rowwise().sum();
        const Matrix pibar = learner.avg_policy();
        const Matrix f = l1_model_error(em.model->table, mdp.table()).l1_error;
        ed.err_rho = weighted_square(rho_s, pibar, f);
        ed.err_rho_next = weighted_square(next_state_distribution(mdp.table(), rho_s, pibar), pibar, f);
        ed.err_mixture = 0.5 * (ed.err_rho + ed.err_rho_next);
        ed.zeta = std::log(static_cast<double>(M) / hp.delta) / k;
        const double zeta_all = std::log(static_cast<double>(M) * result.n_epochs / hp.delta) / k;
        ed.mle_event = ed.err_rho <= zeta_all && ed.err_rho_next <= zeta_all;

        ed.ratio_min = std::numeric_limits<double>::infinity();
        ed.ratio_max = 0.0;
        for (const auto& cand : models.candidates()) {
          const Matrix sigma_hat = CovarianceAccumulator::from_dataset(learner.main_data(), cand.phi, em.lambda).sigma();
          const Matrix sigma_pop = policy_covariance(rho_s, pibar, cand.phi, k, em.lambda);
          const RatioRange r = covariance_norm_ratio(sigma_hat, sigma_pop, cand.phi);
          ed.ratio_min = std::min(ed.ratio_min, r.min);
          ed.ratio_max = std::max(ed.ratio_max, r.max);
        }

        if (hp.xi > 0.0 && gamma > 0.0) {
          Matrix g(S, A);
          for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = diag_rng.uniform();
          ed.initial_state = initial_state_bound(d0, pi_star, g, rho_s, pibar, hp.xi, gamma);
          ed.osb_true = one_step_back_true(mdp.table(), mdp.phi(), pi, d0, gamma, rho_sa, pibar, k, hp.xi,
                                           em.lambda, g, 1.0);
          ed.osb_learned = one_step_back_learned(em.model->table, em.model->phi, mdp.table(), pi, d0, gamma,
                                                 rho_s, pibar, k, hp.xi, em.lambda, zeta_all, g, 1.0);
        }
      }
      diag.epochs.push_back(ed);
    }

    const TableValues& tv = table_values[t];
    if (!hat_star[t]) {
      hat_star[t] = initial_value(evaluate_q_hat(em.model->table, loss, em.bonus, pi_star, gamma), d0);
    }
    const double v_hat_star = *hat_star[t];
    const double v_tilde = initial_value(policy_evaluation(mdp.table(), loss.values(), pi, gamma), d0);
    const double v_hat_tilde = initial_value(learner.q_hat(), d0);

    EpisodeRecord rec;
    rec.k = k;
    rec.epoch = log.epoch;
    rec.v_tilde = v_tilde;
    rec.v_mixed = hp.xi * tv.v_uniform + (1.0 - hp.xi) * v_tilde;
    rec.v_comparator = tv.v_star;
    cum += rec.v_mixed - rec.v_comparator;
    rec.cum_regret = cum;
    rec.omd_term = v_hat_tilde - v_hat_star;
    rec.optimism_term = v_hat_star - tv.v_star;
    rec.estbias_term = v_tilde - v_hat_tilde;
    rec.max_bonus = log.max_bonus;
    rec.mle_index = static_cast<long>(log.mle_index);
    const double residual =
        std::abs(rec.omd_term + rec.optimism_term + rec.estbias_term - (v_tilde - tv.v_star));
    diag.max_decomposition_residual = std::max(diag.max_decomposition_residual, residual);
    diag.omd_sum += rec.omd_term;
    diag.optimism_sum += rec.optimism_term;
    diag.estbias_sum += rec.estbias_term;
    diag.exploit_regret += v_tilde - tv.v_star;
    result.episodes.push_back(rec);
    result.final_mle_index = log.mle_index;
  };

  run_polo(mdp, models, losses, schedule, seed, options, observer);

  diag.exploration_regret_bound = diag.exploit_regret + hp.xi * setup.K / (1.0 - gamma);
  if (hp.xi > 0.0) {
    diag.optimism_bound =
        optimism_term_bound(setup.K, hp.L, result.n_epochs, A, M, hp.delta, hp.xi, gamma);
  }
  diag.elliptical_sum = potential.sum();
  diag.elliptical_log_det = potential.log_det_gap();
  diag.elliptical_bound = potential.bound(1.0);
  diag.elliptical_lambda0 = potential.lambda0();
  if (!std::isfinite(diag.min_cov_monotone_eig)) diag.min_cov_monotone_eig = 0.0;
  return result;
}

AlgoSummary summarize(Algo algo, const std::vector<const RunResult*>& runs, int k_min) {
  AlgoSummary out;
  out.algo = algo;
  out.n_seeds = runs.size();
  if (runs.empty()) return out;
  auto mean_se = [](const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    const double se = xs.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    return std::pair{mean, se};
  };
  std::vector<double> regrets;
  std::vector<double> slopes;
  for (const RunResult* r : runs) {
    regrets.push_back(r->cum_regret());
    const SlopeFit fit = loglog_slope(r->regret(), k_min);
    if (fit.ok) slopes.push_back(fit.slope);
  }
  std::tie(out.mean_cum_regret, out.se_cum_regret) = mean_se(regrets);
  out.slope_fits = slopes.size();
  if (!slopes.empty()) std::tie(out.mean_slope, out.se_slope) = mean_se(slopes);
  return out;
}

ExperimentResult run_experiment(const ExperimentSetup& setup) {
  if (setup.K < 1) throw std::invalid_argument("run_experiment: K must be >= 1");
  if (setup.seeds.empty()) throw std::invalid_argument("run_experiment: seed list is empty");
  if (setup.algos.empty()) throw std::invalid_argument("run_experiment: no algorithms requested");
  if (!setup.losses) throw std::invalid_argument("run_experiment: no loss generator");

  ExperimentResult out;
  out.schedule = polo_schedule(setup);
  const std::size_t n_tasks = setup.algos.size() * setup.seeds.size();
  out.runs.resize(n_tasks);
  std::vector<std::exception_ptr> errors(n_tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_tasks; i = next++) {
      const Algo algo = setup.algos[i / setup.seeds.size()];
      const std::uint64_t seed = setup.seeds[i % setup.seeds.size()];
      try {
        out.runs[i] = run_single(setup, algo, seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(setup.jobs, static_cast<int>(n_tasks)));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const int k_min = std::max(1, setup.K / 4);
  for (std::size_t a = 0; a < setup.algos.size(); ++a) {
    std::vector<const RunResult*> group;
    for (std::size_t s = 0; s < setup.seeds.size(); ++s) group.push_back(&out.runs[a * setup.seeds.size() + s]);
    out.summary.push_back(summarize(setup.algos[a], group, k_min));
  }
  return out;
}

}  // namespace lowrank
