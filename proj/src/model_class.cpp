#include "lowrank/model_class.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lowrank {

ModelCandidate::ModelCandidate(Matrix mu_in, Matrix phi_in, int n_states, int n_actions)
    : mu(std::move(mu_in)),
      phi(std::move(phi_in)),
      table(factored_table(mu, phi, n_states, n_actions)) {
  log_table = table.p.unaryExpr([](double p) { return std::log(std::max(p, kLikelihoodFloor)); });
}

ModelCandidate ModelCandidate::from_mdp(const LowRankMdp& mdp) {
  return ModelCandidate(mdp.mu(), mdp.phi(), mdp.n_states(), mdp.n_actions());
}

ModelClass::ModelClass(int n_states, int n_actions, int dim, std::vector<ModelCandidate> candidates,
                       std::optional<std::size_t> true_index)
    : n_states_(n_states),
      n_actions_(n_actions),
      dim_(dim),
      candidates_(std::move(candidates)),
      true_index_(true_index) {
  if (candidates_.empty()) throw std::invalid_argument("ModelClass: empty candidate list");
  if (true_index_ && *true_index_ >= candidates_.size()) {
    throw std::invalid_argument("ModelClass: true_index out of range");
  }
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    const auto& c = candidates_[i];
    if (c.mu.cols() != dim || c.table.n_states != n_states || c.table.n_actions != n_actions) {
      throw std::invalid_argument("ModelClass: candidate " + std::to_string(i) + " has wrong shape");
    }
    const ValidationReport report = validate_factorization(c.mu, c.phi, n_states, n_actions);
    if (!report.all_passed()) {
      throw std::invalid_argument("ModelClass: candidate " + std::to_string(i) +
                                  " fails validation\n" + report.to_string());
    }
  }
}

ModelClass ModelClass::singleton(const LowRankMdp& truth) {
  std::vector<ModelCandidate> c;
  c.push_back(ModelCandidate::from_mdp(truth));
  return ModelClass(truth.n_states(), truth.n_actions(), truth.dim(), std::move(c), 0);
}

Dataset::Dataset(int n_states, int n_actions, DatasetTag tag)
    : n_states_(n_states),
      n_actions_(n_actions),
      tag_(tag),
      counts_(static_cast<std::size_t>(n_states) * n_actions * n_states, 0) {}

void Dataset::append(const Transition& t) {
  if (t.s < 0 || t.s >= n_states_ || t.a < 0 || t.a >= n_actions_ || t.s_next < 0 ||
      t.s_next >= n_states_) {
    throw std::out_of_range("Dataset: transition index out of range");
  }
  tuples_.push_back(t);
  ++counts_[(static_cast<std::size_t>(t.s) * n_actions_ + t.a) * n_states_ + t.s_next];
}

Matrix Dataset::pair_counts() const {
  Matrix n = Matrix::Zero(n_states_, n_actions_);
  for (const auto& t : tuples_) n(t.s, t.a) += 1.0;
  return n;
}

namespace {

// Sum over (s,a,s') of count * ln P; the fixed summation order makes the
// score independent of tuple order.
double weighted_log_sum(const ModelCandidate& model, const std::vector<std::uint32_t>& counts) {
  const int S = model.table.n_states;
  const Eigen::Index rows = model.table.p.rows();
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * S;
    for (int sp = 0; sp < S; ++sp) {
      const std::uint32_t n = counts[base + sp];
      if (n != 0) total += n * model.log_table(r, sp);
    }
  }
  return total;
}

}  // namespace

double log_likelihood(const ModelCandidate& model, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("log_likelihood: empty dataset");
  if (data.n_states() != model.table.n_states || data.n_actions() != model.table.n_actions) {
    throw std::invalid_argument("log_likelihood: shape mismatch");
  }
  return weighted_log_sum(model, data.counts()) / static_cast<double>(data.size());
}

MleResult mle_fit(const ModelClass& models, const Dataset& main, const Dataset& aux) {
  const std::size_t n = main.size() + aux.size();
  if (n == 0) throw std::invalid_argument("mle_fit: empty union of datasets");
  std::vector<std::uint32_t> merged = main.counts();
  const auto& extra = aux.counts();
  if (merged.size() != extra.size()) throw std::invalid_argument("mle_fit: dataset shape mismatch");
  for (std::size_t i = 0; i < merged.size(); ++i) merged[i] += extra[i];

  MleResult result;
  result.scores.reserve(models.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < models.size(); ++i) {
    const double score = weighted_log_sum(models[i], merged) / static_cast<double>(n);
    result.scores.push_back(score);
    if (score > best) {
      best = score;
      result.index = i;
    }
  }
  return result;
}

namespace {

// Relabels next states: P'(perm[s'] | s, a) = P(s' | s, a) on a random subset.
void permute_mu_rows(Matrix& mu, RngStream& rng) {
  const int S = static_cast<int>(mu.rows());
  if (S < 2) return;
  std::vector<int> states(static_cast<std::size_t>(S));
  std::iota(states.begin(), states.end(), 0);
  std::shuffle(states.begin(), states.end(), rng.engine());
  const int k = 2 + rng.uniform_int(S - 1);
  std::vector<int> subset(states.begin(), states.begin() + k);
  std::vector<int> target = subset;
  // Cyclic shift of a shuffled subset is a derangement of that subset.
  std::rotate(target.begin(), target.begin() + 1, target.end());
  const Matrix original = mu;
  for (int i = 0; i < k; ++i) mu.row(target[static_cast<std::size_t>(i)]) = original.row(subset[static_cast<std::size_t>(i)]);
}

// Every row of phi * mu^T sums to one, so m = sum_s mu(s) satisfies
// m^T phi(s,a) = 1 and the uniform row equals (m / S)^T phi(s,a).
void mix_toward_uniform(Matrix& mu, double weight) {
  const auto S = static_cast<double>(mu.rows());
  const Eigen::RowVectorXd m = mu.colwise().sum();
  mu = (1.0 - weight) * mu + (weight / S) * Matrix::Ones(mu.rows(), 1) * m;
}

// Convex blends of phi rows keep every row stochastic and inside the unit ball.
void blend_phi_rows(Matrix& phi, double weight, RngStream& rng) {
  const Matrix original = phi;
  const int rows = static_cast<int>(phi.rows());
  for (int r = 0; r < rows; ++r) {
    if (!rng.bernoulli(0.5)) continue;
    const int other = rng.uniform_int(rows);
    phi.row(r) = (1.0 - weight) * original.row(r) + weight * original.row(other);
  }
}

double max_abs_diff(const TransitionTable& a, const TransitionTable& b) {
  return (a.p - b.p).cwiseAbs().maxCoeff();
}

}  // namespace

ModelClass build_distractor_class(const LowRankMdp& truth, int m, RngStream& rng,
                                  double perturb_scale) {
  if (m < 1) throw std::invalid_argument("build_distractor_class: m must be >= 1");
  if (!(perturb_scale >= 0.0 && perturb_scale <= 1.0)) {
    throw std::invalid_argument("build_distractor_class: perturb_scale must lie in [0, 1]");
  }
  const int S = truth.n_states();
  const int A = truth.n_actions();
  std::vector<ModelCandidate> pool;
  pool.push_back(ModelCandidate::from_mdp(truth));

  constexpr int kRetries = 100;
  for (int j = 1; j < m; ++j) {
    bool accepted = false;
    for (int attempt = 0; attempt < kRetries && !accepted; ++attempt) {
      Matrix mu = truth.mu();
      Matrix phi = truth.phi();
      permute_mu_rows(mu, rng);
      mix_toward_uniform(mu, perturb_scale);
      blend_phi_rows(phi, perturb_scale, rng);
      if (!validate_factorization(mu, phi, S, A).all_passed()) continue;
      ModelCandidate candidate(std::move(mu), std::move(phi), S, A);
      const bool distinct = std::all_of(pool.begin(), pool.end(), [&](const ModelCandidate& c) {
        return max_abs_diff(c.table, candidate.table) >= 1e-6;
      });
      if (!distinct) continue;
      pool.push_back(std::move(candidate));
      accepted = true;
    }
    if (!accepted) {
      throw std::runtime_error("build_distractor_class: retry budget exhausted for distractor " +
                               std::to_string(j));
    }
  }

  // Place the truth at a random slot so that index-based tie-breaking carries
  // no information about which candidate is correct.
  const std::size_t truth_slot = static_cast<std::size_t>(rng.uniform_int(m));
  std::swap(pool[0], pool[truth_slot]);
  return ModelClass(S, A, truth.dim(), std::move(pool), truth_slot);
}

ModelErrorDiagnostics l1_model_error(const TransitionTable& model, const TransitionTable& truth) {
  if (model.n_states != truth.n_states || model.n_actions != truth.n_actions) {
    throw std::invalid_argument("l1_model_error: shape mismatch");
  }
  ModelErrorDiagnostics out;
  out.l1_error.resize(truth.n_states, truth.n_actions);
  for (int s = 0; s < truth.n_states; ++s) {
    for (int a = 0; a < truth.n_actions; ++a) {
      out.l1_error(s, a) = (model.row(s, a) - truth.row(s, a)).cwiseAbs().sum();
    }
  }
  return out;
}

double mean_kl_uniform(const TransitionTable& truth, const TransitionTable& model) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < truth.p.rows(); ++r) {
    for (Eigen::Index c = 0; c < truth.p.cols(); ++c) {
      const double p = truth.p(r, c);
      if (p <= 0.0) continue;
      const double q = model.p(r, c);
      if (q <= 0.0) return std::numeric_limits<double>::infinity();
      total += p * std::log(p / q);
    }
  }
  return total / static_cast<double>(truth.p.rows());
}

}  // namespace lowrank
