#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/mdp_core.hpp"
#include "lowrank/rng.hpp"

namespace lowrank {

/// One candidate factorization (mu, phi) with its materialized kernel.
struct ModelCandidate {
  Matrix mu;   // S x d
  Matrix phi;  // (S*A) x d
  TransitionTable table;
  Matrix log_table;  // ln max(P, floor), cached for likelihood scoring

  ModelCandidate(Matrix mu, Matrix phi, int n_states, int n_actions);
  static ModelCandidate from_mdp(const LowRankMdp& mdp);
};

/// Finite realizable model class. Every candidate passes validate_factorization.
class ModelClass {
 public:
  ModelClass(int n_states, int n_actions, int dim, std::vector<ModelCandidate> candidates,
             std::optional<std::size_t> true_index = std::nullopt);

  /// Class containing only the ground truth.
  static ModelClass singleton(const LowRankMdp& truth);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  int dim() const { return dim_; }
  std::size_t size() const { return candidates_.size(); }
  const ModelCandidate& operator[](std::size_t i) const { return candidates_.at(i); }
  const std::vector<ModelCandidate>& candidates() const { return candidates_; }
  std::optional<std::size_t> true_index() const { return true_index_; }

 private:
  int n_states_;
  int n_actions_;
  int dim_;
  std::vector<ModelCandidate> candidates_;
  std::optional<std::size_t> true_index_;
};

struct Transition {
  int s = 0;
  int a = 0;
  int s_next = 0;
  bool operator==(const Transition&) const = default;
};

enum class DatasetTag { kMain, kAux };

/// Append-only buffer of observed transitions plus per-(s,a,s') counts.
class Dataset {
 public:
  Dataset(int n_states, int n_actions, DatasetTag tag = DatasetTag::kMain);

  void append(const Transition& t);
  void append(int s, int a, int s_next) { append(Transition{s, a, s_next}); }

  std::size_t size() const { return tuples_.size(); }
  bool empty() const { return tuples_.empty(); }
  DatasetTag tag() const { return tag_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  const std::vector<Transition>& tuples() const { return tuples_; }

  /// Count of (s, a, s') at flat index (s * A + a) * S + s'.
  const std::vector<std::uint32_t>& counts() const { return counts_; }
  /// Visits of (s, a) as an S x A matrix.
  Matrix pair_counts() const;

 private:
  int n_states_;
  int n_actions_;
  DatasetTag tag_;
  std::vector<Transition> tuples_;
  std::vector<std::uint32_t> counts_;
};

inline constexpr double kLikelihoodFloor = 1e-12;

/// Mean of ln max(P(s'|s,a), 1e-12) over the tuples. Throws on empty data.
double log_likelihood(const ModelCandidate& model, const Dataset& data);

struct MleResult {
  std::size_t index = 0;
  std::vector<double> scores;  // mean log-likelihood per candidate over D u D'
};

/// Argmax of the mean log-likelihood over D u D'; ties go to the lowest index.
MleResult mle_fit(const ModelClass& models, const Dataset& main, const Dataset& aux);

/// Truth plus (m - 1) distractors. Each distractor permutes mu rows over a
/// random subset of states, mixes every transition row toward uniform with
/// weight `perturb_scale`, and blends a random subset of phi rows with other
/// phi rows. The truth sits at a random position recorded in true_index.
ModelClass build_distractor_class(const LowRankMdp& truth, int m, RngStream& rng,
                                  double perturb_scale);

struct ModelErrorDiagnostics {
  Matrix l1_error;     // S x A, f(s,a) = ||P_hat(.|s,a) - P(.|s,a)||_1
  double zeta = 0.0;   // filled by the caller
};

ModelErrorDiagnostics l1_model_error(const TransitionTable& model, const TransitionTable& truth);

/// Mean over uniform (s, a) of KL(P_truth(.|s,a) || P_model(.|s,a)); +inf when
/// the model misses support.
double mean_kl_uniform(const TransitionTable& truth, const TransitionTable& model);

}  // namespace lowrank
