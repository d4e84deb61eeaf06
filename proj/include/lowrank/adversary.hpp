#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lowrank/mdp_core.hpp"
#include "lowrank/rng.hpp"

namespace lowrank {

/// K per-episode losses fixed before the learner starts (oblivious adversary).
///
/// Repeated tables are stored once; `table_index(k)` identifies the distinct
/// table used in episode k so that consumers can cache per-table work.
class LossSequence {
 public:
  LossSequence(std::string kind, std::uint64_t seed, std::vector<LossFunction> tables,
               std::vector<std::uint32_t> index);

  std::size_t size() const { return index_.size(); }
  const std::string& kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }

  /// Loss of episode k, 0-based.
  const LossFunction& operator[](std::size_t k) const { return tables_[index_.at(k)]; }
  std::uint32_t table_index(std::size_t k) const { return index_.at(k); }
  const std::vector<LossFunction>& tables() const { return tables_; }

  /// (1/K) sum_k l_k.
  Matrix mean() const;

 private:
  std::string kind_;
  std::uint64_t seed_;
  std::vector<LossFunction> tables_;
  std::vector<std::uint32_t> index_;
};

LossSequence make_fixed(const LossFunction& base, int K);

/// Blocks of `period` episodes alternating l_a, l_b, l_a, ...
LossSequence make_switching(const LossFunction& l_a, const LossFunction& l_b, int period, int K);

/// Episode k draws mean + noise_scale * U(-1, 1) entrywise, clamped to [0, 1].
LossSequence make_stochastic(const LossFunction& mean, double noise_scale, int K, RngStream& rng);

}  // namespace lowrank
