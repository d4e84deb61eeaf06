#include "lowrank/adversary.hpp"

#include <algorithm>
#include <stdexcept>

namespace lowrank {

namespace {

void require_k(int K) {
  if (K < 1) throw std::invalid_argument("loss sequence: K must be >= 1");
}

}  // namespace

LossSequence::LossSequence(std::string kind, std::uint64_t seed, std::vector<LossFunction> tables,
                           std::vector<std::uint32_t> index)
    : kind_(std::move(kind)), seed_(seed), tables_(std::move(tables)), index_(std::move(index)) {
  if (index_.empty()) throw std::invalid_argument("loss sequence: K must be >= 1");
  for (auto i : index_) {
    if (i >= tables_.size()) throw std::invalid_argument("loss sequence: table index out of range");
  }
  for (const auto& t : tables_) {
    if (t.n_states() != tables_.front().n_states() || t.n_actions() != tables_.front().n_actions()) {
      throw std::invalid_argument("loss sequence: tables disagree in shape");
    }
  }
}

Matrix LossSequence::mean() const {
  std::vector<double> weight(tables_.size(), 0.0);
  for (auto i : index_) weight[i] += 1.0;
  Matrix out = Matrix::Zero(tables_.front().n_states(), tables_.front().n_actions());
  for (std::size_t t = 0; t < tables_.size(); ++t) out += weight[t] * tables_[t].values();
  return out / static_cast<double>(index_.size());
}

LossSequence make_fixed(const LossFunction& base, int K) {
  require_k(K);
  return LossSequence("fixed", 0, {base}, std::vector<std::uint32_t>(static_cast<std::size_t>(K), 0));
}

LossSequence make_switching(const LossFunction& l_a, const LossFunction& l_b, int period, int K) {
  require_k(K);
  if (period < 1) throw std::invalid_argument("make_switching: period must be >= 1");
  std::vector<std::uint32_t> index(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) index[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>((k / period) % 2);
  return LossSequence("switching", 0, {l_a, l_b}, std::move(index));
}

LossSequence make_stochastic(const LossFunction& mean, double noise_scale, int K, RngStream& rng) {
  require_k(K);
  if (!(noise_scale >= 0.0 && noise_scale <= 0.5)) {
    throw std::invalid_argument("make_stochastic: noise_scale must lie in [0, 0.5]");
  }
  if (noise_scale == 0.0) {
    LossSequence fixed = make_fixed(mean, K);
    return LossSequence("stochastic", rng.seed(), fixed.tables(),
                        std::vector<std::uint32_t>(static_cast<std::size_t>(K), 0));
  }
  std::vector<LossFunction> tables;
  std::vector<std::uint32_t> index(static_cast<std::size_t>(K));
  tables.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    Matrix v = mean.values();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v.data()[i] = std::clamp(v.data()[i] + noise_scale * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);
    }
    tables.emplace_back(std::move(v));
    index[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(k);
  }
  return LossSequence("stochastic", rng.seed(), std::move(tables), std::move(index));
}

}  // namespace lowrank
