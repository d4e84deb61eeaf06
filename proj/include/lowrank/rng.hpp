#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace lowrank {

/// Deterministic random stream. Streams are never shared between threads;
/// every consumer derives its own named sub-stream from a master seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  /// Derives an independent stream keyed by `name`. The parent is not advanced.
  RngStream substream(std::string_view name) const;
  RngStream substream(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  int uniform_int(int n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Inverse-CDF draw from a probability vector.
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& probs);

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  /// Gamma(shape, 1) draw, used for Dirichlet sampling.
  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace lowrank
