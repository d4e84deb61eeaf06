#include "lowrank/rng.hpp"

#include <stdexcept>

namespace lowrank {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

RngStream RngStream::substream(std::string_view name) const {
  return RngStream(mix_seed(seed_, fnv1a(name)));
}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(mix_seed(seed_, splitmix64(index ^ 0x5bd1e995ULL)));
}

int RngStream::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  // Rejection keeps the draw unbiased.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<int>(x % range);
}

int RngStream::categorical(const Eigen::Ref<const Eigen::VectorXd>& probs) {
  const double u = uniform();
  double cum = 0.0;
  int last_positive = -1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  // Rounding left a sliver above the cumulative total.
  if (last_positive < 0) throw std::invalid_argument("categorical: no positive mass");
  return last_positive;
}

}  // namespace lowrank
