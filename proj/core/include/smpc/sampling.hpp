#pragma once

#include <cstdint>

#include "smpc/linear_system.hpp"

namespace smpc {

// Counter-based deterministic generator (splitmix64 core). Stream splitting
// keeps Monte Carlo runs reproducible regardless of scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double uniform01();               // [0, 1)
  double normal();                  // standard normal (polar method)
  Rng derive(std::uint64_t index) const;

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Samples a zero-mean vector with the given covariance and shape. Bounded
// shapes are standardized per coordinate before the covariance square root
// is applied: uniform on [-sqrt(3), sqrt(3)], symmetric triangle on
// [-sqrt(6), sqrt(6)], Gaussian truncated at five standard deviations.
class NoiseSampler {
 public:
  NoiseSampler(const Matrix& cov, NoiseDist dist);

  Vector sample(Rng& rng) const;
  int dim() const { return static_cast<int>(sqrt_cov_.rows()); }

 private:
  Matrix sqrt_cov_;
  NoiseDist dist_;
};

}  // namespace smpc
