#include "smpc/sampling.hpp"

#include <cmath>

namespace smpc {

namespace {
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

Rng Rng::derive(std::uint64_t index) const {
  std::uint64_t x = state_ ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  // Burn one round so derived streams decorrelate from the parent.
  (void)splitmix64(x);
  return Rng(x);
}

NoiseSampler::NoiseSampler(const Matrix& cov, NoiseDist dist) : dist_(dist) {
  sqrt_cov_ = psd_sqrt(cov);
}

Vector NoiseSampler::sample(Rng& rng) const {
  const int n = dim();
  Vector z(n);
  switch (dist_) {
    case NoiseDist::gaussian:
      for (int i = 0; i < n; ++i) z(i) = rng.normal();
      break;
    case NoiseDist::uniform: {
      const double half = std::sqrt(3.0);
      for (int i = 0; i < n; ++i) z(i) = (2.0 * rng.uniform01() - 1.0) * half;
      break;
    }
    case NoiseDist::triangular: {
      // Inverse CDF of the symmetric triangle on [-b, b] with unit variance.
      const double b = std::sqrt(6.0);
      for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        z(i) = u < 0.5 ? b * (std::sqrt(2.0 * u) - 1.0) : b * (1.0 - std::sqrt(2.0 * (1.0 - u)));
      }
      break;
    }
    case NoiseDist::truncated_gaussian: {
      for (int i = 0; i < n; ++i) {
        double g;
        do {
          g = rng.normal();
        } while (std::abs(g) > 5.0);
        z(i) = g;
      }
      break;
    }
  }
  return sqrt_cov_ * z;
}

}  // namespace smpc
