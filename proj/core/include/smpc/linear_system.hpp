#pragma once

#include <string>
#include <vector>

#include "smpc/numeric.hpp"

namespace smpc {

// x+ = A x + B u + F w,  y = C x + v
struct LinearSystem {
  Matrix A;  // n x n
  Matrix B;  // n x m
  Matrix C;  // p x n
  Matrix F;  // n x nw

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.rows()); }
  int nw() const { return static_cast<int>(F.cols()); }

  // Throws std::invalid_argument on inconsistent dimensions.
  void validate_dims() const;

  bool observable() const;                      // rank [C; CA; ...] == n
  bool reachable() const;                       // rank [B, AB, ...] == n
  bool noise_reachable(const Matrix& w) const;  // (A, Ft) reachable, Ft Ft^T = F W F^T
};

enum class NoiseDist { gaussian, uniform, triangular, truncated_gaussian };

std::string to_string(NoiseDist d);
NoiseDist noise_dist_from_string(const std::string& s);

struct NoiseSpec {
  Matrix W;  // nw x nw process-noise covariance, PSD
  Matrix V;  // p  x p  measurement-noise covariance, PD
  NoiseDist dist = NoiseDist::gaussian;

  // Throws std::invalid_argument when the covariances are not symmetric PSD
  // (V must additionally be PD unless it is exactly zero, which the
  // simulator accepts for noise-free studies).
  void validate(int nw, int p) const;
};

enum class ConstraintKind { state, input };

// P{ direction^T z >= bound } <= prob, z the state or input.
struct ChanceConstraint {
  Vector direction;
  double bound = 0.0;
  double prob = 0.0;
  ConstraintKind kind = ConstraintKind::state;

  void validate(int n, int m) const;
};

}  // namespace smpc
