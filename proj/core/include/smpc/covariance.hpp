#pragma once

#include "smpc/linear_system.hpp"
#include "smpc/numeric.hpp"

namespace smpc {

// Stacked error dynamics for sigma = [e; eps]:
//   sigma+ = Phi sigma + Psi [w; v]
//   Phi = [A-LC, 0; LC, A-BK],  Psi = [F, -L; 0, L]
struct AugmentedDynamics {
  Matrix Phi;  // 2n x 2n
  Matrix Psi;  // 2n x (nw + p)
};

// Second moment of the stacked error, with block accessors.
struct CovarianceState {
  Matrix Sigma;  // 2n x 2n, symmetric PSD

  int n() const { return static_cast<int>(Sigma.rows()) / 2; }
  Matrix s11() const { return Sigma.topLeftCorner(n(), n()); }
  Matrix s12() const { return Sigma.topRightCorner(n(), n()); }
  Matrix s22() const { return Sigma.bottomRightCorner(n(), n()); }
};

AugmentedDynamics build_augmented(const LinearSystem& sys, const Matrix& k_gain,
                                  const Matrix& l_gain);

// diag(W, V)
Matrix stack_noise_covariance(const NoiseSpec& noise);

// Sigma+ = Phi Sigma Phi^T + Psi Omega Psi^T, re-symmetrized.
CovarianceState propagate_covariance(const CovarianceState& sigma, const AugmentedDynamics& dyn,
                                     const Matrix& omega);

// X = [I I] Sigma [I; I],  U = [0 K] Sigma [0; K^T]
struct MarginalCovariances {
  Matrix X;  // n x n state-deviation covariance
  Matrix U;  // m x m input-deviation covariance
};
MarginalCovariances marginal_covariances(const CovarianceState& sigma, const Matrix& k_gain);

// Observer-error block recursion (decoupled (1,1) block of the propagation):
//   S11+ = (A-LC) S11 (A-LC)^T + F W F^T + L V L^T
Matrix propagate_observer_covariance(const LinearSystem& sys, const NoiseSpec& noise,
                                     const Matrix& l_gain, const Matrix& s11);

}  // namespace smpc
