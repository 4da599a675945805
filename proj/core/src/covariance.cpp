#include "smpc/covariance.hpp"

#include <stdexcept>

namespace smpc {

AugmentedDynamics build_augmented(const LinearSystem& sys, const Matrix& k_gain,
                                  const Matrix& l_gain) {
  const int n = sys.n();
  if (k_gain.rows() != sys.m() || k_gain.cols() != n)
    throw std::invalid_argument("build_augmented: K must be m x n");
  if (l_gain.rows() != n || l_gain.cols() != sys.p())
    throw std::invalid_argument("build_augmented: L must be n x p");

  AugmentedDynamics dyn;
  dyn.Phi = Matrix::Zero(2 * n, 2 * n);
  dyn.Phi.topLeftCorner(n, n) = sys.A - l_gain * sys.C;
  dyn.Phi.bottomLeftCorner(n, n) = l_gain * sys.C;
  dyn.Phi.bottomRightCorner(n, n) = sys.A - sys.B * k_gain;

  dyn.Psi = Matrix::Zero(2 * n, sys.nw() + sys.p());
  dyn.Psi.topLeftCorner(n, sys.nw()) = sys.F;
  dyn.Psi.topRightCorner(n, sys.p()) = -l_gain;
  dyn.Psi.bottomRightCorner(n, sys.p()) = l_gain;
  return dyn;
}

Matrix stack_noise_covariance(const NoiseSpec& noise) {
  const Eigen::Index nw = noise.W.rows();
  const Eigen::Index p = noise.V.rows();
  Matrix omega = Matrix::Zero(nw + p, nw + p);
  omega.topLeftCorner(nw, nw) = noise.W;
  omega.bottomRightCorner(p, p) = noise.V;
  return omega;
}

CovarianceState propagate_covariance(const CovarianceState& sigma, const AugmentedDynamics& dyn,
                                     const Matrix& omega) {
  if (sigma.Sigma.rows() != dyn.Phi.rows())
    throw std::invalid_argument("propagate_covariance: Sigma/Phi dimension mismatch");
  if (omega.rows() != dyn.Psi.cols())
    throw std::invalid_argument("propagate_covariance: Omega/Psi dimension mismatch");
  Matrix next = dyn.Phi * sigma.Sigma * dyn.Phi.transpose() +
                dyn.Psi * omega * dyn.Psi.transpose();
  return CovarianceState{symmetrize(next)};
}

MarginalCovariances marginal_covariances(const CovarianceState& sigma, const Matrix& k_gain) {
  const int n = sigma.n();
  const Matrix s11 = sigma.s11();
  const Matrix s12 = sigma.s12();
  const Matrix s22 = sigma.s22();
  MarginalCovariances out;
  out.X = symmetrize(s11 + s12 + s12.transpose() + s22);
  if (k_gain.cols() != n) throw std::invalid_argument("marginal_covariances: K must be m x n");
  out.U = symmetrize(k_gain * s22 * k_gain.transpose());
  return out;
}

Matrix propagate_observer_covariance(const LinearSystem& sys, const NoiseSpec& noise,
                                     const Matrix& l_gain, const Matrix& s11) {
  const Matrix a_l = sys.A - l_gain * sys.C;
  return symmetrize(a_l * s11 * a_l.transpose() + sys.F * noise.W * sys.F.transpose() +
                    l_gain * noise.V * l_gain.transpose());
}

}  // namespace smpc
