#include "smpc/linear_system.hpp"

#include <stdexcept>

namespace smpc {

namespace {

// rank of [B, AB, ..., A^{n-1}B]
bool pair_reachable(const Matrix& a, const Matrix& b) {
  const int n = static_cast<int>(a.rows());
  if (b.rows() != n) return false;
  if (b.cols() == 0) return n == 0;
  Matrix ctrb(n, n * b.cols());
  Matrix akb = b;
  for (int k = 0; k < n; ++k) {
    ctrb.block(0, k * b.cols(), n, b.cols()) = akb;
    akb = a * akb;
  }
  return rank_svd(ctrb) == n;
}

}  // namespace

void LinearSystem::validate_dims() const {
  if (A.rows() == 0 || A.rows() != A.cols())
    throw std::invalid_argument("LinearSystem: A must be square and nonempty");
  if (B.rows() != A.rows()) throw std::invalid_argument("LinearSystem: B row count != n");
  if (C.cols() != A.rows()) throw std::invalid_argument("LinearSystem: C column count != n");
  if (F.rows() != A.rows()) throw std::invalid_argument("LinearSystem: F row count != n");
  if (B.cols() == 0) throw std::invalid_argument("LinearSystem: system has no inputs");
  if (C.rows() == 0) throw std::invalid_argument("LinearSystem: system has no outputs");
}

bool LinearSystem::observable() const { return pair_reachable(A.transpose(), C.transpose()); }

bool LinearSystem::reachable() const { return pair_reachable(A, B); }

bool LinearSystem::noise_reachable(const Matrix& w) const {
  const Matrix ft = psd_sqrt(symmetrize(F * w * F.transpose()));
  return pair_reachable(A, ft);
}

std::string to_string(NoiseDist d) {
  switch (d) {
    case NoiseDist::gaussian: return "gaussian";
    case NoiseDist::uniform: return "uniform";
    case NoiseDist::triangular: return "triangular";
    case NoiseDist::truncated_gaussian: return "truncated_gaussian";
  }
  return "gaussian";
}

NoiseDist noise_dist_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseDist::gaussian;
  if (s == "uniform") return NoiseDist::uniform;
  if (s == "triangular") return NoiseDist::triangular;
  if (s == "truncated_gaussian") return NoiseDist::truncated_gaussian;
  throw std::invalid_argument("unknown noise distribution: " + s);
}

void NoiseSpec::validate(int nw, int p) const {
  if (W.rows() != nw || W.cols() != nw)
    throw std::invalid_argument("NoiseSpec: W must be nw x nw");
  if (V.rows() != p || V.cols() != p) throw std::invalid_argument("NoiseSpec: V must be p x p");
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, W.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("NoiseSpec: W not symmetric");
  if ((V - V.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, V.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("NoiseSpec: V not symmetric");
  if (!is_psd(W)) throw std::invalid_argument("NoiseSpec: W not positive semidefinite");
  const bool v_zero = V.isZero(0.0);
  if (!v_zero && min_eigenvalue(V) <= 0.0)
    throw std::invalid_argument("NoiseSpec: V must be positive definite (or exactly zero)");
}

void ChanceConstraint::validate(int n, int m) const {
  const int want = kind == ConstraintKind::state ? n : m;
  if (direction.size() != want)
    throw std::invalid_argument("ChanceConstraint: direction length mismatch");
  if (direction.isZero(0.0)) throw std::invalid_argument("ChanceConstraint: zero direction");
  if (!(bound > 0.0))
    throw std::invalid_argument("ChanceConstraint: bound must be positive (origin interior)");
  if (!(prob > 0.0 && prob < 1.0))
    throw std::invalid_argument("ChanceConstraint: probability must lie in (0,1)");
}

}  // namespace smpc
