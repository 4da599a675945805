#include "smpc/numeric.hpp"

#include <stdexcept>

namespace smpc {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Matrix& sym) {
  if (sym.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Matrix& sym) {
  if (sym.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

bool is_psd(const Matrix& sym, double rel_tol) {
  const double scale = std::max(1.0, std::abs(sym.trace()));
  return min_eigenvalue(sym) >= -rel_tol * scale;
}

bool dominates(const Matrix& a, const Matrix& b, double rel_tol) {
  const Matrix diff = a - b;
  const double scale = std::max({1.0, std::abs(a.trace()), std::abs(b.trace())});
  return min_eigenvalue(diff) >= -rel_tol * scale;
}

Matrix psd_sqrt(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym));
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double spectral_radius(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

int rank_svd(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double thresh = rel_tol * sv(0);
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++r;
  return r;
}

Matrix dlyap(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw std::invalid_argument("dlyap: dimension mismatch");
  if (spectral_radius(a) >= 1.0)
    throw std::runtime_error("dlyap: matrix is not Schur stable");
  // vec(X) = (I - A (x) A)^{-1} vec(Q)
  const Eigen::Index n2 = n * n;
  Matrix kron(n2, n2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      kron.block(i * n, j * n, n, n) = a(i, j) * a;
  Matrix lhs = Matrix::Identity(n2, n2) - kron;
  Vector rhs(n2);
  for (Eigen::Index j = 0; j < n; ++j) rhs.segment(j * n, n) = q.col(j);
  Vector x = lhs.partialPivLu().solve(rhs);
  Matrix out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) out.col(j) = x.segment(j * n, n);
  return symmetrize(out);
}

double quad_form(const Vector& d, const Matrix& m) { return d.dot(m * d); }

}  // namespace smpc
