#pragma once

#include <Eigen/Dense>

// Small dense linear-algebra helpers shared across the library. Everything
// here is a pure function; matrices are taken and returned by value.

namespace smpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr const char* kVersion = "0.1.0";

// Relative tolerance (w.r.t. trace) below which a symmetric matrix still
// counts as positive semidefinite despite eigensolver noise.
inline constexpr double kPsdTol = 1e-9;

// (M + M^T)/2. Covariance updates re-symmetrize after every product chain.
Matrix symmetrize(const Matrix& m);

double min_eigenvalue(const Matrix& sym);
double max_eigenvalue(const Matrix& sym);

// PSD test with tolerance scaled by trace (or 1 for near-zero matrices).
bool is_psd(const Matrix& sym, double rel_tol = kPsdTol);

// A >= B in the Loewner order, within rel_tol * scale.
bool dominates(const Matrix& a, const Matrix& b, double rel_tol = kPsdTol);

// Symmetric square root with negative eigenvalues clipped to zero.
Matrix psd_sqrt(const Matrix& sym);

double spectral_radius(const Matrix& m);

// Numerical rank via SVD with threshold rel_tol * sigma_max.
int rank_svd(const Matrix& m, double rel_tol = 1e-8);

// Solves X = A X A^T + Q by direct vectorization. Requires rho(A) < 1.
Matrix dlyap(const Matrix& a, const Matrix& q);

// d^T M d
double quad_form(const Vector& d, const Matrix& m);

}  // namespace smpc
