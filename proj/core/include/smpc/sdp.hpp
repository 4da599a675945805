#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Sparse>

#include "smpc/qp.hpp"  // SolveStatus

namespace smpc {

// Nearest PSD matrix in Frobenius norm: eigendecompose and clip.
Matrix psd_project(const Matrix& sym);

// One coefficient entry of a matrix-inequality block. An off-diagonal entry
// implies its symmetric mirror.
struct SdpTerm {
  int var;
  int row;
  int col;
  double coeff;
};

// F0 + sum_j z_j F_j >= 0 with F_j described by the term list.
struct SdpBlock {
  int size = 0;
  Matrix F0;
  std::vector<SdpTerm> terms;
};

// min c^T z + offset  s.t. every block PSD and A_eq z = b_eq.
struct SdpProblem {
  int num_vars = 0;
  Vector c;
  double offset = 0.0;
  std::vector<SdpBlock> blocks;
  Matrix A_eq;  // may have zero rows
  Vector b_eq;

  void validate() const;
};

struct SdpOptions {
  double tol = 1e-6;
  long max_iter = 50000;
  double rho = 1.0;
  bool adapt_rho = true;
  long trace_every = 0;  // > 0: print residuals every n iterations
};

struct SdpResult {
  Vector z;
  SolveStatus status;
};

// ADMM state carried across related solves.
struct SdpWarmStart {
  bool valid = false;
  double rho = 0.0;
  Vector z, s, y;
};

// Operator-splitting solver. The factorization depends only on the variable
// coefficients (block terms and equality rows), so one kernel can serve a
// family of problems that differ only in F0 / c / b_eq.
class SdpKernel {
 public:
  SdpKernel(const SdpProblem& structure, SdpOptions opts);
  ~SdpKernel();

  SdpResult solve(const SdpProblem& p, SdpWarmStart* warm = nullptr) const;

  // Prepares a warm start at a caller-supplied point (ideally feasible).
  void seed(SdpWarmStart& warm, const SdpProblem& p, const Vector& z0) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SdpResult sdp_solve(const SdpProblem& p, const SdpOptions& opts = {});

}  // namespace smpc
