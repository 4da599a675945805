#pragma once

#include "smpc/numeric.hpp"

namespace smpc {

enum class SolveState { optimal, infeasible, max_iter, numerical_failure };

struct SolveStatus {
  SolveState state = SolveState::numerical_failure;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  long iterations = 0;
};

// min 1/2 z^T H z + g^T z  s.t.  A_in z <= b_in,  A_eq z = b_eq
struct QpProblem {
  Matrix H;
  Vector g;
  Matrix A_in;
  Vector b_in;
  Matrix A_eq;
  Vector b_eq;

  void validate() const;
};

struct QpResult {
  Vector z;
  Vector mult_in;  // multipliers for A_in z <= b_in (nonnegative)
  SolveStatus status;
};

// Dual active-set method (Goldfarb-Idnani). H must be positive definite;
// returns infeasible with a dual-ray certificate when no point satisfies the
// constraints, numerical_failure when H is not PD or badly conditioned.
QpResult qp_solve(const QpProblem& p);

}  // namespace smpc
