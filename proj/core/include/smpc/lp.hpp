#pragma once

#include "smpc/numeric.hpp"

namespace smpc {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  Vector x;
};

// max c^T x  s.t.  A x <= b, x free. Dense two-phase simplex; intended for
// the small support-function problems arising in polytope reduction.
LpResult lp_maximize(const Vector& c, const Matrix& a, const Vector& b);

}  // namespace smpc
