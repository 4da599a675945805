#pragma once

#include <vector>

#include "smpc/lp.hpp"
#include "smpc/numeric.hpp"

namespace smpc {

// {x : G x <= g}
struct Polytope {
  Matrix G;
  Vector g;

  int dim() const { return static_cast<int>(G.cols()); }
  int rows() const { return static_cast<int>(G.rows()); }
  bool contains(const Vector& x, double tol = 1e-9) const;
};

// Support function max_{x in P} d^T x.
LpResult support(const Polytope& p, const Vector& d);

// True when d^T x <= e holds on all of P (so adding the row changes nothing).
bool row_redundant(const Polytope& p, const Vector& d, double e, double tol = 1e-9);

// Drops redundant rows (support check per row against the others).
Polytope reduce(const Polytope& p);

// min_i g_i / ||G_i||. Requires g > 0 (origin strictly inside).
double chebyshev_radius(const Polytope& p);

// Vertex enumeration over row n-subsets. Intended for the small test
// polytopes (dim <= 3); throws when the set is unbounded.
std::vector<Vector> vertices(const Polytope& p);

// Maximal constraint-admissible positively invariant set for x+ = A_k x inside
// the base polytope: intersect pre-images until no new row binds.
//   base.g must be strictly positive; throws otherwise (empty terminal set).
Polytope max_invariant_set(const Matrix& a_k, const Polytope& base, int max_sweeps = 500);

}  // namespace smpc
