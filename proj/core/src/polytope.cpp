#include "smpc/polytope.hpp"

#include <stdexcept>

namespace smpc {

bool Polytope::contains(const Vector& x, double tol) const {
  if (rows() == 0) return true;
  return ((G * x - g).array() <= tol).all();
}

LpResult support(const Polytope& p, const Vector& d) { return lp_maximize(d, p.G, p.g); }

bool row_redundant(const Polytope& p, const Vector& d, double e, double tol) {
  const LpResult r = support(p, d);
  if (r.status == LpStatus::unbounded) return false;
  if (r.status == LpStatus::infeasible)
    throw std::runtime_error("row_redundant: polytope is empty");
  return r.value <= e + tol;
}

Polytope reduce(const Polytope& p) {
  const int m = p.rows();
  std::vector<bool> keep(static_cast<std::size_t>(m), true);
  for (int i = 0; i < m; ++i) {
    // Test row i against all other currently kept rows.
    std::vector<int> others;
    for (int j = 0; j < m; ++j)
      if (j != i && keep[static_cast<std::size_t>(j)]) others.push_back(j);
    if (others.empty()) continue;
    Matrix go(static_cast<Eigen::Index>(others.size()), p.dim());
    Vector gg(static_cast<Eigen::Index>(others.size()));
    for (std::size_t k = 0; k < others.size(); ++k) {
      go.row(static_cast<Eigen::Index>(k)) = p.G.row(others[k]);
      gg(static_cast<Eigen::Index>(k)) = p.g(others[k]);
    }
    if (row_redundant(Polytope{go, gg}, p.G.row(i).transpose(), p.g(i)))
      keep[static_cast<std::size_t>(i)] = false;
  }
  int kept = 0;
  for (bool k : keep) kept += k ? 1 : 0;
  Polytope out;
  out.G.resize(kept, p.dim());
  out.g.resize(kept);
  int w = 0;
  for (int i = 0; i < m; ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    out.G.row(w) = p.G.row(i);
    out.g(w) = p.g(i);
    ++w;
  }
  return out;
}

double chebyshev_radius(const Polytope& p) {
  if (p.rows() == 0) throw std::invalid_argument("chebyshev_radius: no rows");
  double r = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.rows(); ++i) {
    if (!(p.g(i) > 0.0))
      throw std::invalid_argument("chebyshev_radius: origin not strictly inside");
    r = std::min(r, p.g(i) / p.G.row(i).norm());
  }
  return r;
}

std::vector<Vector> vertices(const Polytope& p) {
  const int n = p.dim();
  const int m = p.rows();
  if (n > 3) throw std::invalid_argument("vertices: enumeration limited to dim <= 3");
  // Boundedness check along coordinate directions.
  for (int j = 0; j < n; ++j) {
    Vector d = Vector::Zero(n);
    for (double s : {1.0, -1.0}) {
      d(j) = s;
      if (support(p, d).status == LpStatus::unbounded)
        throw std::runtime_error("vertices: polytope is unbounded");
    }
  }
  std::vector<Vector> out;
  // All row n-subsets.
  std::vector<int> comb;
  auto recurse = [&](auto&& self, int start) -> void {
    if (static_cast<int>(comb.size()) == n) {
      Matrix gs(n, n);
      Vector bs(n);
      for (int k = 0; k < n; ++k) {
        gs.row(k) = p.G.row(comb[static_cast<std::size_t>(k)]);
        bs(k) = p.g(comb[static_cast<std::size_t>(k)]);
      }
      Eigen::FullPivLU<Matrix> lu(gs);
      if (lu.isInvertible()) {
        Vector v = lu.solve(bs);
        if (p.contains(v, 1e-7)) {
          bool dup = false;
          for (const auto& w : out)
            if ((w - v).norm() < 1e-7 * std::max(1.0, v.norm())) dup = true;
          if (!dup) out.push_back(v);
        }
      }
      return;
    }
    for (int i = start; i < m; ++i) {
      comb.push_back(i);
      self(self, i + 1);
      comb.pop_back();
    }
  };
  recurse(recurse, 0);
  return out;
}

Polytope max_invariant_set(const Matrix& a_k, const Polytope& base, int max_sweeps) {
  const int n = base.dim();
  if (a_k.rows() != n || a_k.cols() != n)
    throw std::invalid_argument("max_invariant_set: dimension mismatch");
  for (int i = 0; i < base.rows(); ++i)
    if (!(base.g(i) > 0.0))
      throw std::runtime_error(
          "max_invariant_set: non-positive constraint margin, terminal set is empty");
  if (spectral_radius(a_k) >= 1.0)
    throw std::runtime_error("max_invariant_set: closed loop is not Schur stable");

  Polytope current = reduce(base);
  Matrix power = a_k;  // A_k^{t+1} applied to the base rows
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Matrix cand = base.G * power;
    bool grew = false;
    for (int i = 0; i < base.rows(); ++i) {
      const Vector row = cand.row(i).transpose();
      if (row.norm() < 1e-14) continue;
      if (!row_redundant(current, row, base.g(i))) {
        current.G.conservativeResize(current.rows() + 1, n);
        current.G.row(current.rows() - 1) = row.transpose();
        current.g.conservativeResize(current.rows());
        current.g(current.rows() - 1) = base.g(i);
        grew = true;
      }
    }
    if (!grew) return reduce(current);
    current = reduce(current);
    power = power * a_k;
  }
  throw std::runtime_error("max_invariant_set: no convergence within sweep budget");
}

}  // namespace smpc
