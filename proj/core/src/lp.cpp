#include "smpc/lp.hpp"

#include <stdexcept>
#include <vector>

namespace smpc {

namespace {

constexpr double kTol = 1e-9;

// Full-tableau simplex for min c^T z, T z = rhs, z >= 0, starting from the
// given basis. Returns false on unboundedness.
class Tableau {
 public:
  Tableau(Matrix t, Vector rhs, std::vector<int> basis)
      : t_(std::move(t)), rhs_(std::move(rhs)), basis_(std::move(basis)) {}

  // Dantzig rule with a switch to Bland's rule after a burn-in, which rules
  // out cycling on degenerate vertices.
  bool minimize(const Vector& cost, const std::vector<bool>& allowed) {
    const Eigen::Index m = t_.rows();
    const Eigen::Index ncols = t_.cols();
    Vector zrow = cost;
    double obj = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (cost(basis_[i]) != 0.0) {
        zrow -= cost(basis_[i]) * t_.row(i).transpose();
        obj -= cost(basis_[i]) * rhs_(i);
      }
    }
    const long max_iter = 200 + 40L * static_cast<long>(m + ncols);
    for (long iter = 0; iter < max_iter; ++iter) {
      const bool bland = iter > max_iter / 2;
      Eigen::Index enter = -1;
      double best = -kTol;
      for (Eigen::Index j = 0; j < ncols; ++j) {
        if (!allowed[static_cast<std::size_t>(j)]) continue;
        if (zrow(j) < best) {
          if (bland) {
            enter = j;
            break;
          }
          best = zrow(j);
          enter = j;
        }
      }
      if (enter < 0) {
        objective_ = -obj;
        return true;
      }
      Eigen::Index leave = -1;
      double best_ratio = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (t_(i, enter) > kTol) {
          const double ratio = rhs_(i) / t_(i, enter);
          if (leave < 0 || ratio < best_ratio - kTol ||
              (ratio < best_ratio + kTol && basis_[i] > basis_[leave])) {
            leave = i;
            best_ratio = ratio;
          }
        }
      }
      if (leave < 0) return false;  // unbounded direction
      pivot(leave, enter, zrow, obj);
    }
    objective_ = -obj;
    return true;  // iteration cap: treat current vertex as optimal
  }

  double objective() const { return objective_; }
  const std::vector<int>& basis() const { return basis_; }
  const Vector& rhs() const { return rhs_; }
  const Matrix& table() const { return t_; }

  // Degenerate pivots removing zero-level basic variables in [first, last)
  // from the basis. Rows with no eligible pivot column are vacuous.
  void drive_out(int first, int last, const std::vector<bool>& allowed) {
    Vector dummy = Vector::Zero(t_.cols());
    double obj = 0.0;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      const int bi = basis_[static_cast<std::size_t>(i)];
      if (bi < first || bi >= last) continue;
      for (Eigen::Index j = 0; j < t_.cols(); ++j) {
        if (!allowed[static_cast<std::size_t>(j)]) continue;
        if (std::abs(t_(i, j)) > 1e-7) {
          pivot(i, j, dummy, obj);
          break;
        }
      }
    }
  }

  void pivot(Eigen::Index leave, Eigen::Index enter, Vector& zrow, double& obj) {
    const double piv = t_(leave, enter);
    t_.row(leave) /= piv;
    rhs_(leave) /= piv;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == leave) continue;
      const double f = t_(i, enter);
      if (f != 0.0) {
        t_.row(i) -= f * t_.row(leave);
        rhs_(i) -= f * rhs_(leave);
      }
    }
    const double fz = zrow(enter);
    if (fz != 0.0) {
      zrow -= fz * t_.row(leave).transpose();
      obj -= fz * rhs_(leave);
    }
    basis_[static_cast<std::size_t>(leave)] = static_cast<int>(enter);
  }

 private:
  Matrix t_;
  Vector rhs_;
  std::vector<int> basis_;
  double objective_ = 0.0;
};

}  // namespace

LpResult lp_maximize(const Vector& c, const Matrix& a, const Vector& b) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (c.size() != n || b.size() != m) throw std::invalid_argument("lp_maximize: dimensions");

  LpResult out;
  if (m == 0) {
    // Unconstrained: bounded only for c == 0.
    out.status = c.isZero(0.0) ? LpStatus::optimal : LpStatus::unbounded;
    out.value = 0.0;
    out.x = Vector::Zero(n);
    return out;
  }

  // z = [x+; x-; slack; artificial], rows scaled to unit norm.
  std::vector<Eigen::Index> art_rows;
  Matrix rows = a;
  Vector rhs = b;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double s = std::max(rows.row(i).norm(), 1e-12);
    rows.row(i) /= s;
    rhs(i) /= s;
    if (rhs(i) < 0.0) art_rows.push_back(i);
  }
  const Eigen::Index n_art = static_cast<Eigen::Index>(art_rows.size());
  const Eigen::Index ncols = 2 * n + m + n_art;
  Matrix t = Matrix::Zero(m, ncols);
  t.block(0, 0, m, n) = rows;
  t.block(0, n, m, n) = -rows;
  t.block(0, 2 * n, m, m) = Matrix::Identity(m, m);
  std::vector<int> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = static_cast<int>(2 * n + i);
  for (Eigen::Index k = 0; k < n_art; ++k) {
    const Eigen::Index i = art_rows[static_cast<std::size_t>(k)];
    t.row(i) = -t.row(i);
    rhs(i) = -rhs(i);
    t(i, 2 * n + m + k) = 1.0;
    basis[static_cast<std::size_t>(i)] = static_cast<int>(2 * n + m + k);
  }

  Tableau tab(std::move(t), std::move(rhs), std::move(basis));
  std::vector<bool> allowed(static_cast<std::size_t>(ncols), true);

  if (n_art > 0) {
    Vector phase1 = Vector::Zero(ncols);
    phase1.tail(n_art).setOnes();
    if (!tab.minimize(phase1, allowed))
      throw std::runtime_error("lp_maximize: phase-1 unbounded (internal error)");
    if (tab.objective() > 1e-7) {
      out.status = LpStatus::infeasible;
      return out;
    }
    // Forbid artificials in phase 2 and pivot any zero-level basic ones out.
    for (Eigen::Index k = 0; k < n_art; ++k)
      allowed[static_cast<std::size_t>(2 * n + m + k)] = false;
    tab.drive_out(static_cast<int>(2 * n + m), static_cast<int>(ncols), allowed);
  }

  Vector cost = Vector::Zero(ncols);
  cost.head(n) = -c;           // max c^T x == min -c^T x
  cost.segment(n, n) = c;
  if (!tab.minimize(cost, allowed)) {
    out.status = LpStatus::unbounded;
    return out;
  }

  Vector z = Vector::Zero(ncols);
  for (Eigen::Index i = 0; i < m; ++i)
    z(tab.basis()[static_cast<std::size_t>(i)]) = tab.rhs()(i);
  out.status = LpStatus::optimal;
  out.x = z.head(n) - z.segment(n, n);
  out.value = c.dot(out.x);
  return out;
}

}  // namespace smpc
