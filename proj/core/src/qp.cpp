#include "smpc/qp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace smpc {

void QpProblem::validate() const {
  const Eigen::Index d = H.rows();
  if (H.cols() != d) throw std::invalid_argument("QpProblem: H must be square");
  if (g.size() != d) throw std::invalid_argument("QpProblem: g size mismatch");
  if (A_in.rows() > 0 && A_in.cols() != d)
    throw std::invalid_argument("QpProblem: A_in column mismatch");
  if (A_in.rows() != b_in.size()) throw std::invalid_argument("QpProblem: b_in size mismatch");
  if (A_eq.rows() > 0 && A_eq.cols() != d)
    throw std::invalid_argument("QpProblem: A_eq column mismatch");
  if (A_eq.rows() != b_eq.size()) throw std::invalid_argument("QpProblem: b_eq size mismatch");
  if ((H - H.transpose()).cwiseAbs().maxCoeff() >
      1e-8 * std::max(1.0, H.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("QpProblem: H not symmetric");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Workspace {
  Matrix J;            // n x n, spans of free/constrained directions
  Matrix R;            // n x n upper-triangular factor of active normals
  std::vector<int> active;  // active constraint indices (equalities first)
  Vector u;            // multipliers of active constraints (size q)
  int q = 0;
  double r_norm = 1.0;
};

// Rotates the tail of d to zero, accumulating the rotations into J columns;
// afterwards d.head(q+1) becomes the new column of R.
bool add_constraint(Workspace& ws, Vector& d) {
  const Eigen::Index n = d.size();
  for (Eigen::Index j = n - 1; j >= ws.q + 1; --j) {
    double cc = d(j - 1);
    double ss = d(j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    d(j) = 0.0;
    ss /= h;
    cc /= h;
    if (cc < 0.0) {
      cc = -cc;
      ss = -ss;
      d(j - 1) = -h;
    } else {
      d(j - 1) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t1 = ws.J(k, j - 1);
      const double t2 = ws.J(k, j);
      ws.J(k, j - 1) = t1 * cc + t2 * ss;
      ws.J(k, j) = xny * (t1 + ws.J(k, j - 1)) - t2;
    }
  }
  ++ws.q;
  ws.R.col(ws.q - 1).head(ws.q) = d.head(ws.q);
  ws.r_norm = std::max(ws.r_norm, std::abs(d(ws.q - 1)));
  return std::abs(d(ws.q - 1)) > 1e-12 * ws.r_norm;
}

// Removes active constraint at position pos, restoring the triangular R.
void delete_constraint(Workspace& ws, int pos) {
  const Eigen::Index n = ws.J.rows();
  for (int j = pos; j < ws.q - 1; ++j) {
    ws.active[static_cast<std::size_t>(j)] = ws.active[static_cast<std::size_t>(j + 1)];
    ws.u(j) = ws.u(j + 1);
    ws.R.col(j) = ws.R.col(j + 1);
  }
  ws.active[static_cast<std::size_t>(ws.q - 1)] = -1;
  ws.u(ws.q - 1) = 0.0;
  ws.R.col(ws.q - 1).setZero();
  --ws.q;
  // Re-triangularize: rows j, j+1 of the shifted columns.
  for (int j = pos; j < ws.q; ++j) {
    double cc = ws.R(j, j);
    double ss = ws.R(j + 1, j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    cc /= h;
    ss /= h;
    ws.R(j, j) = h;
    ws.R(j + 1, j) = 0.0;
    for (int k = j + 1; k < ws.q; ++k) {
      const double t1 = ws.R(j, k);
      const double t2 = ws.R(j + 1, k);
      ws.R(j, k) = cc * t1 + ss * t2;
      ws.R(j + 1, k) = -ss * t1 + cc * t2;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t1 = ws.J(k, j);
      const double t2 = ws.J(k, j + 1);
      ws.J(k, j) = cc * t1 + ss * t2;
      ws.J(k, j + 1) = -ss * t1 + cc * t2;
    }
  }
}

}  // namespace

QpResult qp_solve(const QpProblem& p) {
  p.validate();
  const Eigen::Index n = p.H.rows();
  const Eigen::Index n_eq = p.A_eq.rows();
  const Eigen::Index n_in = p.A_in.rows();

  QpResult out;
  out.mult_in = Vector::Zero(n_in);

  Eigen::LLT<Matrix> llt(p.H);
  if (llt.info() != Eigen::Success) {
    out.status.state = SolveState::numerical_failure;
    return out;
  }
  const Matrix l = llt.matrixL();
  {
    const double dmax = l.diagonal().maxCoeff();
    const double dmin = l.diagonal().minCoeff();
    if (!(dmin > 0.0) || (dmax / dmin) * (dmax / dmin) > 1e12) {
      out.status.state = SolveState::numerical_failure;
      return out;
    }
  }

  Workspace ws;
  ws.J = Matrix(l.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n)));
  ws.R = Matrix::Zero(n, n);
  ws.active.assign(static_cast<std::size_t>(n), -1);
  ws.u = Vector::Zero(n);

  Vector x = -llt.solve(p.g);
  const double scale =
      std::max({1.0, p.g.cwiseAbs().maxCoeff(), p.H.cwiseAbs().maxCoeff()});
  const double eps = 1e-11 * scale;

  auto objective = [&](const Vector& z) { return 0.5 * z.dot(p.H * z) + p.g.dot(z); };

  Vector d(n), zstep(n), r(n);
  auto compute_steps = [&](const Vector& np) {
    d.noalias() = ws.J.transpose() * np;
    zstep.setZero();
    if (ws.q < n) zstep.noalias() = ws.J.rightCols(n - ws.q) * d.tail(n - ws.q);
    if (ws.q > 0)
      r.head(ws.q) = ws.R.topLeftCorner(ws.q, ws.q)
                         .triangularView<Eigen::Upper>()
                         .solve(d.head(ws.q));
  };

  long iters = 0;

  // Equality constraints enter the active set first and stay there.
  for (Eigen::Index i = 0; i < n_eq; ++i) {
    const Vector np = p.A_eq.row(i).transpose();
    compute_steps(np);
    double t2 = 0.0;
    const bool has_dir = zstep.norm() > 1e-12 * std::max(1.0, np.norm());
    const double resid = p.b_eq(i) - np.dot(x);
    if (has_dir) {
      t2 = resid / zstep.dot(np);
    } else if (std::abs(resid) > 1e-8 * std::max(1.0, std::abs(p.b_eq(i)))) {
      out.status.state = SolveState::infeasible;  // inconsistent equalities
      return out;
    }
    x += t2 * zstep;
    if (ws.q > 0) ws.u.head(ws.q) -= t2 * r.head(ws.q);
    ws.u(ws.q) = t2;
    ws.active[static_cast<std::size_t>(ws.q)] = static_cast<int>(i);
    if (!add_constraint(ws, d)) {
      // Linearly dependent equality that is already satisfied: undo.
      --ws.q;
      ws.R.col(ws.q).setZero();
      ws.active[static_cast<std::size_t>(ws.q)] = -1;
    }
  }

  const long max_iter = 50L * (n + n_in + n_eq) + 100;
  Vector s = Vector::Zero(n_in);

  while (true) {
    if (++iters > max_iter) {
      out.status.state = SolveState::max_iter;
      out.z = x;
      return out;
    }
    // Most violated inequality.
    for (Eigen::Index i = 0; i < n_in; ++i) s(i) = p.b_in(i) - p.A_in.row(i).dot(x);
    int ip = -1;
    double worst = -eps;
    for (Eigen::Index i = 0; i < n_in; ++i) {
      bool in_active = false;
      for (int k = static_cast<int>(n_eq); k < ws.q; ++k)
        if (ws.active[static_cast<std::size_t>(k)] == static_cast<int>(n_eq + i)) in_active = true;
      if (!in_active && s(i) < worst) {
        worst = s(i);
        ip = static_cast<int>(i);
      }
    }
    if (ip < 0) break;  // all inequalities satisfied -> optimal

    const Vector np = -p.A_in.row(ip).transpose();  // inward normal
    double u_plus = 0.0;
    while (true) {
      if (++iters > max_iter) {
        out.status.state = SolveState::max_iter;
        out.z = x;
        return out;
      }
      compute_steps(np);
      // Partial step bound from active inequalities.
      double t1 = kInf;
      int drop_pos = -1;
      for (int k = static_cast<int>(n_eq); k < ws.q; ++k) {
        if (r(k) > 0.0 && ws.u(k) / r(k) < t1) {
          t1 = ws.u(k) / r(k);
          drop_pos = k;
        }
      }
      const bool has_dir = zstep.norm() > 1e-12 * std::max(1.0, np.norm());
      const double sv = p.b_in(ip) - p.A_in.row(ip).dot(x);
      const double t2 = has_dir ? -sv / zstep.dot(np) : kInf;
      const double t = std::min(t1, t2);
      if (t >= kInf) {
        out.status.state = SolveState::infeasible;
        out.z = x;
        return out;
      }
      if (!has_dir) {
        // Dual-only step.
        if (ws.q > 0) ws.u.head(ws.q) -= t * r.head(ws.q);
        u_plus += t;
        delete_constraint(ws, drop_pos);
        continue;
      }
      x += t * zstep;
      if (ws.q > 0) ws.u.head(ws.q) -= t * r.head(ws.q);
      u_plus += t;
      if (t >= t2 - 1e-14 * std::max(1.0, t2)) {
        // Full step: the violated constraint becomes active.
        ws.u(ws.q) = u_plus;
        ws.active[static_cast<std::size_t>(ws.q)] = static_cast<int>(n_eq + ip);
        if (!add_constraint(ws, d)) {
          // Degenerate normal: treat as satisfied and move on.
          --ws.q;
          ws.R.col(ws.q).setZero();
          ws.active[static_cast<std::size_t>(ws.q)] = -1;
        }
        break;
      }
      delete_constraint(ws, drop_pos);
    }
  }

  out.z = x;
  for (int k = static_cast<int>(n_eq); k < ws.q; ++k) {
    const int idx = ws.active[static_cast<std::size_t>(k)] - static_cast<int>(n_eq);
    if (idx >= 0) out.mult_in(idx) = ws.u(k);
  }
  out.status.state = SolveState::optimal;
  out.status.objective = objective(x);
  out.status.iterations = iters;
  double prim = 0.0;
  for (Eigen::Index i = 0; i < n_in; ++i)
    prim = std::max(prim, p.A_in.row(i).dot(x) - p.b_in(i));
  for (Eigen::Index i = 0; i < n_eq; ++i)
    prim = std::max(prim, std::abs(p.A_eq.row(i).dot(x) - p.b_eq(i)));
  out.status.primal_residual = prim;
  Vector stat = p.H * x + p.g;
  if (n_in > 0) stat += p.A_in.transpose() * out.mult_in;
  for (int k = 0; k < static_cast<int>(n_eq); ++k)
    stat -= ws.u(k) * p.A_eq.row(ws.active[static_cast<std::size_t>(k)]).transpose();
  out.status.dual_residual = stat.cwiseAbs().maxCoeff();
  return out;
}

}  // namespace smpc
