#include "smpc/sdp.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace smpc {

Matrix psd_project(const Matrix& sym) {
  const Matrix s = symmetrize(sym);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  Vector ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void SdpProblem::validate() const {
  if (static_cast<int>(c.size()) != num_vars)
    throw std::invalid_argument("SdpProblem: objective size mismatch");
  for (const auto& b : blocks) {
    if (b.F0.rows() != b.size || b.F0.cols() != b.size)
      throw std::invalid_argument("SdpProblem: F0 size mismatch");
    for (const auto& t : b.terms) {
      if (t.var < 0 || t.var >= num_vars || t.row < 0 || t.row >= b.size || t.col < 0 ||
          t.col >= b.size)
        throw std::invalid_argument("SdpProblem: term out of range");
    }
  }
  if (A_eq.rows() != b_eq.size()) throw std::invalid_argument("SdpProblem: b_eq size mismatch");
  if (A_eq.rows() > 0 && A_eq.cols() != num_vars)
    throw std::invalid_argument("SdpProblem: A_eq column mismatch");
}

namespace {

// Packed upper triangle with sqrt(2)-scaled off-diagonals (an isometry).
inline Eigen::Index svec_len(int n) { return static_cast<Eigen::Index>(n) * (n + 1) / 2; }
inline Eigen::Index svec_idx(int i, int j) {
  // requires i <= j
  return static_cast<Eigen::Index>(j) * (j + 1) / 2 + i;
}

const double kSqrt2 = std::sqrt(2.0);

void svec_into(const Matrix& m, Eigen::Ref<Vector> out) {
  const int n = static_cast<int>(m.rows());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) out(svec_idx(i, j)) = kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    out(svec_idx(j, j)) = m(j, j);
  }
}

void smat_into(const Eigen::Ref<const Vector>& v, Matrix& out, int n) {
  out.resize(n, n);
  for (int j = 0; j < n; ++j) {
    out(j, j) = v(svec_idx(j, j));
    for (int i = 0; i < j; ++i) {
      const double x = v(svec_idx(i, j)) / kSqrt2;
      out(i, j) = x;
      out(j, i) = x;
    }
  }
}

// PSD projection of an svec segment in place; returns the minimum eigenvalue
// encountered (before clipping).
double project_svec(Eigen::Ref<Vector> v, int n, Matrix& scratch) {
  if (n == 1) {
    const double mn = v(0);
    v(0) = std::max(0.0, v(0));
    return mn;
  }
  if (n == 2) {
    const double a = v(0), c = v(2), b = v(1) / kSqrt2;
    const double tr = a + c;
    const double disc = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
    const double l1 = 0.5 * tr - disc, l2 = 0.5 * tr + disc;
    if (l1 >= 0.0) return l1;
    if (l2 <= 0.0) {
      v.setZero();
      return l1;
    }
    // rank-1 update: keep the positive eigenpair
    double ex, ey;
    if (std::abs(b) > 1e-300) {
      ex = b;
      ey = l2 - a;
    } else {
      ex = a >= c ? 1.0 : 0.0;
      ey = a >= c ? 0.0 : 1.0;
    }
    const double nrm = std::hypot(ex, ey);
    ex /= nrm;
    ey /= nrm;
    v(0) = l2 * ex * ex;
    v(1) = kSqrt2 * l2 * ex * ey;
    v(2) = l2 * ey * ey;
    return l1;
  }
  smat_into(v, scratch, n);
  Eigen::SelfAdjointEigenSolver<Matrix> es(scratch);
  const double mn = es.eigenvalues().minCoeff();
  if (mn >= 0.0) return mn;
  Vector ev = es.eigenvalues().cwiseMax(0.0);
  scratch = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  svec_into(scratch, v);
  return mn;
}

}  // namespace

// Saddle-point solve via the Schur complement: P z + A^T nu = r1, A z = r2
// with P = rho F^T F + sigma I positive definite.
struct KktFactor {
  Eigen::LLT<Matrix> llt_p;
  Matrix pinv_at;  // P^{-1} A^T
  Eigen::LLT<Matrix> llt_s;

  void solve(const Vector& r1, const Vector& r2, Vector& z) const {
    Vector t = llt_p.solve(r1);
    if (pinv_at.cols() > 0) {
      Vector nu = llt_s.solve(pinv_at.transpose() * r1 - r2);
      z = t - pinv_at * nu;
    } else {
      z = t;
    }
  }
};

struct SdpKernel::Impl {
  SdpOptions opts;
  int num_vars = 0;
  Eigen::Index total_svec = 0;
  std::vector<int> block_sizes;
  std::vector<Eigen::Index> block_offsets;
  Eigen::SparseMatrix<double> fmap;   // total_svec x num_vars (scaled)
  Matrix a_eq;                        // scaled equalities
  Vector var_scale;                   // z = var_scale .* z_scaled
  Vector block_scale;                 // block b divided by block_scale(b)
  Vector eq_scale;                    // row scaling of A_eq
  Matrix ftf;                         // fmap^T fmap (dense)
  double sigma = 1e-6;

  mutable std::mutex factor_mutex;
  mutable std::map<long, std::shared_ptr<KktFactor>> factors;  // key: rho exponent

  double rho_from_key(long k) const { return opts.rho * std::pow(4.0, static_cast<double>(k)); }

  std::shared_ptr<KktFactor> factor_for(long key) const {
    std::lock_guard<std::mutex> lock(factor_mutex);
    auto it = factors.find(key);
    if (it != factors.end()) return it->second;
    const double rho = rho_from_key(key);
    const Eigen::Index ne = a_eq.rows();
    Matrix p = rho * ftf;
    p.diagonal().array() += sigma;
    auto f = std::make_shared<KktFactor>();
    f->llt_p.compute(p);
    if (ne > 0) {
      f->pinv_at = f->llt_p.solve(a_eq.transpose());
      Matrix schur = a_eq * f->pinv_at;
      schur.diagonal().array() += 1e-9;
      f->llt_s.compute(schur);
    }
    factors.emplace(key, f);
    return f;
  }

  // Scaled constants for one concrete problem instance.
  void scaled_constants(const SdpProblem& p, Vector& f0, Vector& c, Vector& beq) const {
    f0.resize(total_svec);
    for (std::size_t b = 0; b < block_sizes.size(); ++b) {
      Vector seg(svec_len(block_sizes[b]));
      svec_into(p.blocks[b].F0, seg);
      f0.segment(block_offsets[b], seg.size()) = seg / block_scale(static_cast<Eigen::Index>(b));
    }
    c = p.c.cwiseProduct(var_scale);
    beq = p.b_eq.cwiseProduct(eq_scale);
  }
};

SdpKernel::SdpKernel(const SdpProblem& structure, SdpOptions opts) : impl_(new Impl) {
  structure.validate();
  Impl& im = *impl_;
  im.opts = opts;
  im.num_vars = structure.num_vars;

  im.block_sizes.reserve(structure.blocks.size());
  Eigen::Index off = 0;
  for (const auto& b : structure.blocks) {
    im.block_sizes.push_back(b.size);
    im.block_offsets.push_back(off);
    off += svec_len(b.size);
  }
  im.total_svec = off;

  // Column scaling from the raw coefficients.
  im.var_scale = Vector::Ones(im.num_vars);
  Vector colmax = Vector::Zero(im.num_vars);
  for (const auto& b : structure.blocks)
    for (const auto& t : b.terms)
      colmax(t.var) = std::max(colmax(t.var), std::abs(t.coeff));
  for (Eigen::Index j = 0; j < structure.A_eq.rows(); ++j)
    for (Eigen::Index k = 0; k < structure.A_eq.cols(); ++k)
      colmax(k) = std::max(colmax(k), std::abs(structure.A_eq(j, k)));
  for (Eigen::Index k = 0; k < im.num_vars; ++k)
    im.var_scale(k) = colmax(k) > 1e-12 ? 1.0 / colmax(k) : 1.0;

  // Block scaling after column scaling.
  im.block_scale = Vector::Ones(static_cast<Eigen::Index>(structure.blocks.size()));
  for (std::size_t b = 0; b < structure.blocks.size(); ++b) {
    double mx = std::max(1e-12, structure.blocks[b].F0.cwiseAbs().maxCoeff());
    for (const auto& t : structure.blocks[b].terms)
      mx = std::max(mx, std::abs(t.coeff) * im.var_scale(t.var));
    im.block_scale(static_cast<Eigen::Index>(b)) = std::max(1.0, mx);
  }

  // Assemble the scaled coefficient map.
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t b = 0; b < structure.blocks.size(); ++b) {
    const auto& blk = structure.blocks[b];
    const double bs = im.block_scale(static_cast<Eigen::Index>(b));
    for (const auto& t : blk.terms) {
      const int i = std::min(t.row, t.col);
      const int j = std::max(t.row, t.col);
      const double v = (i == j ? t.coeff : kSqrt2 * t.coeff) * im.var_scale(t.var) / bs;
      trips.emplace_back(static_cast<int>(im.block_offsets[b] + svec_idx(i, j)), t.var, v);
    }
  }
  im.fmap.resize(im.total_svec, im.num_vars);
  im.fmap.setFromTriplets(trips.begin(), trips.end());
  im.fmap.makeCompressed();

  // Scaled equalities.
  const Eigen::Index ne = structure.A_eq.rows();
  im.eq_scale = Vector::Ones(ne);
  im.a_eq.resize(ne, im.num_vars);
  for (Eigen::Index i = 0; i < ne; ++i) {
    Vector row = structure.A_eq.row(i).transpose().cwiseProduct(im.var_scale);
    const double s = std::max(row.cwiseAbs().maxCoeff(), 1e-12);
    im.eq_scale(i) = 1.0 / s;
    im.a_eq.row(i) = row.transpose() / s;
  }

  im.ftf = Matrix(im.fmap.transpose() * im.fmap);
}

SdpKernel::~SdpKernel() = default;

void SdpKernel::seed(SdpWarmStart& warm, const SdpProblem& p, const Vector& z0) const {
  const Impl& im = *impl_;
  Vector f0, c, beq;
  im.scaled_constants(p, f0, c, beq);
  warm.z = z0.cwiseQuotient(im.var_scale);
  Vector v = im.fmap * warm.z + f0;
  Matrix scratch;
  for (std::size_t b = 0; b < im.block_sizes.size(); ++b)
    project_svec(v.segment(im.block_offsets[b], svec_len(im.block_sizes[b])),
                 im.block_sizes[b], scratch);
  warm.s = v;
  warm.y = Vector::Zero(im.total_svec);
  warm.rho = 0.0;
  warm.valid = true;
}

SdpResult SdpKernel::solve(const SdpProblem& p, SdpWarmStart* warm) const {
  const Impl& im = *impl_;
  if (static_cast<int>(p.blocks.size()) != static_cast<int>(im.block_sizes.size()) ||
      p.num_vars != im.num_vars)
    throw std::invalid_argument("SdpKernel: problem does not match kernel structure");

  Vector f0, c, beq;
  im.scaled_constants(p, f0, c, beq);

  const Eigen::Index d = im.num_vars;
  const Eigen::Index ns = im.total_svec;
  const Eigen::Index ne = im.a_eq.rows();

  long rho_key = 0;
  Vector z = Vector::Zero(d);
  Vector s = Vector::Zero(ns);
  Vector y = Vector::Zero(ns);
  if (warm && warm->valid && warm->z.size() == d) {
    z = warm->z;
    s = warm->s;
    y = warm->y;
    if (warm->rho > 0.0) {
      rho_key = std::lround(std::log(warm->rho / im.opts.rho) / std::log(4.0));
      rho_key = std::clamp(rho_key, -6L, 6L);
    }
  }

  double rho = im.rho_from_key(rho_key);
  auto fact = im.factor_for(rho_key);

  Vector r1(d), v(ns), s_prev(ns);
  Matrix scratch;
  const double tol = im.opts.tol;

  double best_prim = std::numeric_limits<double>::infinity();
  double window_best = best_prim;
  long window_start = 0;
  SdpResult out;
  out.status.state = SolveState::max_iter;

  long it = 0;
  for (; it < im.opts.max_iter; ++it) {
    // Affine step.
    r1 = im.sigma * z - c + rho * (im.fmap.transpose() * (s - y - f0));
    fact->solve(r1, beq, z);

    v.noalias() = im.fmap * z;
    v += f0;

    // Cone step.
    s_prev = s;
    s = v + y;
    for (std::size_t b = 0; b < im.block_sizes.size(); ++b)
      project_svec(s.segment(im.block_offsets[b], svec_len(im.block_sizes[b])),
                   im.block_sizes[b], scratch);

    y += v - s;

    const double r_prim = (v - s).cwiseAbs().maxCoeff();
    const double r_dual = rho * (im.fmap.transpose() * (s - s_prev)).cwiseAbs().maxCoeff();
    const double prim_scale = std::max({1.0, v.cwiseAbs().maxCoeff(), s.cwiseAbs().maxCoeff()});
    const double dual_scale =
        std::max(1.0, rho * (im.fmap.transpose() * y).cwiseAbs().maxCoeff());

    if (im.opts.trace_every > 0 && it % im.opts.trace_every == 0)
      std::fprintf(stderr, "  it=%6ld rho=%g r_prim=%.3e (%.1e) r_dual=%.3e (%.1e) obj=%.6f\n",
                   it, rho, r_prim, tol * prim_scale, r_dual, tol * dual_scale,
                   c.dot(z) + p.offset);

    if (r_prim <= tol * prim_scale && r_dual <= tol * dual_scale) {
      out.status.state = SolveState::optimal;
      ++it;
      break;
    }

    best_prim = std::min(best_prim, r_prim);
    if (it - window_start >= 1000) {
      // Stalled and far from feasible: declare the problem infeasible.
      if (best_prim > 0.999 * window_best && r_prim > 100.0 * tol * prim_scale) {
        out.status.state = SolveState::infeasible;
        ++it;
        break;
      }
      window_best = best_prim;
      window_start = it;
    }
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e12) {
      out.status.state = SolveState::infeasible;
      ++it;
      break;
    }

    if (im.opts.adapt_rho && it > 0 && it % 100 == 0) {
      const double pr = r_prim / (tol * prim_scale);
      const double dr = r_dual / (tol * dual_scale);
      long new_key = rho_key;
      if (pr > 10.0 * dr && rho_key < 6) new_key = rho_key + 1;
      if (dr > 10.0 * pr && rho_key > -6) new_key = rho_key - 1;
      if (new_key != rho_key) {
        const double new_rho = im.rho_from_key(new_key);
        y *= rho / new_rho;
        rho_key = new_key;
        rho = new_rho;
        fact = im.factor_for(rho_key);
      }
    }
  }

  out.z = z.cwiseProduct(im.var_scale);
  out.status.iterations = it;
  out.status.objective = p.c.dot(out.z) + p.offset;

  // Unscaled feasibility report.
  double prim = 0.0;
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    Matrix m = p.blocks[b].F0;
    for (const auto& t : p.blocks[b].terms) {
      m(t.row, t.col) += t.coeff * out.z(t.var);
      if (t.row != t.col) m(t.col, t.row) += t.coeff * out.z(t.var);
    }
    const double scale = std::max(1.0, std::abs(m.trace()));
    prim = std::max(prim, -min_eigenvalue(m) / scale);
  }
  if (ne > 0) {
    const Vector res = p.A_eq * out.z - p.b_eq;
    for (Eigen::Index i = 0; i < ne; ++i)
      prim = std::max(prim, std::abs(res(i)) / std::max(1.0, std::abs(p.b_eq(i))));
  }
  out.status.primal_residual = prim;
  out.status.dual_residual = 0.0;
  if (out.status.state == SolveState::optimal && prim > 10.0 * tol)
    out.status.state = SolveState::max_iter;

  if (warm) {
    warm->valid = true;
    warm->rho = rho;
    warm->z = z;
    warm->s = s;
    warm->y = y;
  }
  return out;
}

SdpResult sdp_solve(const SdpProblem& p, const SdpOptions& opts) {
  SdpKernel kernel(p, opts);
  return kernel.solve(p);
}

}  // namespace smpc
