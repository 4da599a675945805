#include "smpc/smpc_l.hpp"

#include <cmath>
#include <stdexcept>

namespace smpc {

SigmaD sigmaD_propagate(const SigmaD& sd, const DoubledSystem& dsys, const Matrix& f,
                        const Matrix& k_gain, const Matrix& l_gain, const Matrix& w) {
  const Matrix a_l = dsys.A - l_gain * dsys.C;
  const Matrix a_k = dsys.A - dsys.B * k_gain;
  SigmaD next;
  next.S11 = symmetrize(a_l * sd.S11 * a_l.transpose() + f * w * f.transpose() +
                        l_gain * dsys.V * l_gain.transpose());
  next.S22 = symmetrize(a_k * sd.S22 * a_k.transpose() +
                        l_gain * dsys.C * sd.S11 * dsys.C.transpose() * l_gain.transpose() +
                        l_gain * dsys.V * l_gain.transpose());
  return next;
}

namespace {

// Entry index of a symmetric variable group (upper triangle, column-major).
inline int sym_idx(int i, int j) {
  if (i > j) std::swap(i, j);
  return j * (j + 1) / 2 + i;
}
inline int sym_len(int n) { return n * (n + 1) / 2; }

// Trace-weight coefficient of tr(W X) on the packed entry (i, j) of X.
inline double tr_weight(const Matrix& w, int i, int j) {
  return i == j ? w(i, i) : w(i, j) + w(j, i);
}

Matrix inverse_spd(const Matrix& m, double jitter = 0.0) {
  Matrix a = symmetrize(m);
  if (jitter > 0.0) a.diagonal().array() += jitter;
  return a.ldlt().solve(Matrix::Identity(a.rows(), a.cols()));
}

struct Stamp {
  SdpBlock* blk;
  const Vector* rowscale = nullptr;  // congruence scaling D M D, PSD-preserving

  double sc(int r, int c) const {
    return rowscale ? (*rowscale)(r) * (*rowscale)(c) : 1.0;
  }
  void term(int var_entry, int r, int c, double v) {
    if (v != 0.0) blk->terms.push_back(SdpTerm{var_entry, r, c, v * sc(r, c)});
  }
  void cnst(int r, int c, double v) {
    blk->F0(r, c) += v * sc(r, c);
    if (r != c) blk->F0(c, r) += v * sc(r, c);
  }
  void cnst_block(int r0, int c0, const Matrix& m) {
    // Off-diagonal constant sub-block (mirror implied); for diagonal
    // placement stamp only the upper triangle.
    if (r0 == c0) {
      for (int i = 0; i < m.rows(); ++i)
        for (int j = i; j < m.cols(); ++j) cnst(r0 + i, c0 + j, m(i, j));
    } else {
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) cnst(r0 + i, c0 + j, m(i, j));
    }
  }
  // Symmetric variable group placed on the diagonal at (r0, r0).
  void sym_diag(int base, int n, int r0, double coeff = 1.0) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) term(base + sym_idx(i, j), r0 + i, r0 + j, coeff);
  }
  // Symmetric variable group filling an off-diagonal sub-block.
  void sym_offdiag(int base, int n, int r0, int c0) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i <= j)
          term(base + sym_idx(i, j), r0 + i, c0 + j, 1.0);
        else
          term(base + sym_idx(j, i), r0 + i, c0 + j, 1.0);
      }
  }
  // (S * A)(i, j) with S an n x n symmetric variable, A constant n x q.
  void sym_times_const(int base, int n, const Matrix& a, int r0, int c0) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < a.cols(); ++j)
        for (int l = 0; l < n; ++l) term(base + sym_idx(i, l), r0 + i, c0 + j, a(l, j));
  }
  // (A * S)(i, j) with A constant q x n, S symmetric n x n variable.
  void const_times_sym(const Matrix& a, int base, int n, int r0, int c0, double sign = 1.0) {
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l)
          term(base + sym_idx(l, j), r0 + i, c0 + j, sign * a(i, l));
  }
  // (Z * A)(i, j) with Z an r x c general variable (column-major entries).
  void gen_times_const(int base, int rows, int cols, const Matrix& a, int r0, int c0,
                       double sign = 1.0) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < a.cols(); ++j)
        for (int l = 0; l < cols; ++l)
          term(base + l * rows + i, r0 + i, c0 + j, sign * a(l, j));
  }
  // (A * X)(i, j) with X an r x c general variable.
  void const_times_gen(const Matrix& a, int base, int rows, int cols, int r0, int c0,
                       double sign = 1.0) {
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < cols; ++j)
        for (int l = 0; l < rows; ++l)
          term(base + j * rows + l, r0 + i, c0 + j, sign * a(i, l));
  }
  // General variable placed verbatim.
  void gen_direct(int base, int rows, int cols, int r0, int c0) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) term(base + j * rows + i, r0 + i, c0 + j, 1.0);
  }
};

}  // namespace

struct SmpclController::Layout {
  int n, m, p, nw, N;
  int num_vars = 0;

  std::vector<int> sig11inv, delta, s22;          // k = 0..N (-1 where constant)
  std::vector<int> zmat, xi, mmat, mtil, ubar;    // k = 0..N-1
  std::vector<int> xbar;                          // k = 0..N (-1 at 0)
  std::vector<int> u;                             // k = 0..N-1
  std::vector<int> tau;                           // k = 0..N

  // Block indices that carry state-dependent constants.
  int blk_b45_0 = -1, blk_b54_0 = -1, blk_b48_0 = -1, blk_b57_0 = -1, blk_tau_0 = -1;
  std::vector<int> blk_state_0;  // stage-0 state rows
  Vector base_c;
  // Stage-k block start indices for audits.
  std::vector<int> blk_b45, blk_b54, blk_b48, blk_cone, blk_b57;
  // Per-block congruence row scalings (shared by build and refresh).
  std::vector<Vector> blk_rowscale;

  int add(int len) {
    const int b = num_vars;
    num_vars += len;
    return b;
  }
};

SmpclController::SmpclController(ControllerDesign design, SmpclOptions opts)
    : design_(std::move(design)), opts_(opts) {
  dsys_ = double_system(design_.sys, design_.noise);
  if (design_.SigmaD_bar_11.size() == 0 ||
      spectral_radius(dsys_.A - dsys_.B * design_.Kbar) >= 1.0 ||
      spectral_radius(dsys_.A - design_.Lbar * dsys_.C) >= 1.0)
    throw std::invalid_argument(
        "SmpclController: design lacks the doubled-loop stability prerequisites");
  const int n = design_.n();
  w_eff_ = design_.noise.W;
  if (min_eigenvalue(w_eff_) < 1e-12)
    w_eff_.diagonal().array() += 1e-12;  // the Schur step needs W invertible
  vd_eff_ = 2.0 * design_.noise.V;
  if (min_eigenvalue(vd_eff_) < 1e-12) vd_eff_.diagonal().array() += 1e-12;
  (void)n;
  build_structure();
}

SmpclController::~SmpclController() = default;

void SmpclController::build_structure() {
  const int n = design_.n();
  const int m = design_.m();
  const int p = design_.sys.p();
  const int nw = design_.sys.nw();
  const int N = design_.N;

  layout_ = std::make_unique<Layout>();
  Layout& L = *layout_;
  L.n = n;
  L.m = m;
  L.p = p;
  L.nw = nw;
  L.N = N;

  L.sig11inv.assign(N + 1, -1);
  L.delta.assign(N + 1, -1);
  L.s22.assign(N + 1, -1);
  L.xbar.assign(N + 1, -1);
  for (int k = 1; k <= N; ++k) {
    L.sig11inv[k] = L.add(sym_len(n));
    L.delta[k] = L.add(sym_len(n));
    L.s22[k] = L.add(sym_len(n));
    L.xbar[k] = L.add(n);
  }
  L.zmat.assign(N, -1);
  L.xi.assign(N, -1);
  L.mmat.assign(N, -1);
  L.mtil.assign(N, -1);
  L.ubar.assign(N, -1);
  L.u.assign(N, -1);
  for (int k = 0; k < N; ++k) {
    L.zmat[k] = L.add(n * p);
    L.xi[k] = L.add(m * n);
    L.mmat[k] = L.add(sym_len(n));
    L.mtil[k] = L.add(sym_len(n));
    L.ubar[k] = L.add(sym_len(m));
    L.u[k] = L.add(m);
  }
  L.tau.assign(N + 1, -1);
  for (int k = 0; k <= N; ++k) L.tau[k] = L.add(1);

  SdpProblem& sp = structure_;
  sp = SdpProblem{};
  sp.num_vars = L.num_vars;
  sp.c = Vector::Zero(L.num_vars);
  sp.blocks.clear();

  const Matrix fw = design_.sys.F * w_eff_;
  const Matrix q_sqrt = psd_sqrt(design_.Q);
  const Matrix r_sqrt = psd_sqrt(design_.R);
  const Matrix s_sqrt = psd_sqrt(design_.S);
  const auto state_cons = design_.state_constraints();
  const auto input_cons = design_.input_constraints();

  // Typical magnitudes of the stationary design quantities, used to
  // equilibrate each cone block by congruence.
  const double s11_typ = std::max(design_.SigmaD_bar_11.trace() / n, 1e-9);
  const double s22_typ = std::max(design_.SigmaD_bar_22.trace() / n, 1e-9);
  const double siginv_typ = 1.0 / s11_typ;
  const double w_typ = std::max(w_eff_.trace() / nw, 1e-12);
  const double vd_typ = std::max(vd_eff_.trace() / p, 1e-12);
  double m_typ, u_typ;
  {
    const Matrix ztyp = inverse_spd(design_.SigmaD_bar_11) * design_.Lbar;
    m_typ = std::max(
        (ztyp * (dsys_.C * design_.SigmaD_bar_11 * dsys_.C.transpose() + vd_eff_) *
         ztyp.transpose())
                .trace() /
            n,
        1e-12);
    u_typ = std::max(
        (design_.Kbar * design_.SigmaD_bar_22 * design_.Kbar.transpose()).trace() / m, 1e-12);
  }
  auto dv = [](double typ) { return 1.0 / std::sqrt(typ); };

  auto new_block = [&](int size, Vector rowscale = Vector()) -> Stamp {
    sp.blocks.push_back(SdpBlock{size, Matrix::Zero(size, size), {}});
    if (rowscale.size() == 0) rowscale = Vector::Ones(size);
    L.blk_rowscale.push_back(std::move(rowscale));
    return Stamp{&sp.blocks.back(), &L.blk_rowscale.back()};
  };
  auto group_scale = [&](std::initializer_list<std::pair<int, double>> groups) {
    int total = 0;
    for (const auto& g : groups) total += g.first;
    Vector d(total);
    int at = 0;
    for (const auto& g : groups) {
      d.segment(at, g.first).setConstant(dv(g.second));
      at += g.first;
    }
    return d;
  };

  L.blk_b45.assign(N, -1);
  L.blk_b54.assign(N, -1);
  L.blk_b48.assign(N, -1);
  L.blk_cone.assign(N, -1);
  L.blk_b57.assign(N, -1);
  L.blk_state_0.clear();

  for (int k = 0; k < N; ++k) {
    // Covariance-inverse propagation block.
    {
      L.blk_b45[k] = static_cast<int>(sp.blocks.size());
      Stamp st = new_block(n + nw + p + n,
                           group_scale({{n, siginv_typ}, {nw, w_typ}, {p, vd_typ},
                                        {n, siginv_typ}}));
      const int o2 = n, o3 = n + nw, o4 = n + nw + p;
      if (k == 0)
        L.blk_b45_0 = L.blk_b45[0];
      else
        st.sym_diag(L.sig11inv[k], n, 0);
      st.sym_diag(L.sig11inv[k + 1], n, o4);
      st.sym_times_const(L.sig11inv[k + 1], n, dsys_.A, o4, 0);
      st.gen_times_const(L.zmat[k], n, p, dsys_.C, o4, 0, -1.0);
      st.sym_times_const(L.sig11inv[k + 1], n, fw, o4, o2);
      st.gen_times_const(L.zmat[k], n, p, vd_eff_, o4, o3);
    }
    // M_k >= Z (C^D Sigma11 C^{D,T} + V^D) Z^T block.
    {
      L.blk_b54[k] = static_cast<int>(sp.blocks.size());
      Stamp st = new_block(n + p + n,
                           group_scale({{n, m_typ}, {p, vd_typ}, {n, siginv_typ}}));
      const int r2 = n, r3 = n + p;
      st.sym_diag(L.mmat[k], n, 0);
      st.gen_times_const(L.zmat[k], n, p, vd_eff_, 0, r2);
      st.gen_times_const(L.zmat[k], n, p, dsys_.C, 0, r3);
      if (k == 0)
        L.blk_b54_0 = L.blk_b54[0];
      else
        st.sym_diag(L.sig11inv[k], n, r3);
    }
    // Controller-error covariance propagation block.
    {
      L.blk_b48[k] = static_cast<int>(sp.blocks.size());
      Stamp st = new_block(3 * n,
                           group_scale({{n, s22_typ}, {n, s22_typ}, {n, 1.0 / m_typ}}));
      const int q2 = n, q3 = 2 * n;
      st.sym_diag(L.s22[k + 1], n, 0);
      if (k == 0) {
        L.blk_b48_0 = L.blk_b48[0];
        st.const_times_gen(dsys_.B, L.xi[k], m, n, 0, q2, -1.0);
      } else {
        st.const_times_sym(dsys_.A, L.s22[k], n, 0, q2);
        st.const_times_gen(dsys_.B, L.xi[k], m, n, 0, q2, -1.0);
        st.sym_diag(L.s22[k], n, q2);
      }
      st.sym_offdiag(L.delta[k + 1], n, 0, q3);
      st.sym_diag(L.mtil[k], n, q3);
    }
    // Cone-complementarity coupling.
    {
      L.blk_cone[k] = static_cast<int>(sp.blocks.size());
      Stamp st = new_block(2 * n, group_scale({{n, m_typ}, {n, 1.0 / m_typ}}));
      st.sym_diag(L.mmat[k], n, 0);
      st.sym_diag(L.mtil[k], n, n);
      st.cnst_block(0, n, Matrix::Identity(n, n));
    }
    // Input-variance bound block.
    {
      L.blk_b57[k] = static_cast<int>(sp.blocks.size());
      Stamp st = new_block(m + n, group_scale({{m, u_typ}, {n, s22_typ}}));
      st.sym_diag(L.ubar[k], m, 0);
      st.gen_direct(L.xi[k], m, n, 0, m);
      if (k == 0)
        L.blk_b57_0 = L.blk_b57[0];
      else
        st.sym_diag(L.s22[k], n, m);
    }
    // Linearized chance-constraint rows.
    for (const auto& c : state_cons) {
      const double f = tightening_factor(design_.factor, c.prob);
      const double cf = f * f / (2.0 * design_.alpha_x * c.bound);
      Stamp st = new_block(1);
      if (k == 0) L.blk_state_0.push_back(static_cast<int>(sp.blocks.size()) - 1);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          const double w = (i == j ? c.direction(i) * c.direction(i)
                                   : 2.0 * c.direction(i) * c.direction(j));
          if (k >= 1) {
            st.term(L.delta[k] + sym_idx(i, j), 0, 0, -cf * w);
            st.term(L.s22[k] + sym_idx(i, j), 0, 0, -cf * w);
          }
        }
      if (k >= 1)
        for (int i = 0; i < n; ++i) st.term(L.xbar[k] + i, 0, 0, -c.direction(i));
    }
    for (const auto& c : input_cons) {
      const double f = tightening_factor(design_.factor, c.prob);
      const double cf = f * f / (2.0 * design_.alpha_u * c.bound);
      Stamp st = new_block(1);
      for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
          const double w = (i == j ? c.direction(i) * c.direction(i)
                                   : 2.0 * c.direction(i) * c.direction(j));
          st.term(L.ubar[k] + sym_idx(i, j), 0, 0, -cf * w);
        }
      for (int i = 0; i < m; ++i) st.term(L.u[k] + i, 0, 0, -c.direction(i));
    }
    // Stage mean-cost epigraph.
    {
      Stamp st = new_block(1 + n + m);
      if (k == 0) L.blk_tau_0 = static_cast<int>(sp.blocks.size()) - 1;
      st.term(L.tau[k], 0, 0, 1.0);
      if (k >= 1)
        for (int i = 0; i < n; ++i)
          for (int l = 0; l < n; ++l)
            st.term(L.xbar[k] + l, 0, 1 + i, q_sqrt(i, l));
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < m; ++l) st.term(L.u[k] + l, 0, 1 + n + i, r_sqrt(i, l));
      st.cnst_block(1, 1, Matrix::Identity(n + m, n + m));
    }
  }
  // Delta_k dominates the covariance implied by its inverse variable.
  for (int k = 1; k <= N; ++k) {
    Stamp st = new_block(2 * n, group_scale({{n, s11_typ}, {n, siginv_typ}}));
    st.sym_diag(L.delta[k], n, 0);
    st.sym_diag(L.sig11inv[k], n, n);
    st.cnst_block(0, n, Matrix::Identity(n, n));
  }
  // Terminal blocks.
  {
    Stamp st = new_block(1 + n);
    st.term(L.tau[N], 0, 0, 1.0);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) st.term(L.xbar[N] + l, 0, 1 + i, s_sqrt(i, l));
    st.cnst_block(1, 1, Matrix::Identity(n, n));
  }
  {
    Stamp st = new_block(n, group_scale({{n, siginv_typ}}));
    st.sym_diag(L.sig11inv[N], n, 0);
    st.cnst_block(0, 0, Matrix(-inverse_spd(design_.SigmaD_bar_11)));
  }
  {
    Stamp st = new_block(n, group_scale({{n, s22_typ}}));
    st.sym_diag(L.s22[N], n, 0, -1.0);
    st.cnst_block(0, 0, design_.SigmaD_bar_22);
  }
  for (int i = 0; i < design_.XF_lin.rows(); ++i) {
    Stamp st = new_block(1);
    for (int l = 0; l < n; ++l) st.term(L.xbar[N] + l, 0, 0, -design_.XF_lin.G(i, l));
    st.cnst(0, 0, design_.XF_lin.g(i));
  }

  // Mean dynamics equalities.
  sp.A_eq = Matrix::Zero(N * n, L.num_vars);
  sp.b_eq = Vector::Zero(N * n);
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < n; ++i) {
      const int row = k * n + i;
      sp.A_eq(row, L.xbar[k + 1] + i) = 1.0;
      if (k >= 1)
        for (int j = 0; j < n; ++j) sp.A_eq(row, L.xbar[k] + j) = -design_.sys.A(i, j);
      for (int j = 0; j < m; ++j) sp.A_eq(row, L.u[k] + j) = -design_.sys.B(i, j);
    }
  }

  // Base objective: epigraphs plus the variance-bound cost.
  Vector& c = L.base_c;
  c = Vector::Zero(L.num_vars);
  for (int k = 0; k <= N; ++k) c(L.tau[k]) = 1.0;
  for (int k = 1; k <= N; ++k) {
    const Matrix& wq = (k == N) ? design_.S_L : design_.Q_L;
    const Matrix& ws = (k == N) ? design_.S : design_.Q;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        c(L.delta[k] + sym_idx(i, j)) += tr_weight(wq, i, j);
        c(L.s22[k] + sym_idx(i, j)) += tr_weight(ws, i, j);
      }
  }
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) c(L.ubar[k] + sym_idx(i, j)) += tr_weight(design_.R, i, j);
  sp.c = c;
}

void SmpclController::fill_constants(Strategy s, SdpProblem& sp) const {
  const Layout& L = *layout_;
  const int n = L.n;
  const int nw = L.nw;
  const int p = L.p;
  const int m = L.m;

  const Vector xbar0 = (s == Strategy::reset) ? xhat_ : xbar_pred_;
  const Matrix s11_0 = sd11_pred_;
  const Matrix s22_0 =
      (s == Strategy::reset) ? Matrix(Matrix::Zero(n, n)) : sd22_pred_;
  const Matrix sig11inv_0 = inverse_spd(s11_0, 1e-12);

  // Structural constants shared by every stage block.
  for (int k = 0; k < L.N; ++k) {
    {
      SdpBlock& b = sp.blocks[static_cast<std::size_t>(L.blk_b45[k])];
      b.F0.setZero();
      Stamp st{&b, &L.blk_rowscale[static_cast<std::size_t>(L.blk_b45[k])]};
      st.cnst_block(n, n, w_eff_);
      st.cnst_block(n + nw, n + nw, vd_eff_);
      if (k == 0) st.cnst_block(0, 0, sig11inv_0);
    }
    {
      SdpBlock& b = sp.blocks[static_cast<std::size_t>(L.blk_b54[k])];
      b.F0.setZero();
      Stamp st{&b, &L.blk_rowscale[static_cast<std::size_t>(L.blk_b54[k])]};
      st.cnst_block(n, n, vd_eff_);
      if (k == 0) st.cnst_block(n + p, n + p, sig11inv_0);
    }
    {
      SdpBlock& b = sp.blocks[static_cast<std::size_t>(L.blk_b48[k])];
      b.F0.setZero();
      if (k == 0) {
        Stamp st{&b, &L.blk_rowscale[static_cast<std::size_t>(L.blk_b48[k])]};
        st.cnst_block(0, n, Matrix(dsys_.A * s22_0));
        st.cnst_block(n, n, s22_0);
      }
    }
    {
      SdpBlock& b = sp.blocks[static_cast<std::size_t>(L.blk_b57[k])];
      if (k == 0) {
        b.F0.setZero();
        Stamp st{&b, &L.blk_rowscale[static_cast<std::size_t>(L.blk_b57[k])]};
        st.cnst_block(m, m, s22_0);
      }
    }
  }

  // Stage-0 chance-constraint rows (fully constant).
  const auto state_cons = design_.state_constraints();
  for (std::size_t r = 0; r < state_cons.size(); ++r) {
    const auto& c = state_cons[r];
    const double f = tightening_factor(design_.factor, c.prob);
    const double cf = f * f / (2.0 * design_.alpha_x * c.bound);
    SdpBlock& b = sp.blocks[static_cast<std::size_t>(L.blk_state_0[r])];
    const Matrix xd0 = s11_0 + s22_0;
    b.F0(0, 0) = (1.0 - 0.5 * design_.alpha_x) * c.bound - cf * quad_form(c.direction, xd0) -
                 c.direction.dot(xbar0);
  }
  // The remaining state rows carry the constant margin in F0.
  {
    int blk = 0;
    const auto input_cons = design_.input_constraints();
    for (int k = 0; k < L.N; ++k) {
      blk = L.blk_b57[k] + 1;  // first chance-row block of stage k
      for (std::size_t r = 0; r < state_cons.size(); ++r) {
        if (k >= 1) {
          const auto& c = state_cons[r];
          SdpBlock& b = sp.blocks[static_cast<std::size_t>(blk)];
          b.F0(0, 0) = (1.0 - 0.5 * design_.alpha_x) * c.bound;
        }
        ++blk;
      }
      for (const auto& c : input_cons) {
        SdpBlock& b = sp.blocks[static_cast<std::size_t>(blk)];
        b.F0(0, 0) = (1.0 - 0.5 * design_.alpha_u) * c.bound;
        ++blk;
      }
    }
  }
  // Stage-0 epigraph carries Q^{1/2} xbar0.
  {
    SdpBlock& b = sp.blocks[static_cast<std::size_t>(L.blk_tau_0)];
    b.F0.setZero();
    Stamp st{&b};
    const Vector qx = psd_sqrt(design_.Q) * xbar0;
    for (int i = 0; i < n; ++i) st.cnst(0, 1 + i, qx(i));
    st.cnst_block(1, 1, Matrix::Identity(n + m, n + m));
  }

  // Equality right-hand side.
  sp.b_eq.setZero();
  sp.b_eq.head(n) = design_.sys.A * xbar0;

  // Constant part of the cost (stage-0 covariance terms + stage-0 state norm
  // handled inside the epigraph block).
  sp.offset = (design_.Q_L * s11_0).trace() + (design_.Q * s22_0).trace();
}

SdpProblem SmpclController::assemble_sdp(Strategy s, const std::vector<Matrix>& m_lin,
                                         const std::vector<Matrix>& mt_lin, double mu) const {
  const Layout& L = *layout_;
  SdpProblem p = structure_;
  fill_constants(s, p);
  p.c = L.base_c;
  for (int k = 0; k < L.N; ++k) {
    for (int i = 0; i < L.n; ++i)
      for (int j = i; j < L.n; ++j) {
        p.c(L.mmat[k] + sym_idx(i, j)) += mu * tr_weight(mt_lin[static_cast<std::size_t>(k)], i, j);
        p.c(L.mtil[k] + sym_idx(i, j)) += mu * tr_weight(m_lin[static_cast<std::size_t>(k)], i, j);
      }
  }
  return p;
}

SmpclStageSolution SmpclController::extract(const Vector& z, Strategy s) const {
  const Layout& L = *layout_;
  const int n = L.n;
  const int m = L.m;
  const int N = L.N;

  auto read_sym = [&](int base, int nn) {
    Matrix out(nn, nn);
    for (int i = 0; i < nn; ++i)
      for (int j = i; j < nn; ++j) {
        out(i, j) = z(base + sym_idx(i, j));
        out(j, i) = out(i, j);
      }
    return out;
  };
  auto read_gen = [&](int base, int rows, int cols) {
    Matrix out(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) out(i, j) = z(base + j * rows + i);
    return out;
  };

  SmpclStageSolution sol;
  const Matrix s22_0 = (s == Strategy::reset) ? Matrix(Matrix::Zero(n, n)) : sd22_pred_;
  sol.sig11inv.push_back(inverse_spd(sd11_pred_, 1e-12));
  sol.delta.push_back(sd11_pred_);
  sol.s22.push_back(s22_0);
  sol.xbar.push_back(s == Strategy::reset ? xhat_ : xbar_pred_);
  for (int k = 1; k <= N; ++k) {
    sol.sig11inv.push_back(read_sym(L.sig11inv[k], n));
    sol.delta.push_back(read_sym(L.delta[k], n));
    sol.s22.push_back(read_sym(L.s22[k], n));
    Vector xb(n);
    for (int i = 0; i < n; ++i) xb(i) = z(L.xbar[k] + i);
    sol.xbar.push_back(std::move(xb));
  }
  for (int k = 0; k < N; ++k) {
    sol.zmat.push_back(read_gen(L.zmat[k], n, L.p));
    sol.xi.push_back(read_gen(L.xi[k], m, n));
    sol.mmat.push_back(read_sym(L.mmat[k], n));
    sol.mtil.push_back(read_sym(L.mtil[k], n));
    sol.ubar.push_back(read_sym(L.ubar[k], m));
    Vector uk(m);
    for (int i = 0; i < m; ++i) uk(i) = z(L.u[k] + i);
    sol.u.push_back(std::move(uk));
  }

  sol.jm = 0.0;
  for (int k = 0; k < N; ++k)
    sol.jm += quad_form(sol.xbar[static_cast<std::size_t>(k)], design_.Q) +
              quad_form(sol.u[static_cast<std::size_t>(k)], design_.R);
  sol.jm += quad_form(sol.xbar[static_cast<std::size_t>(N)], design_.S);

  sol.jvd = 0.0;
  for (int k = 0; k < N; ++k)
    sol.jvd += (design_.Q_L * sol.delta[static_cast<std::size_t>(k)]).trace() +
               (design_.Q * sol.s22[static_cast<std::size_t>(k)]).trace() +
               (design_.R * sol.ubar[static_cast<std::size_t>(k)]).trace();
  sol.jvd += (design_.S_L * sol.delta[static_cast<std::size_t>(N)]).trace() +
             (design_.S * sol.s22[static_cast<std::size_t>(N)]).trace();

  double gap = 0.0;
  for (int k = 0; k < N; ++k)
    gap = std::max(gap, (sol.mmat[static_cast<std::size_t>(k)] *
                         sol.mtil[static_cast<std::size_t>(k)]).trace() -
                            static_cast<double>(n));
  sol.ccl_gap = gap;
  return sol;
}

GainSequence recover_gains(const SmpclStageSolution& sol, const ControllerDesign& d) {
  GainSequence g;
  const int horizon = static_cast<int>(sol.zmat.size());
  for (int k = 0; k < horizon; ++k) {
    const Matrix& sig_inv_next = sol.sig11inv[static_cast<std::size_t>(k + 1)];
    g.L.push_back(inverse_spd(sig_inv_next, 1e-12) * sol.zmat[static_cast<std::size_t>(k)]);
    const Matrix& s22 = sol.s22[static_cast<std::size_t>(k)];
    if (min_eigenvalue(s22) < 1e-10) {
      if (s22.cwiseAbs().maxCoeff() < 1e-10) {
        // Zeroed controller-error covariance: any gain is consistent.
        g.K.push_back(d.Kbar);
      } else {
        Matrix reg = s22;
        reg.diagonal().array() += 1e-10;
        g.K.push_back(sol.xi[static_cast<std::size_t>(k)] *
                      reg.ldlt().solve(Matrix::Identity(reg.rows(), reg.cols())));
      }
    } else {
      g.K.push_back(sol.xi[static_cast<std::size_t>(k)] *
                    s22.ldlt().solve(Matrix::Identity(s22.rows(), s22.cols())));
    }
  }
  return g;
}

SmpclController::Rollout SmpclController::gain_rollout(const GainSequence& gains,
                                                       const SigmaD& init) const {
  Rollout out;
  SigmaD sd = init;
  out.sd.push_back(sd);
  for (int k = 0; k < design_.N; ++k) {
    const Matrix& kk = gains.K[static_cast<std::size_t>(k)];
    const Matrix& lk = gains.L[static_cast<std::size_t>(k)];
    out.jvd += (design_.Q_L * sd.S11).trace() + (design_.Q * sd.S22).trace() +
               (design_.R * kk * sd.S22 * kk.transpose()).trace();
    sd = sigmaD_propagate(sd, dsys_, design_.sys.F, kk, lk, w_eff_);
    out.sd.push_back(sd);
  }
  out.jvd += (design_.S_L * sd.S11).trace() + (design_.S * sd.S22).trace();
  out.terminal_ok =
      dominates(design_.SigmaD_bar_11, sd.S11) && dominates(design_.SigmaD_bar_22, sd.S22);
  return out;
}

SmpclController::Rollout SmpclController::constant_gain_rollout(Strategy s) const {
  GainSequence g;
  g.K.assign(static_cast<std::size_t>(design_.N), design_.Kbar);
  g.L.assign(static_cast<std::size_t>(design_.N), design_.Lbar);
  SigmaD init{sd11_pred_, s == Strategy::reset ? Matrix(Matrix::Zero(design_.n(), design_.n()))
                                               : sd22_pred_};
  return gain_rollout(g, init);
}

SmpclController::PluginMean SmpclController::plugin_mean(Strategy s, const Rollout& roll) const {
  PluginMean out;
  if (!roll.terminal_ok) return out;
  const int n = design_.n();
  const int m = design_.m();
  const int N = design_.N;
  const Vector xbar0 = (s == Strategy::reset) ? xhat_ : xbar_pred_;

  std::vector<Matrix> sx(static_cast<std::size_t>(N + 1));
  std::vector<Matrix> su(static_cast<std::size_t>(N + 1));
  sx[0] = Matrix::Identity(n, n);
  su[0] = Matrix::Zero(n, N * m);
  for (int k = 1; k <= N; ++k) {
    sx[static_cast<std::size_t>(k)] = design_.sys.A * sx[static_cast<std::size_t>(k - 1)];
    su[static_cast<std::size_t>(k)] = design_.sys.A * su[static_cast<std::size_t>(k - 1)];
    su[static_cast<std::size_t>(k)].block(0, (k - 1) * m, n, m) = design_.sys.B;
  }

  std::vector<Vector> rows;
  std::vector<double> rhs;
  for (int k = 0; k < N; ++k) {
    const Matrix xd = roll.sd[static_cast<std::size_t>(k)].S11 +
                      roll.sd[static_cast<std::size_t>(k)].S22;
    const Matrix ud = design_.Kbar * roll.sd[static_cast<std::size_t>(k)].S22 *
                      design_.Kbar.transpose();
    for (const auto& c : design_.constraints) {
      const bool is_state = c.kind == ConstraintKind::state;
      const double margin = linearized_tightened_bound(
          c, is_state ? xd : ud, design_.factor, is_state ? design_.alpha_x : design_.alpha_u);
      if (is_state) {
        if (k == 0) {
          if (c.direction.dot(xbar0) > margin + 1e-9) return out;
          continue;
        }
        rows.push_back(su[static_cast<std::size_t>(k)].transpose() * c.direction);
        rhs.push_back(margin - c.direction.dot(sx[static_cast<std::size_t>(k)] * xbar0));
      } else {
        Vector row = Vector::Zero(N * m);
        row.segment(k * m, m) = c.direction;
        rows.push_back(std::move(row));
        rhs.push_back(margin);
      }
    }
  }
  for (int i = 0; i < design_.XF_lin.rows(); ++i) {
    const Vector dir = design_.XF_lin.G.row(i).transpose();
    rows.push_back(su[static_cast<std::size_t>(N)].transpose() * dir);
    rhs.push_back(design_.XF_lin.g(i) - dir.dot(sx[static_cast<std::size_t>(N)] * xbar0));
  }

  QpProblem qp;
  const int nu = N * m;
  qp.H = Matrix::Identity(nu, nu);
  qp.g = Vector::Zero(nu);
  qp.A_in.resize(static_cast<Eigen::Index>(rows.size()), nu);
  qp.b_in.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    qp.A_in.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    qp.b_in(static_cast<Eigen::Index>(i)) = rhs[i];
  }
  qp.A_eq.resize(0, nu);
  qp.b_eq.resize(0);
  const QpResult qr = qp_solve(qp);
  if (qr.status.state != SolveState::optimal) return out;
  out.feasible = true;
  out.xbar.push_back(xbar0);
  for (int k = 0; k < N; ++k) {
    out.u.push_back(qr.z.segment(k * m, m));
    out.xbar.push_back(design_.sys.A * out.xbar.back() + design_.sys.B * out.u.back());
  }
  return out;
}

std::optional<Vector> SmpclController::plugin_point(Strategy s) const {
  const Layout& L = *layout_;
  const Rollout roll = constant_gain_rollout(s);
  const PluginMean mean = plugin_mean(s, roll);
  if (!mean.feasible) return std::nullopt;

  Vector z = Vector::Zero(L.num_vars);
  auto put_sym = [&](int base, const Matrix& mat) {
    for (int i = 0; i < mat.rows(); ++i)
      for (int j = i; j < mat.cols(); ++j) z(base + sym_idx(i, j)) = mat(i, j);
  };
  auto put_gen = [&](int base, const Matrix& mat) {
    for (int j = 0; j < mat.cols(); ++j)
      for (int i = 0; i < mat.rows(); ++i) z(base + j * mat.rows() + i) = mat(i, j);
  };
  for (int k = 1; k <= L.N; ++k) {
    const Matrix& s11 = roll.sd[static_cast<std::size_t>(k)].S11;
    put_sym(L.sig11inv[k], inverse_spd(s11, 1e-12));
    put_sym(L.delta[k], s11);
    put_sym(L.s22[k], roll.sd[static_cast<std::size_t>(k)].S22);
    for (int i = 0; i < L.n; ++i) z(L.xbar[k] + i) = mean.xbar[static_cast<std::size_t>(k)](i);
  }
  for (int k = 0; k < L.N; ++k) {
    const Matrix& s11 = roll.sd[static_cast<std::size_t>(k)].S11;
    const Matrix& s11n = roll.sd[static_cast<std::size_t>(k + 1)].S11;
    const Matrix& s22 = roll.sd[static_cast<std::size_t>(k)].S22;
    const Matrix zk = inverse_spd(s11n, 1e-12) * design_.Lbar;
    Matrix mk = symmetrize(zk * (dsys_.C * s11 * dsys_.C.transpose() + vd_eff_) * zk.transpose());
    mk.diagonal().array() += 1e-9 * std::max(1.0, mk.trace());
    put_gen(L.zmat[k], zk);
    put_gen(L.xi[k], Matrix(design_.Kbar * s22));
    put_sym(L.mmat[k], mk);
    put_sym(L.mtil[k], inverse_spd(mk));
    put_sym(L.ubar[k], symmetrize(design_.Kbar * s22 * design_.Kbar.transpose()));
    for (int i = 0; i < L.m; ++i) z(L.u[k] + i) = mean.u[static_cast<std::size_t>(k)](i);
    z(L.tau[k]) = quad_form(mean.xbar[static_cast<std::size_t>(k)], design_.Q) +
                  quad_form(mean.u[static_cast<std::size_t>(k)], design_.R);
  }
  z(L.tau[L.N]) = quad_form(mean.xbar[static_cast<std::size_t>(L.N)], design_.S);
  return z;
}

SmpclController::CclOutcome SmpclController::solve_for(Strategy s) {
  const int n = design_.n();
  const int N = design_.N;
  CclOutcome out;

  // Cone linearization from the offline-gain rollout.
  const Rollout roll = constant_gain_rollout(s);
  std::vector<Matrix> m_lin, mt_lin;
  m_lin.reserve(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    const Matrix s11_next = roll.sd[static_cast<std::size_t>(k + 1)].S11;
    const Matrix zk = inverse_spd(s11_next, 1e-12) * design_.Lbar;
    Matrix mk = symmetrize(zk * (dsys_.C * roll.sd[static_cast<std::size_t>(k)].S11 *
                                     dsys_.C.transpose() +
                                 vd_eff_) *
                           zk.transpose());
    mk.diagonal().array() += 1e-10 * std::max(1.0, mk.trace());
    m_lin.push_back(mk);
    mt_lin.push_back(inverse_spd(mk));
  }
  SdpWarmStart& warm = (s == Strategy::reset) ? warm_reset_ : warm_pred_;
  if (!kernel_) {
    SdpProblem probe = assemble_sdp(s, m_lin, mt_lin, 0.0);
    kernel_ = std::make_unique<SdpKernel>(probe, opts_.sdp);
  }
  // The cone penalty weight is pinned to the cost at the constant-gain
  // candidate, held fixed across the linearization sweeps.
  double j0 = std::max(roll.jvd, 1e-9);
  const auto zp = plugin_point(s);
  if (zp) j0 = std::max(j0, layout_->base_c.dot(*zp));
  const double mu = opts_.ccl_mu_fraction * j0 / static_cast<double>(n);
  if (!warm.valid && zp) {
    // Seed at the exactly feasible constant-gain candidate.
    const SdpProblem p0 = assemble_sdp(s, m_lin, mt_lin, mu);
    kernel_->seed(warm, p0, *zp);
  }

  double prev_gap = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  for (int j = 0; j < opts_.ccl_max_iter; ++j) {
    const SdpProblem p = assemble_sdp(s, m_lin, mt_lin, mu);
    const SdpResult r = kernel_->solve(p, &warm);
    out.sdp_iterations += r.status.iterations;
    out.sdp_state = r.status.state;
    if (r.status.state != SolveState::optimal) {
      if (j == 0) return out;  // strategy infeasible
      out.ccl_iterations = j;
      return out;  // keep the last converged iterate
    }
    SmpclStageSolution sol = extract(r.z, s);
    out.sol = std::move(sol);
    out.feasible = true;
    out.gap = out.sol.ccl_gap;
    out.ccl_iterations = j + 1;
    if (out.gap <= opts_.ccl_gap_tol * n) return out;
    if (prev_gap - out.gap < 1e-6 * n) {
      if (++stagnant >= 3) return out;  // stalled; keep the best iterate
    } else {
      stagnant = 0;
    }
    prev_gap = out.gap;
    for (int k = 0; k < N; ++k) {
      m_lin[static_cast<std::size_t>(k)] = out.sol.mmat[static_cast<std::size_t>(k)];
      mt_lin[static_cast<std::size_t>(k)] = out.sol.mtil[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

void SmpclController::init(const Vector& xhat0, const Matrix& sigma11_0) {
  const int n = design_.n();
  if (xhat0.size() != n) throw std::invalid_argument("init: estimate dimension mismatch");
  xhat_ = xhat0;
  xbar_pred_ = xhat0;
  sd11_pred_ = symmetrize(sigma11_0);
  if (min_eigenvalue(sd11_pred_) < 1e-12) sd11_pred_.diagonal().array() += 1e-12;
  sd22_pred_ = Matrix::Zero(n, n);
  prev_u_.resize(0);
  prev_xbar_.clear();
  prev_gains_ = GainSequence{};
  warm_reset_ = SdpWarmStart{};
  warm_pred_ = SdpWarmStart{};
  t_ = 0;
}

bool SmpclController::initial_feasible() {
  if (t_ != 0) throw std::logic_error("initial_feasible: controller already advanced");
  const Rollout roll = constant_gain_rollout(Strategy::reset);
  if (plugin_mean(Strategy::reset, roll).feasible) return true;
  return solve_for(Strategy::reset).feasible;
}

double SmpclController::shifted_cost() const {
  const int m = design_.m();
  double jm = 0.0;
  for (int k = 1; k < design_.N; ++k) {
    const Vector& xk = prev_xbar_[static_cast<std::size_t>(k)];
    const Vector uk = prev_u_.segment(k * m, m);
    jm += quad_form(xk, design_.Q) + quad_form(uk, design_.R);
  }
  const Vector& xn = prev_xbar_[static_cast<std::size_t>(design_.N)];
  const Vector un = -design_.Kbar * xn;
  const Vector xnp = design_.a_k() * xn;
  jm += quad_form(xn, design_.Q) + quad_form(un, design_.R) + quad_form(xnp, design_.S);

  GainSequence shifted;
  for (int k = 1; k < design_.N; ++k) {
    shifted.K.push_back(prev_gains_.K[static_cast<std::size_t>(k)]);
    shifted.L.push_back(prev_gains_.L[static_cast<std::size_t>(k)]);
  }
  shifted.K.push_back(design_.Kbar);
  shifted.L.push_back(design_.Lbar);
  const Rollout roll = gain_rollout(shifted, SigmaD{sd11_pred_, sd22_pred_});
  return jm + roll.jvd;
}

StepResult SmpclController::step(const Vector& y) {
  if (t_ < 0) throw std::logic_error("SmpclController: call init() before step()");
  const int m = design_.m();

  StepResult res;
  StepDiagnostics& diag = res.diag;

  CclOutcome reset = solve_for(Strategy::reset);
  diag.reset_feasible = reset.feasible;
  diag.ccl_iterations = reset.ccl_iterations;
  diag.sdp_iterations = reset.sdp_iterations;
  if (reset.feasible) {
    diag.j_reset = reset.sol.total_cost();
    diag.ccl_gap = reset.gap;
  }

  bool use_reset = true;
  CclOutcome pred;
  if (t_ == 0) {
    if (!reset.feasible)
      throw InfeasibleAtStart("initial condition outside the feasibility set");
  } else if (opts_.exact_strategy_mode) {
    pred = solve_for(Strategy::prediction);
    diag.prediction_feasible = pred.feasible;
    if (!reset.feasible && !pred.feasible)
      throw std::runtime_error("both strategies infeasible at t > 0");
    use_reset = reset.feasible &&
                (!pred.feasible || reset.sol.total_cost() <= pred.sol.total_cost());
  } else if (reset.feasible) {
    diag.j_shifted = shifted_cost();
    if (reset.sol.total_cost() > diag.j_shifted) {
      pred = solve_for(Strategy::prediction);
      diag.prediction_feasible = pred.feasible;
      use_reset = !pred.feasible;
    }
  } else {
    pred = solve_for(Strategy::prediction);
    diag.prediction_feasible = pred.feasible;
    if (!pred.feasible) throw std::runtime_error("both strategies infeasible at t > 0");
    use_reset = false;
  }

  const CclOutcome& chosen = use_reset ? reset : pred;
  const Strategy strat = use_reset ? Strategy::reset : Strategy::prediction;
  if (!use_reset) {
    diag.ccl_iterations = pred.ccl_iterations;
    diag.sdp_iterations += pred.sdp_iterations;
    diag.ccl_gap = pred.gap;
  }
  diag.strategy_used = strat;
  diag.j_star = chosen.sol.total_cost();

  const Vector xbar_now = chosen.sol.xbar[0];
  const Matrix s22_now = chosen.sol.s22[0];
  GainSequence gains = recover_gains(chosen.sol, design_);

  const Vector u_first = chosen.sol.u[0];
  res.u = u_first - gains.K[0] * (xhat_ - xbar_now);
  res.xbar = xbar_now;
  res.sigma_trace = sd11_pred_.trace() + s22_now.trace();

  // Current-stage slack of the linearized rows.
  diag.margins.resize(static_cast<Eigen::Index>(design_.constraints.size()));
  {
    const Matrix xd0 = sd11_pred_ + s22_now;
    const Matrix ud0 = symmetrize(gains.K[0] * s22_now * gains.K[0].transpose());
    Eigen::Index i = 0;
    for (const auto& c : design_.constraints) {
      const bool is_state = c.kind == ConstraintKind::state;
      const double margin = linearized_tightened_bound(
          c, is_state ? xd0 : ud0, design_.factor, is_state ? design_.alpha_x : design_.alpha_u);
      diag.margins(i) = margin - c.direction.dot(is_state ? xbar_now : u_first);
      ++i;
    }
  }

  // Advance the carried bounds with the applied stage-0 gains.
  const SigmaD sd_next = sigmaD_propagate(SigmaD{sd11_pred_, s22_now}, dsys_, design_.sys.F,
                                          gains.K[0], gains.L[0], w_eff_);
  xhat_ = design_.sys.A * xhat_ + design_.sys.B * res.u +
          gains.L[0] * (y - design_.sys.C * xhat_);
  sd11_pred_ = sd_next.S11;
  sd22_pred_ = sd_next.S22;

  // Shifted-candidate bookkeeping.
  prev_u_.resize(design_.N * m);
  for (int k = 0; k < design_.N; ++k) prev_u_.segment(k * m, m) = chosen.sol.u[static_cast<std::size_t>(k)];
  prev_xbar_ = chosen.sol.xbar;
  prev_gains_ = std::move(gains);
  xbar_pred_ = prev_xbar_[1];
  ++t_;
  return res;
}

}  // namespace smpc
