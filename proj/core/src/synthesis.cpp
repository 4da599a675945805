#include "smpc/synthesis.hpp"

#include <cmath>
#include <stdexcept>

namespace smpc {

DoubledSystem double_system(const LinearSystem& sys, const NoiseSpec& noise) {
  const double s2 = std::sqrt(2.0);
  return DoubledSystem{s2 * sys.A, s2 * sys.B, s2 * sys.C, 2.0 * noise.V};
}

Matrix dare_fixed_point(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                        double tol, long max_iter) {
  Matrix p = q;
  for (long it = 0; it < max_iter; ++it) {
    const Matrix btp = b.transpose() * p;
    const Matrix gain_denom = r + btp * b;
    const Matrix k = gain_denom.ldlt().solve(btp * a);
    const Matrix next =
        symmetrize(a.transpose() * p * a - a.transpose() * p * b * k + q);
    const double delta = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (delta <= tol * std::max(1.0, p.cwiseAbs().maxCoeff())) return p;
  }
  throw std::runtime_error("dare_fixed_point: no convergence within iteration budget");
}

LqgGains lqg_gains(const DoubledSystem& dsys, const Matrix& f, const Matrix& q, const Matrix& r,
                   const Matrix& wbar, const Matrix& vbar) {
  if (min_eigenvalue(r) <= 0.0) throw std::invalid_argument("lqg_gains: R must be PD");
  if (min_eigenvalue(vbar) <= 0.0) throw std::invalid_argument("lqg_gains: Vbar must be PD");

  LqgGains out;
  {
    const Matrix p = dare_fixed_point(dsys.A, dsys.B, q, r);
    out.K = (r + dsys.B.transpose() * p * dsys.B).ldlt().solve(dsys.B.transpose() * p * dsys.A);
  }
  {
    const Matrix qn = symmetrize(f * wbar * f.transpose());
    const Matrix p = dare_fixed_point(dsys.A.transpose(), dsys.C.transpose(), qn, vbar);
    out.L = (p * dsys.C.transpose()) *
            (dsys.C * p * dsys.C.transpose() + vbar).ldlt().solve(
                Matrix::Identity(vbar.rows(), vbar.cols()));
    out.L = dsys.A * out.L;
  }
  return out;
}

Matrix steady_covariance(const AugmentedDynamics& dyn, const Matrix& omega_bar) {
  if (spectral_radius(dyn.Phi) >= 1.0)
    throw std::runtime_error("steady_covariance: closed loop is not Schur stable");
  return dlyap(dyn.Phi, symmetrize(dyn.Psi * omega_bar * dyn.Psi.transpose()));
}

TerminalWeights terminal_weights(const LinearSystem& sys, const Matrix& kbar,
                                 const Matrix& lbar, const Matrix& q, const Matrix& r,
                                 const Matrix& q_l, double sk, double sl) {
  if (!(sk > 1.0) || !(sl >= 1.0))
    throw std::invalid_argument("terminal_weights: need sk > 1 and sl >= 1");
  const Matrix a_k = sk * (sys.A - sys.B * kbar);
  const Matrix a_l = sl * (sys.A - lbar * sys.C);
  if (spectral_radius(a_k) >= 1.0 || spectral_radius(a_l) >= 1.0)
    throw std::runtime_error("terminal_weights: scaled loops must be Schur stable");
  TerminalWeights w;
  // S = A_K^T S A_K + Q + K^T R K on the scaled loop (transposed Lyapunov form).
  w.S = dlyap(a_k.transpose(), symmetrize(q + kbar.transpose() * r * kbar));
  // The margin sk pays for the observer/controller cross coupling.
  const double b = sk * sk / (sk * sk - 1.0);
  const Matrix feed =
      symmetrize(q_l + b * sys.C.transpose() * lbar.transpose() * w.S * lbar * sys.C);
  w.S_L = dlyap(a_l.transpose(), feed);
  return w;
}

Matrix ControllerDesign::q_t() const {
  const int nn = n();
  Matrix out = Matrix::Zero(2 * nn, 2 * nn);
  out.topLeftCorner(nn, nn) = Q_L;
  out.bottomRightCorner(nn, nn) = Q + Kbar.transpose() * R * Kbar;
  return out;
}

Matrix ControllerDesign::s_t() const {
  const int nn = n();
  Matrix out = Matrix::Zero(2 * nn, 2 * nn);
  out.topLeftCorner(nn, nn) = S_L;
  out.bottomRightCorner(nn, nn) = S;
  return out;
}

std::vector<ChanceConstraint> ControllerDesign::state_constraints() const {
  std::vector<ChanceConstraint> out;
  for (const auto& c : constraints)
    if (c.kind == ConstraintKind::state) out.push_back(c);
  return out;
}

std::vector<ChanceConstraint> ControllerDesign::input_constraints() const {
  std::vector<ChanceConstraint> out;
  for (const auto& c : constraints)
    if (c.kind == ConstraintKind::input) out.push_back(c);
  return out;
}

namespace {

// Rows of the terminal polytope before the invariance iteration: tightened
// state rows plus input rows mapped through the terminal law u = -K x.
Polytope terminal_base_rows(const ControllerDesign& d, const Matrix& x_cov, const Matrix& u_cov,
                            bool linearized) {
  std::vector<Vector> rows;
  std::vector<double> rhs;
  for (const auto& c : d.constraints) {
    double margin;
    if (linearized) {
      const double alpha = c.kind == ConstraintKind::state ? d.alpha_x : d.alpha_u;
      margin = linearized_tightened_bound(c, c.kind == ConstraintKind::state ? x_cov : u_cov,
                                          d.factor, alpha);
    } else {
      margin = tightened_bound(c, c.kind == ConstraintKind::state ? x_cov : u_cov, d.factor);
    }
    if (!(margin > 0.0))
      throw std::runtime_error(
          "synthesize: terminal margin is non-positive, the terminal set would be empty");
    if (c.kind == ConstraintKind::state) {
      rows.push_back(c.direction);
    } else {
      rows.push_back(-d.Kbar.transpose() * c.direction);
    }
    rhs.push_back(margin);
  }
  Polytope p;
  p.G.resize(static_cast<Eigen::Index>(rows.size()), d.n());
  p.g.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    p.G.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    p.g(static_cast<Eigen::Index>(i)) = rhs[i];
  }
  return p;
}

}  // namespace

ControllerDesign synthesize(const LinearSystem& sys, const NoiseSpec& noise,
                            const std::vector<ChanceConstraint>& constraints, const Matrix& q,
                            const Matrix& r, const Matrix& q_l, int horizon,
                            const SynthesisOptions& opts) {
  sys.validate_dims();
  noise.validate(sys.nw(), sys.p());
  for (const auto& c : constraints) c.validate(sys.n(), sys.m());
  if (horizon < 1) throw std::invalid_argument("synthesize: horizon must be >= 1");
  if (!sys.observable()) throw std::runtime_error("synthesize: (A, C) is not observable");
  if (!sys.reachable()) throw std::runtime_error("synthesize: (A, B) is not reachable");
  if (!sys.noise_reachable(noise.W))
    throw std::runtime_error("synthesize: (A, Ft) is not reachable for the given W");

  ControllerDesign d;
  d.sys = sys;
  d.noise = noise;
  d.constraints = constraints;
  d.Q = q;
  d.R = r;
  d.Q_L = q_l;
  d.N = horizon;
  d.factor = opts.factor;
  d.alpha_x = opts.alpha_x;
  d.alpha_u = opts.alpha_u;

  d.Wbar = opts.wbar_override.size() > 0 ? opts.wbar_override : Matrix(opts.omega_bar_scale * noise.W);
  d.Vbar = opts.vbar_override.size() > 0 ? opts.vbar_override : Matrix(opts.omega_bar_scale * noise.V);
  if (!dominates(d.Wbar, noise.W))
    throw std::invalid_argument("synthesize: Wbar must dominate W");
  if (!dominates(d.Vbar, noise.V))
    throw std::invalid_argument("synthesize: Vbar must dominate V");

  if (opts.lqg_vbar_scale < 1.0)
    throw std::invalid_argument("synthesize: lqg_vbar_scale must be >= 1");
  const double sk = opts.lqr_scale;
  const double sl = opts.filter_scale;
  if (!(sk > 1.0) || !(sl >= 1.0))
    throw std::invalid_argument("synthesize: need lqr_scale > 1 and filter_scale >= 1");

  // Gains from the scale-margined LQG design; sk = sl = sqrt(2) is the
  // doubled-system design required by the LMI controller.
  {
    const Matrix a_s = sk * sys.A;
    const Matrix b_s = sk * sys.B;
    const Matrix p = dare_fixed_point(a_s, b_s, q, r);
    d.Kbar = (r + b_s.transpose() * p * b_s).ldlt().solve(b_s.transpose() * p * a_s);
  }
  {
    const Matrix a_s = sl * sys.A;
    const Matrix c_s = sl * sys.C;
    const Matrix v_design = sl * sl * opts.lqg_vbar_scale * d.Vbar;
    const Matrix qn = symmetrize(sys.F * d.Wbar * sys.F.transpose());
    const Matrix p = dare_fixed_point(a_s.transpose(), c_s.transpose(), qn, v_design);
    // Predictor gain of the scaled filter; the scaled error loop is
    // A_s - L C_s = sl (A - L C), so rho(sl (A - L C)) < 1.
    d.Lbar = a_s * p * c_s.transpose() *
             (c_s * p * c_s.transpose() + v_design)
                 .ldlt()
                 .solve(Matrix::Identity(sys.p(), sys.p()));
  }

  if (spectral_radius(sk * (sys.A - sys.B * d.Kbar)) >= 1.0 ||
      spectral_radius(sl * (sys.A - d.Lbar * sys.C)) >= 1.0)
    throw std::runtime_error("synthesize: scaled closed loops are not Schur stable");

  const TerminalWeights tw = terminal_weights(sys, d.Kbar, d.Lbar, q, r, q_l, sk, sl);
  d.S = tw.S;
  d.S_L = tw.S_L;

  // Terminal cost inequality on the undoubled loop, with the sqrt(2) slack.
  const AugmentedDynamics dyn = d.constant_gain_dynamics();
  {
    const Matrix resid = d.q_t() - d.s_t() + dyn.Phi.transpose() * d.s_t() * dyn.Phi;
    const double scale = std::max(1.0, d.s_t().cwiseAbs().maxCoeff());
    if (max_eigenvalue(resid) > 1e-8 * scale)
      throw std::runtime_error("synthesize: terminal cost inequality violated");
  }

  // Terminal covariance bounds.
  Matrix omega_bar = Matrix::Zero(sys.nw() + sys.p(), sys.nw() + sys.p());
  omega_bar.topLeftCorner(sys.nw(), sys.nw()) = d.Wbar;
  omega_bar.bottomRightCorner(sys.p(), sys.p()) = d.Vbar;
  d.Sigma_bar = steady_covariance(dyn, omega_bar);

  // Block-diagonal bounds and the linearized terminal set exist only when the
  // doubled loops are stable (the LMI controller's prerequisite).
  const DoubledSystem dsys = double_system(sys, noise);
  const Matrix vbar_d = 2.0 * d.Vbar;
  const bool lmi_capable = spectral_radius(dsys.A - dsys.B * d.Kbar) < 1.0 &&
                           spectral_radius(dsys.A - d.Lbar * dsys.C) < 1.0;
  if (lmi_capable) {
    const Matrix a_l_d = dsys.A - d.Lbar * dsys.C;
    const Matrix a_k_d = dsys.A - dsys.B * d.Kbar;
    d.SigmaD_bar_11 = dlyap(a_l_d, symmetrize(sys.F * d.Wbar * sys.F.transpose() +
                                              d.Lbar * vbar_d * d.Lbar.transpose()));
    d.SigmaD_bar_22 =
        dlyap(a_k_d, symmetrize(d.Lbar * dsys.C * d.SigmaD_bar_11 * dsys.C.transpose() *
                                    d.Lbar.transpose() +
                                d.Lbar * vbar_d * d.Lbar.transpose()));
  }

  // Terminal sets.
  {
    CovarianceState sbar{d.Sigma_bar};
    const MarginalCovariances mc = marginal_covariances(sbar, d.Kbar);
    d.XF = max_invariant_set(d.a_k(), terminal_base_rows(d, mc.X, mc.U, false),
                             opts.max_invariant_sweeps);
  }
  if (lmi_capable) {
    const Matrix xd = symmetrize(d.SigmaD_bar_11 + d.SigmaD_bar_22);
    const Matrix ud = symmetrize(d.Kbar * d.SigmaD_bar_22 * d.Kbar.transpose());
    d.XF_lin = max_invariant_set(d.a_k(), terminal_base_rows(d, xd, ud, true),
                                 opts.max_invariant_sweeps);
  }

  d.cert = certificate(d, stack_noise_covariance(noise), opts.rho, false);
  return d;
}

Theorem1Certificate certificate(const ControllerDesign& design, const Matrix& omega, double rho,
                                bool lmi_variant) {
  Theorem1Certificate c;
  c.rho = rho;
  const Matrix q_inv_sum = design.Q.inverse() + design.Q_L.inverse();
  c.alpha = std::min(min_eigenvalue(design.Q), 1.0 / q_inv_sum.trace());
  c.beta = std::max(max_eigenvalue(design.S), design.s_t().trace());

  const AugmentedDynamics dyn = design.constant_gain_dynamics();
  c.omega = (design.s_t() * dyn.Psi * omega * dyn.Psi.transpose()).trace();

  if (lmi_variant) {
    c.sigma_bar_radius = chebyshev_radius(design.XF_lin);
    c.lambda_min_sigma_bar =
        std::min(min_eigenvalue(design.SigmaD_bar_11), min_eigenvalue(design.SigmaD_bar_22));
  } else {
    c.sigma_bar_radius = chebyshev_radius(design.XF);
    c.lambda_min_sigma_bar = min_eigenvalue(design.Sigma_bar);
  }

  const double lhs = (design.N + c.beta / c.alpha) / c.alpha * c.omega;
  const double cap = std::min(rho * c.sigma_bar_radius * c.sigma_bar_radius,
                              rho * c.lambda_min_sigma_bar);
  c.holds = lhs < cap;
  c.band_radius = (design.N + c.beta / c.alpha) * c.omega / c.alpha;
  return c;
}

}  // namespace smpc
