#include "smpc/smpc_c.hpp"

#include <cmath>
#include <stdexcept>

namespace smpc {

CovarianceSchedule covariance_schedule(const ControllerDesign& d, const Matrix& sigma_init) {
  CovarianceSchedule out;
  const AugmentedDynamics dyn = d.constant_gain_dynamics();
  const Matrix omega = stack_noise_covariance(d.noise);
  const Matrix q_t = d.q_t();
  const Matrix s_t = d.s_t();

  CovarianceState cs{symmetrize(sigma_init)};
  out.Sigma.reserve(d.N + 1);
  for (int k = 0; k <= d.N; ++k) {
    out.Sigma.push_back(cs.Sigma);
    const MarginalCovariances mc = marginal_covariances(cs, d.Kbar);
    out.X.push_back(mc.X);
    out.U.push_back(mc.U);
    if (k < d.N) {
      out.jv += (q_t * cs.Sigma).trace();
      cs = propagate_covariance(cs, dyn, omega);
    } else {
      out.jv += (s_t * cs.Sigma).trace();
    }
  }
  out.terminal_ok = dominates(d.Sigma_bar, out.Sigma.back());
  return out;
}

StrategyQp build_strategy_qp(const ControllerDesign& d, const Vector& xbar0,
                             const CovarianceSchedule& sched) {
  const int n = d.n();
  const int m = d.m();
  const int nu = d.N * m;

  std::vector<Matrix> sx(d.N + 1);
  std::vector<Matrix> su(d.N + 1);
  sx[0] = Matrix::Identity(n, n);
  su[0] = Matrix::Zero(n, nu);
  for (int k = 1; k <= d.N; ++k) {
    sx[k] = d.sys.A * sx[k - 1];
    su[k] = d.sys.A * su[k - 1];
    su[k].block(0, (k - 1) * m, n, m) = d.sys.B;
  }

  StrategyQp out;
  Matrix h = Matrix::Zero(nu, nu);
  Vector g = Vector::Zero(nu);
  double cmean = 0.0;
  for (int k = 0; k < d.N; ++k) {
    const Vector xk0 = sx[k] * xbar0;
    h += su[k].transpose() * d.Q * su[k];
    g += su[k].transpose() * d.Q * xk0;
    cmean += xk0.dot(d.Q * xk0);
    h.block(k * m, k * m, m, m) += d.R;
  }
  {
    const Vector xn0 = sx[d.N] * xbar0;
    h += su[d.N].transpose() * d.S * su[d.N];
    g += su[d.N].transpose() * d.S * xn0;
    cmean += xn0.dot(d.S * xn0);
  }
  out.qp.H = 2.0 * symmetrize(h);
  out.qp.g = 2.0 * g;
  out.constant_cost = cmean + sched.jv;

  const auto state_cons = d.state_constraints();
  const auto input_cons = d.input_constraints();
  std::vector<Vector> rows;
  std::vector<double> rhs;
  for (int k = 0; k < d.N; ++k) {
    for (const auto& c : state_cons) {
      const double margin = tightened_bound(c, sched.X[static_cast<std::size_t>(k)], d.factor);
      if (k == 0) {
        if (c.direction.dot(xbar0) > margin + 1e-9 * std::max(1.0, std::abs(margin)))
          out.stage0_feasible = false;
        continue;
      }
      rows.push_back(su[k].transpose() * c.direction);
      rhs.push_back(margin - c.direction.dot(sx[k] * xbar0));
    }
    for (const auto& c : input_cons) {
      const double margin = tightened_bound(c, sched.U[static_cast<std::size_t>(k)], d.factor);
      Vector row = Vector::Zero(nu);
      row.segment(k * m, m) = c.direction;
      rows.push_back(std::move(row));
      rhs.push_back(margin);
    }
  }
  for (int i = 0; i < d.XF.rows(); ++i) {
    const Vector dir = d.XF.G.row(i).transpose();
    rows.push_back(su[d.N].transpose() * dir);
    rhs.push_back(d.XF.g(i) - dir.dot(sx[d.N] * xbar0));
  }
  out.qp.A_in.resize(static_cast<Eigen::Index>(rows.size()), nu);
  out.qp.b_in.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.qp.A_in.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    out.qp.b_in(static_cast<Eigen::Index>(i)) = rhs[i];
  }
  out.qp.A_eq.resize(0, nu);
  out.qp.b_eq.resize(0);
  return out;
}

SmpccController::SmpccController(ControllerDesign design, bool exact_strategy_mode)
    : design_(std::move(design)), exact_mode_(exact_strategy_mode) {
  dyn_ = design_.constant_gain_dynamics();
  omega_ = stack_noise_covariance(design_.noise);
}

void SmpccController::init(const Vector& xhat0, const Matrix& sigma11_0) {
  const int n = design_.n();
  if (xhat0.size() != n) throw std::invalid_argument("init: estimate dimension mismatch");
  if (sigma11_0.rows() != n || sigma11_0.cols() != n)
    throw std::invalid_argument("init: sigma11_0 must be n x n");
  xhat_ = xhat0;
  xbar_pred_ = xhat0;
  sigma11_pred_ = symmetrize(sigma11_0);
  sigma_pred_ = Matrix::Zero(2 * n, 2 * n);
  sigma_pred_.topLeftCorner(n, n) = sigma11_pred_;
  prev_u_.resize(0);
  prev_xbar_.clear();
  t_ = 0;
}

SmpccController::SolveOutcome SmpccController::solve_strategy(
    const Vector& xbar0, const CovarianceSchedule& sched) const {
  SolveOutcome out;
  if (!sched.terminal_ok) return out;
  StrategyQp sqp = build_strategy_qp(design_, xbar0, sched);
  if (!sqp.stage0_feasible) return out;
  out.qp = qp_solve(sqp.qp);
  if (out.qp.status.state != SolveState::optimal) return out;
  out.feasible = true;
  out.u_seq = out.qp.z;
  out.total_cost = out.qp.status.objective + sqp.constant_cost;
  return out;
}

double SmpccController::shifted_cost(const CovarianceSchedule& pred_schedule) const {
  // Mean cost of {u*_1, ..., u*_{N-1}, -K xbar*_N} started at xbar*_1.
  const int m = design_.m();
  double jm = 0.0;
  for (int k = 1; k < design_.N; ++k) {
    const Vector& xk = prev_xbar_[static_cast<std::size_t>(k)];
    const Vector uk = prev_u_.segment(k * m, m);
    jm += xk.dot(design_.Q * xk) + uk.dot(design_.R * uk);
  }
  const Vector& xn = prev_xbar_[static_cast<std::size_t>(design_.N)];
  const Vector un = -design_.Kbar * xn;
  const Vector xnp = design_.a_k() * xn;
  jm += xn.dot(design_.Q * xn) + un.dot(design_.R * un) + xnp.dot(design_.S * xnp);
  return jm + pred_schedule.jv;
}

Vector SmpccController::current_margins(const Vector& xbar0, const Vector& u0,
                                        const CovarianceSchedule& sched) const {
  Vector out(static_cast<Eigen::Index>(design_.constraints.size()));
  Eigen::Index i = 0;
  for (const auto& c : design_.constraints) {
    if (c.kind == ConstraintKind::state) {
      out(i) = tightened_bound(c, sched.X[0], design_.factor) - c.direction.dot(xbar0);
    } else {
      out(i) = tightened_bound(c, sched.U[0], design_.factor) - c.direction.dot(u0);
    }
    ++i;
  }
  return out;
}

void SmpccController::advance(const Vector& y, const Vector& xbar_now, const Vector& u_now,
                              const Vector& u_seq) {
  const int m = design_.m();
  // Store the solution path for the next shifted candidate.
  prev_u_ = u_seq;
  prev_xbar_.assign(static_cast<std::size_t>(design_.N + 1), Vector());
  prev_xbar_[0] = xbar_now;
  for (int k = 0; k < design_.N; ++k)
    prev_xbar_[static_cast<std::size_t>(k + 1)] =
        design_.sys.A * prev_xbar_[static_cast<std::size_t>(k)] +
        design_.sys.B * u_seq.segment(k * m, m);

  xbar_pred_ = prev_xbar_[1];
  xhat_ = design_.sys.A * xhat_ + design_.sys.B * u_now + design_.Lbar * (y - design_.sys.C * xhat_);
  sigma11_pred_ = propagate_observer_covariance(design_.sys, design_.noise, design_.Lbar,
                                                sigma11_pred_);
  ++t_;
}

bool SmpccController::initial_feasible() const {
  if (t_ != 0) throw std::logic_error("initial_feasible: controller already advanced");
  const int n = design_.n();
  Matrix sigma_reset = Matrix::Zero(2 * n, 2 * n);
  sigma_reset.topLeftCorner(n, n) = sigma11_pred_;
  const CovarianceSchedule sched = covariance_schedule(design_, sigma_reset);
  return solve_strategy(xhat_, sched).feasible;
}

StepResult SmpccController::step(const Vector& y) {
  if (t_ < 0) throw std::logic_error("SmpccController: call init() before step()");
  const int n = design_.n();

  Matrix sigma_reset = Matrix::Zero(2 * n, 2 * n);
  sigma_reset.topLeftCorner(n, n) = sigma11_pred_;

  StepResult res;
  StepDiagnostics& diag = res.diag;

  const CovarianceSchedule sched_reset = covariance_schedule(design_, sigma_reset);
  diag.reset_terminal_cov_ok = sched_reset.terminal_ok;
  const SolveOutcome reset = solve_strategy(xhat_, sched_reset);
  diag.reset_feasible = reset.feasible;
  if (reset.feasible) diag.j_reset = reset.total_cost;

  if (t_ == 0) {
    if (!reset.feasible)
      throw InfeasibleAtStart("initial condition outside the feasibility set");
    diag.strategy_used = Strategy::reset;
    diag.j_star = reset.total_cost;
    diag.qp_iterations = reset.qp.status.iterations;
    res.u = reset.u_seq.head(design_.m());
    res.xbar = xhat_;
    res.sigma_trace = sigma_reset.trace();
    diag.margins = current_margins(xhat_, res.u, sched_reset);
    sigma_pred_ = propagate_covariance(CovarianceState{sigma_reset}, dyn_, omega_).Sigma;
    advance(y, xhat_, res.u, reset.u_seq);
    return res;
  }

  const CovarianceSchedule sched_pred = covariance_schedule(design_, sigma_pred_);
  diag.prediction_terminal_cov_ok = sched_pred.terminal_ok;

  bool use_reset;
  SolveOutcome pred;
  if (exact_mode_) {
    pred = solve_strategy(xbar_pred_, sched_pred);
    diag.prediction_feasible = pred.feasible;
    if (!reset.feasible && !pred.feasible)
      throw std::runtime_error("both strategies infeasible at t > 0");
    use_reset = reset.feasible && (!pred.feasible || reset.total_cost <= pred.total_cost);
  } else if (reset.feasible) {
    diag.j_shifted = shifted_cost(sched_pred);
    if (reset.total_cost <= diag.j_shifted) {
      use_reset = true;
    } else {
      pred = solve_strategy(xbar_pred_, sched_pred);
      diag.prediction_feasible = pred.feasible;
      use_reset = !pred.feasible;  // numerical fallback; reset is feasible here
    }
  } else {
    pred = solve_strategy(xbar_pred_, sched_pred);
    diag.prediction_feasible = pred.feasible;
    if (!pred.feasible) throw std::runtime_error("both strategies infeasible at t > 0");
    use_reset = false;
  }

  const SolveOutcome& chosen = use_reset ? reset : pred;
  const Vector xbar_now = use_reset ? xhat_ : xbar_pred_;
  const Matrix sigma_now = use_reset ? sigma_reset : sigma_pred_;
  const CovarianceSchedule& sched_now = use_reset ? sched_reset : sched_pred;

  diag.strategy_used = use_reset ? Strategy::reset : Strategy::prediction;
  diag.j_star = chosen.total_cost;
  diag.qp_iterations = chosen.qp.status.iterations;

  const Vector u_first = chosen.u_seq.head(design_.m());
  res.u = u_first - design_.Kbar * (xhat_ - xbar_now);
  res.xbar = xbar_now;
  res.sigma_trace = sigma_now.trace();
  diag.margins = current_margins(xbar_now, u_first, sched_now);

  sigma_pred_ = propagate_covariance(CovarianceState{sigma_now}, dyn_, omega_).Sigma;
  advance(y, xbar_now, res.u, chosen.u_seq);
  return res;
}

}  // namespace smpc
