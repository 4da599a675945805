#pragma once

#include <optional>
#include <vector>

#include "smpc/covariance.hpp"
#include "smpc/qp.hpp"
#include "smpc/synthesis.hpp"

namespace smpc {

enum class Strategy { reset, prediction };

// Raised when the very first problem instance admits no solution; later steps
// always have the shifted candidate available.
struct InfeasibleAtStart : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StepDiagnostics {
  Strategy strategy_used = Strategy::reset;
  bool reset_feasible = false;
  bool prediction_feasible = false;
  bool reset_terminal_cov_ok = false;
  bool prediction_terminal_cov_ok = false;
  double j_star = 0.0;
  double j_reset = std::numeric_limits<double>::quiet_NaN();
  double j_shifted = std::numeric_limits<double>::quiet_NaN();
  Vector margins;  // slack of each chance constraint at the current stage
  long qp_iterations = 0;
  long ccl_iterations = 0;  // LMI controller only
  double ccl_gap = 0.0;     // LMI controller only
  long sdp_iterations = 0;  // LMI controller only
};

struct StepResult {
  Vector u;
  Vector xbar;         // chosen nominal state at the current time
  double sigma_trace;  // tr of the chosen covariance (bound) at the current time
  StepDiagnostics diag;
};

// Covariance trajectory under the constant gains, with per-stage marginals,
// the variance cost, and the terminal-domination flag.
struct CovarianceSchedule {
  std::vector<Matrix> Sigma;  // k = 0..N
  std::vector<Matrix> X;
  std::vector<Matrix> U;
  double jv = 0.0;
  bool terminal_ok = false;
};

CovarianceSchedule covariance_schedule(const ControllerDesign& d, const Matrix& sigma_init);

// Condensed QP over the stacked nominal inputs. stage0_feasible reports the
// current-stage state rows, which involve no decision variable.
struct StrategyQp {
  QpProblem qp;
  double constant_cost = 0.0;  // mean-cost constant + variance cost
  bool stage0_feasible = true;
};

StrategyQp build_strategy_qp(const ControllerDesign& d, const Vector& xbar0,
                             const CovarianceSchedule& sched);

class SmpccController {
 public:
  explicit SmpccController(ControllerDesign design, bool exact_strategy_mode = false);

  // t = 0 initialization: nominal state resets to the estimate, covariance to
  // diag(sigma11_0, 0).
  void init(const Vector& xhat0, const Matrix& sigma11_0);

  StepResult step(const Vector& y);

  // Reset-strategy feasibility at the initialized state, without advancing.
  bool initial_feasible() const;

  const ControllerDesign& design() const { return design_; }
  const Vector& xhat() const { return xhat_; }
  const Vector& xbar_pred() const { return xbar_pred_; }
  const Matrix& sigma_pred() const { return sigma_pred_; }
  const Matrix& sigma11_pred() const { return sigma11_pred_; }
  long t() const { return t_; }

  // Cost of the shifted previous solution under the prediction strategy.
  double shifted_cost(const CovarianceSchedule& pred_schedule) const;

  // Previous optimal input sequence (stacked), for candidate-feasibility tests.
  const Vector& prev_inputs() const { return prev_u_; }
  const std::vector<Vector>& prev_xbar_path() const { return prev_xbar_; }

 private:
  struct SolveOutcome {
    bool feasible = false;
    Vector u_seq;
    double total_cost = 0.0;  // Eq-style mean + variance cost
    QpResult qp;
  };

  SolveOutcome solve_strategy(const Vector& xbar0, const CovarianceSchedule& sched) const;
  Vector current_margins(const Vector& xbar0, const Vector& u0,
                         const CovarianceSchedule& sched) const;
  void advance(const Vector& y, const Vector& xbar_now, const Vector& u_now,
               const Vector& u_seq);

  ControllerDesign design_;
  bool exact_mode_;
  AugmentedDynamics dyn_;
  Matrix omega_;

  Vector xhat_;
  Vector xbar_pred_;    // xbar_{t|t-1}
  Matrix sigma_pred_;   // Sigma_{t|t-1}
  Matrix sigma11_pred_;
  Vector prev_u_;
  std::vector<Vector> prev_xbar_;  // predicted nominal path of the previous solution
  long t_ = -1;
};

}  // namespace smpc
