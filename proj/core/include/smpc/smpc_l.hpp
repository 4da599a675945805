#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "smpc/sdp.hpp"
#include "smpc/smpc_c.hpp"
#include "smpc/synthesis.hpp"

namespace smpc {

// Block-diagonal covariance upper bound carried by the gain-optimizing
// controller.
struct SigmaD {
  Matrix S11;
  Matrix S22;
};

// One step of the decoupled bound recursions (doubled dynamics):
//   S11+ = A_L S11 A_L^T + F W F^T + L V^D L^T
//   S22+ = A_K S22 A_K^T + L C^D S11 C^{D,T} L^T + L V^D L^T
SigmaD sigmaD_propagate(const SigmaD& sd, const DoubledSystem& dsys, const Matrix& f,
                        const Matrix& k_gain, const Matrix& l_gain, const Matrix& w);

// Stage data extracted from an SDP solution.
struct SmpclStageSolution {
  std::vector<Matrix> sig11inv;  // k = 0..N (k = 0 is the pinned constant)
  std::vector<Matrix> delta;     // k = 0..N
  std::vector<Matrix> s22;       // k = 0..N
  std::vector<Matrix> zmat;      // k = 0..N-1
  std::vector<Matrix> xi;        // k = 0..N-1
  std::vector<Matrix> mmat;      // k = 0..N-1
  std::vector<Matrix> mtil;      // k = 0..N-1
  std::vector<Matrix> ubar;      // k = 0..N-1
  std::vector<Vector> xbar;      // k = 0..N
  std::vector<Vector> u;         // k = 0..N-1
  double jm = 0.0;   // mean cost of the solution path
  double jvd = 0.0;  // variance-bound cost
  double ccl_gap = 0.0;

  double total_cost() const { return jm + jvd; }
};

struct GainSequence {
  std::vector<Matrix> K;
  std::vector<Matrix> L;
};

// L_k = (sig11inv_{k+1})^{-1} Z_k, K_k = Xi_k (S22_k)^{-1}; near-singular S22
// is regularized, and a zeroed S22 stage falls back to the offline gain.
GainSequence recover_gains(const SmpclStageSolution& sol, const ControllerDesign& d);

struct SmpclOptions {
  int ccl_max_iter = 25;
  double ccl_gap_tol = 1e-3;  // relative to n
  double ccl_mu_fraction = 0.1;
  SdpOptions sdp{};
  bool exact_strategy_mode = false;
};

class SmpclController {
 public:
  explicit SmpclController(ControllerDesign design, SmpclOptions opts = {});
  ~SmpclController();

  void init(const Vector& xhat0, const Matrix& sigma11_0);
  StepResult step(const Vector& y);

  // Feasibility probe at the initialized state (used by the scanner): tries
  // the cheap constant-gain candidate first, then the full solve.
  bool initial_feasible();

  struct CclOutcome {
    bool feasible = false;
    SmpclStageSolution sol;
    long ccl_iterations = 0;
    double gap = 0.0;
    long sdp_iterations = 0;
    SolveState sdp_state = SolveState::numerical_failure;
  };

  // Solves the stage problem for the given strategy at the current state.
  CclOutcome solve_for(Strategy s);

  // Builds the stage SDP for the given strategy at the current state and the
  // supplied cone linearization point (exposed for feasibility audits).
  SdpProblem assemble_sdp(Strategy s, const std::vector<Matrix>& m_lin,
                          const std::vector<Matrix>& mt_lin, double mu) const;

  // Decision vector at the constant-gain candidate: covariance bounds from
  // the offline-gain rollout, mean plan from the plug-in QP. Empty when the
  // candidate is infeasible. Doubles as the exact-feasible CCL seed.
  std::optional<Vector> plugin_point(Strategy s) const;

  double shifted_cost() const;

  const ControllerDesign& design() const { return design_; }
  const Vector& xhat() const { return xhat_; }
  const Vector& xbar_pred() const { return xbar_pred_; }
  const Matrix& sigmaD11_pred() const { return sd11_pred_; }
  const Matrix& sigmaD22_pred() const { return sd22_pred_; }
  long t() const { return t_; }
  const GainSequence& prev_gains() const { return prev_gains_; }
  const Vector& prev_inputs() const { return prev_u_; }

 private:
  struct Layout;

  void build_structure();
  void fill_constants(Strategy s, SdpProblem& p) const;
  SmpclStageSolution extract(const Vector& z, Strategy s) const;
  struct Rollout {
    std::vector<SigmaD> sd;  // k = 0..N
    double jvd = 0.0;
    bool terminal_ok = false;
  };
  Rollout constant_gain_rollout(Strategy s) const;
  Rollout gain_rollout(const GainSequence& gains, const SigmaD& init) const;
  struct PluginMean {
    bool feasible = false;
    std::vector<Vector> xbar;  // k = 0..N
    std::vector<Vector> u;     // k = 0..N-1
  };
  PluginMean plugin_mean(Strategy s, const Rollout& roll) const;

  ControllerDesign design_;
  SmpclOptions opts_;
  DoubledSystem dsys_;
  Matrix w_eff_;   // jittered process noise for the LMI pieces
  Matrix vd_eff_;  // doubled (jittered) measurement noise

  std::unique_ptr<Layout> layout_;
  SdpProblem structure_;  // constants refreshed per strategy/state
  std::unique_ptr<SdpKernel> kernel_;
  mutable SdpWarmStart warm_reset_, warm_pred_;

  Vector xhat_;
  Vector xbar_pred_;
  Matrix sd11_pred_;
  Matrix sd22_pred_;
  Vector prev_u_;
  std::vector<Vector> prev_xbar_;
  GainSequence prev_gains_;
  long t_ = -1;
};

}  // namespace smpc
