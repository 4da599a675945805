#pragma once

#include <numbers>
#include <vector>

#include "smpc/covariance.hpp"
#include "smpc/linear_system.hpp"
#include "smpc/polytope.hpp"
#include "smpc/tightening.hpp"

namespace smpc {

// sqrt(2)-scaled system used for the offline gain design; stabilizing the
// scaled loop leaves slack in the original one.
struct DoubledSystem {
  Matrix A;  // sqrt(2) A
  Matrix B;  // sqrt(2) B
  Matrix C;  // sqrt(2) C
  Matrix V;  // 2 V
};

DoubledSystem double_system(const LinearSystem& sys, const NoiseSpec& noise);

// Riccati fixed-point iteration: P = A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A + Q.
Matrix dare_fixed_point(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                        double tol = 1e-12, long max_iter = 100000);

struct LqgGains {
  Matrix K;  // m x n state-feedback gain
  Matrix L;  // n x p predictor observer gain
};

// Steady-state LQG gains for the doubled system with design noise (Wbar, Vbar).
LqgGains lqg_gains(const DoubledSystem& dsys, const Matrix& f, const Matrix& q, const Matrix& r,
                   const Matrix& wbar, const Matrix& vbar);

// Fixed point of Sigma = Phi Sigma Phi^T + Psi Omega Psi^T.
Matrix steady_covariance(const AugmentedDynamics& dyn, const Matrix& omega_bar);

struct TerminalWeights {
  Matrix S;
  Matrix S_L;
};

// Terminal weights from scaled Lyapunov equalities:
//   S   solves (sk A_K)^T S (sk A_K) - S + Q + K^T R K = 0
//   S_L solves (sl A_L)^T S_L (sl A_L) - S_L + Q_L + b C^T L^T S L C = 0
// with b = sk^2/(sk^2 - 1). Any sk > 1 with both scaled loops Schur stable
// makes diag(S_L, S) satisfy the terminal cost inequality for the true
// closed loop; sk = sl = sqrt(2) recovers the doubled-system construction.
TerminalWeights terminal_weights(const LinearSystem& sys, const Matrix& kbar,
                                 const Matrix& lbar, const Matrix& q, const Matrix& r,
                                 const Matrix& q_l, double sk = std::numbers::sqrt2,
                                 double sl = std::numbers::sqrt2);

struct SynthesisOptions {
  FactorKind factor = FactorKind::gaussian;
  double alpha_x = 1.0;
  double alpha_u = 1.0;
  // Terminal noise inflation: Wbar = scale * W, Vbar = scale * V unless
  // explicit overrides are supplied. Strict inflation keeps the reset
  // strategy feasible once the observer has mixed.
  double omega_bar_scale = 1.1;
  Matrix wbar_override;  // empty = use scale
  Matrix vbar_override;
  // Measurement-noise inflation for the offline observer-gain design only.
  // Values above one detune the observer, trading state dispersion for a
  // quieter input channel; the terminal machinery keeps using Vbar.
  double lqg_vbar_scale = 1.0;
  // Loop-margin scalings for the gain design and terminal weights. The
  // regulator is designed on (sk A, sk B) and the observer on (sl A, sl C),
  // so the closed loops are stable with margins sk and sl. The LMI
  // controller requires both at sqrt(2).
  double lqr_scale = std::numbers::sqrt2;
  double filter_scale = std::numbers::sqrt2;
  double rho = 0.99;
  int max_invariant_sweeps = 500;
};

struct Theorem1Certificate {
  double alpha = 0.0;
  double beta = 0.0;
  double omega = 0.0;             // tr(S_T Psi Omega Psi^T)
  double sigma_bar_radius = 0.0;  // largest origin-centred ball in the terminal set
  double lambda_min_sigma_bar = 0.0;
  double rho = 0.0;
  bool holds = false;
  double band_radius = 0.0;  // (N + beta/alpha) omega / alpha
};

struct ControllerDesign {
  LinearSystem sys;
  NoiseSpec noise;
  std::vector<ChanceConstraint> constraints;
  Matrix Q, R, Q_L;
  int N = 0;
  FactorKind factor = FactorKind::gaussian;
  double alpha_x = 1.0;
  double alpha_u = 1.0;

  Matrix Kbar, Lbar;
  Matrix S, S_L;
  Matrix Wbar, Vbar;                   // inflated noise (Vbar doubled for the LMI variant)
  Matrix Sigma_bar;                    // 2n x 2n terminal covariance bound
  Matrix SigmaD_bar_11, SigmaD_bar_22; // block-diagonal variant
  Polytope XF;       // terminal set, exact tightening
  Polytope XF_lin;   // terminal set, linearized tightening
  Theorem1Certificate cert;  // at the rho recorded inside

  int n() const { return sys.n(); }
  int m() const { return sys.m(); }

  Matrix a_k() const { return sys.A - sys.B * Kbar; }
  AugmentedDynamics constant_gain_dynamics() const {
    return build_augmented(sys, Kbar, Lbar);
  }
  Matrix q_t() const;  // diag(Q_L, Q + K^T R K)
  Matrix s_t() const;  // diag(S_L, S)

  std::vector<ChanceConstraint> state_constraints() const;
  std::vector<ChanceConstraint> input_constraints() const;
};

ControllerDesign synthesize(const LinearSystem& sys, const NoiseSpec& noise,
                            const std::vector<ChanceConstraint>& constraints, const Matrix& q,
                            const Matrix& r, const Matrix& q_l, int horizon,
                            const SynthesisOptions& opts = {});

// Theorem-style convergence certificate. omega is the stacked noise
// covariance diag(W, V); lmi_variant switches to the block-diagonal bound and
// the doubled measurement noise.
Theorem1Certificate certificate(const ControllerDesign& design, const Matrix& omega, double rho,
                                bool lmi_variant = false);

}  // namespace smpc
