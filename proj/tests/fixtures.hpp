#pragma once

#include "smpc/config.hpp"
#include "smpc/synthesis.hpp"

namespace smpc::testfix {

// Double-integrator benchmark: Gaussian noise, one state and two input
// chance constraints, horizon 9.
inline SimConfig double_integrator_config() {
  SimConfig cfg;
  cfg.sys.A = (Matrix(2, 2) << 1, 1, 0, 1).finished();
  cfg.sys.B = (Matrix(2, 1) << 0.5, 1).finished();
  cfg.sys.C = Matrix::Identity(2, 2);
  cfg.sys.F = Matrix::Identity(2, 2);
  cfg.noise.W = 0.01 * Matrix::Identity(2, 2);
  cfg.noise.V = 1e-4 * Matrix::Identity(2, 2);
  cfg.noise.dist = NoiseDist::gaussian;

  ChanceConstraint state;
  state.kind = ConstraintKind::state;
  state.direction = (Vector(2) << 0, 1).finished();
  state.bound = 2.0;
  state.prob = 0.1;
  ChanceConstraint u_hi;
  u_hi.kind = ConstraintKind::input;
  u_hi.direction = Vector::Constant(1, 1.0);
  u_hi.bound = 1.0;
  u_hi.prob = 0.1;
  ChanceConstraint u_lo = u_hi;
  u_lo.direction = Vector::Constant(1, -1.0);
  cfg.constraints = {state, u_hi, u_lo};

  cfg.Q = Matrix::Identity(2, 2);
  cfg.Q_L = Matrix::Identity(2, 2);
  cfg.R = Matrix::Constant(1, 1, 0.01);
  cfg.horizon = 9;
  cfg.factor = FactorKind::gaussian;
  cfg.x0 = (Vector(2) << 5.0, -1.5).finished();
  cfg.xhat0 = cfg.x0;
  cfg.t_sim = 30;
  cfg.runs = 1;
  cfg.seed = 1;
  return cfg;
}

inline ControllerDesign double_integrator_design(FactorKind factor = FactorKind::gaussian) {
  SimConfig cfg = double_integrator_config();
  cfg.factor = factor;
  SynthesisOptions opts;
  opts.factor = factor;
  opts.rho = cfg.rho;
  return synthesize(cfg.sys, cfg.noise, cfg.constraints, cfg.Q, cfg.R, cfg.Q_L, cfg.horizon,
                    opts);
}

}  // namespace smpc::testfix
