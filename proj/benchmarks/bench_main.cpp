#include <benchmark/benchmark.h>

#include "smpc/covariance.hpp"
#include "smpc/qp.hpp"
#include "smpc/sampling.hpp"
#include "smpc/simulation.hpp"

namespace {

using namespace smpc;

SimConfig bench_config() {
  SimConfig cfg;
  cfg.sys.A = (Matrix(2, 2) << 1, 1, 0, 1).finished();
  cfg.sys.B = (Matrix(2, 1) << 0.5, 1).finished();
  cfg.sys.C = Matrix::Identity(2, 2);
  cfg.sys.F = Matrix::Identity(2, 2);
  cfg.noise.W = 0.01 * Matrix::Identity(2, 2);
  cfg.noise.V = 1e-4 * Matrix::Identity(2, 2);
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
  cfg.t_sim = 20;
  cfg.seed = 1;
  return cfg;
}

void bm_covariance_propagation(benchmark::State& state) {
  const SimConfig cfg = bench_config();
  const ControllerDesign d = design_from_config(cfg);
  const AugmentedDynamics dyn = d.constant_gain_dynamics();
  const Matrix omega = stack_noise_covariance(d.noise);
  CovarianceState cs{Matrix::Identity(4, 4)};
  for (auto _ : state) {
    cs = propagate_covariance(cs, dyn, omega);
    benchmark::DoNotOptimize(cs.Sigma.data());
  }
}
BENCHMARK(bm_covariance_propagation);

void bm_strategy_qp(benchmark::State& state) {
  const SimConfig cfg = bench_config();
  const ControllerDesign d = design_from_config(cfg);
  const int n = d.n();
  Matrix sigma0 = Matrix::Zero(2 * n, 2 * n);
  sigma0.topLeftCorner(n, n) = steady_observer_covariance(d);
  const CovarianceSchedule sched = covariance_schedule(d, sigma0);
  for (auto _ : state) {
    StrategyQp sqp = build_strategy_qp(d, cfg.x0, sched);
    const QpResult r = qp_solve(sqp.qp);
    benchmark::DoNotOptimize(r.status.objective);
  }
}
BENCHMARK(bm_strategy_qp);

void bm_constant_gain_step(benchmark::State& state) {
  SimConfig cfg = bench_config();
  const ControllerDesign d = design_from_config(cfg);
  const Matrix s11 = steady_observer_covariance(d);
  Rng rng(7);
  NoiseSampler vgen(d.noise.V, NoiseDist::gaussian);
  for (auto _ : state) {
    state.PauseTiming();
    SmpccController ctrl(d);
    ctrl.init(cfg.x0, s11);
    state.ResumeTiming();
    Vector x = cfg.x0;
    for (int t = 0; t < 5; ++t) {
      const Vector y = d.sys.C * x + vgen.sample(rng);
      const StepResult sr = ctrl.step(y);
      x = d.sys.A * x + d.sys.B * sr.u;
    }
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(bm_constant_gain_step);

void bm_gain_optimizing_step(benchmark::State& state) {
  SimConfig cfg = bench_config();
  cfg.controller = ControllerKind::smpcl;
  const ControllerDesign d = design_from_config(cfg);
  const Matrix s11 = steady_observer_covariance(d);
  Rng rng(7);
  NoiseSampler vgen(d.noise.V, NoiseDist::gaussian);
  SmpclController ctrl(d);
  for (auto _ : state) {
    ctrl.init(cfg.x0, s11);
    Vector x = cfg.x0;
    const Vector y = d.sys.C * x + vgen.sample(rng);
    const StepResult sr = ctrl.step(y);
    benchmark::DoNotOptimize(sr.u.data());
  }
}
BENCHMARK(bm_gain_optimizing_step);

}  // namespace

BENCHMARK_MAIN();
