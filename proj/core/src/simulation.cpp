#include "smpc/simulation.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace smpc {

ControllerDesign design_from_config(const SimConfig& cfg) {
  SynthesisOptions opts;
  opts.factor = cfg.factor;
  opts.alpha_x = cfg.alpha_x;
  opts.alpha_u = cfg.alpha_u;
  opts.omega_bar_scale = cfg.omega_bar_scale;
  opts.lqg_vbar_scale = cfg.lqg_vbar_scale;
  opts.lqr_scale = cfg.lqr_scale;
  opts.filter_scale = cfg.filter_scale;
  opts.wbar_override = cfg.wbar_override;
  opts.vbar_override = cfg.vbar_override;
  opts.rho = cfg.rho;
  return synthesize(cfg.sys, cfg.noise, cfg.constraints, cfg.Q, cfg.R, cfg.Q_L, cfg.horizon,
                    opts);
}

Matrix steady_observer_covariance(const ControllerDesign& d) {
  const Matrix a_l = d.sys.A - d.Lbar * d.sys.C;
  return dlyap(a_l, symmetrize(d.sys.F * d.noise.W * d.sys.F.transpose() +
                               d.Lbar * d.noise.V * d.Lbar.transpose()));
}

Matrix initial_sigma11(const SimConfig& cfg, const ControllerDesign& d) {
  if (!cfg.sigma11_steady) return cfg.sigma11_0;
  return steady_observer_covariance(d);
}

namespace {

struct AnyController {
  std::unique_ptr<SmpccController> c;
  std::unique_ptr<SmpclController> l;

  void init(const Vector& xhat0, const Matrix& s11) {
    if (c)
      c->init(xhat0, s11);
    else
      l->init(xhat0, s11);
  }
  StepResult step(const Vector& y) { return c ? c->step(y) : l->step(y); }
  Vector xhat() const { return c ? c->xhat() : l->xhat(); }
};

AnyController make_controller(const SimConfig& cfg, const ControllerDesign& d) {
  AnyController out;
  if (cfg.controller == ControllerKind::smpcc) {
    out.c = std::make_unique<SmpccController>(d, cfg.exact_strategy_mode);
  } else {
    SmpclOptions opts;
    opts.ccl_max_iter = cfg.ccl_max_iter;
    opts.ccl_gap_tol = cfg.ccl_gap_tol;
    opts.ccl_mu_fraction = cfg.ccl_mu_fraction;
    opts.sdp.tol = cfg.sdp_tol;
    opts.sdp.max_iter = cfg.sdp_max_iter;
    opts.exact_strategy_mode = cfg.exact_strategy_mode;
    out.l = std::make_unique<SmpclController>(d, opts);
  }
  return out;
}

int resolve_threads(const SimConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace

RunRecord simulate_run(const SimConfig& cfg, const ControllerDesign& d, Rng rng) {
  const Matrix sigma11_0 = initial_sigma11(cfg, d);
  AnyController ctrl = make_controller(cfg, d);
  ctrl.init(cfg.xhat0, sigma11_0);

  NoiseSampler wgen(d.sys.F * d.noise.W * d.sys.F.transpose(), d.noise.dist);
  NoiseSampler vgen(d.noise.V, NoiseDist::gaussian);
  NoiseSampler egen(sigma11_0, NoiseDist::gaussian);

  Vector x = cfg.x0;
  if (cfg.sample_initial_error) x = cfg.xhat0 + egen.sample(rng);

  RunRecord rec;
  rec.x.push_back(x);
  for (int t = 0; t < cfg.t_sim; ++t) {
    const Vector y = d.sys.C * x + vgen.sample(rng);
    rec.xhat.push_back(ctrl.xhat());
    StepResult sr = ctrl.step(y);
    rec.xbar.push_back(sr.xbar);
    rec.u.push_back(sr.u);
    rec.strategy.push_back(sr.diag.strategy_used);
    rec.j_star.push_back(sr.diag.j_star);
    rec.sigma_trace.push_back(sr.sigma_trace);
    rec.margins.push_back(sr.diag.margins);
    x = d.sys.A * x + d.sys.B * sr.u + wgen.sample(rng);
    rec.x.push_back(x);
  }
  return rec;
}

McSummary monte_carlo(const SimConfig& cfg, const ControllerDesign& d, bool keep_records) {
  if (cfg.runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");
  const int runs = cfg.runs;
  std::vector<RunRecord> records(static_cast<std::size_t>(runs));

  const int nthreads = std::min(resolve_threads(cfg), runs);
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    while (true) {
      const int run = next.fetch_add(1);
      if (run >= runs) return;
      try {
        Rng rng = Rng(cfg.seed).derive(static_cast<std::uint64_t>(run));
        records[static_cast<std::size_t>(run)] = simulate_run(cfg, d, rng);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  McSummary s;
  s.runs = runs;
  s.t_sim = cfg.t_sim;
  const int n = d.n();
  const int m = d.m();
  const Eigen::Index ncons = static_cast<Eigen::Index>(d.constraints.size());

  for (int t = 0; t <= cfg.t_sim; ++t) {
    Vector mean = Vector::Zero(n);
    for (const auto& r : records) mean += r.x[static_cast<std::size_t>(t)];
    mean /= runs;
    Vector var = Vector::Zero(n);
    if (runs > 1) {
      for (const auto& r : records)
        var += (r.x[static_cast<std::size_t>(t)] - mean).cwiseAbs2();
      var /= (runs - 1);
    }
    s.state_mean.push_back(mean);
    s.state_variance.push_back(var);
  }
  for (int t = 0; t < cfg.t_sim; ++t) {
    Vector mean = Vector::Zero(m);
    for (const auto& r : records) mean += r.u[static_cast<std::size_t>(t)];
    mean /= runs;
    Vector var = Vector::Zero(m);
    if (runs > 1) {
      for (const auto& r : records)
        var += (r.u[static_cast<std::size_t>(t)] - mean).cwiseAbs2();
      var /= (runs - 1);
    }
    s.input_mean.push_back(mean);
    s.input_variance.push_back(var);

    Vector viol = Vector::Zero(ncons);
    for (const auto& r : records) {
      Eigen::Index ci = 0;
      for (const auto& c : d.constraints) {
        const Vector& z = c.kind == ConstraintKind::state ? r.x[static_cast<std::size_t>(t)]
                                                          : r.u[static_cast<std::size_t>(t)];
        if (c.direction.dot(z) >= c.bound) viol(ci) += 1.0;
        ++ci;
      }
    }
    s.violation_rate.push_back(viol / runs);

    for (const auto& r : records) {
      if (r.strategy[static_cast<std::size_t>(t)] == Strategy::reset)
        ++s.reset_steps;
      else
        ++s.prediction_steps;
    }
  }
  // Violations of state constraints at the final state as well.
  {
    Vector viol = Vector::Zero(ncons);
    for (const auto& r : records) {
      Eigen::Index ci = 0;
      for (const auto& c : d.constraints) {
        if (c.kind == ConstraintKind::state &&
            c.direction.dot(r.x[static_cast<std::size_t>(cfg.t_sim)]) >= c.bound)
          viol(ci) += 1.0;
        ++ci;
      }
    }
    s.violation_rate.push_back(viol / runs);
  }

  s.max_state_variance = Vector::Zero(n);
  for (const auto& v : s.state_variance)
    s.max_state_variance = s.max_state_variance.cwiseMax(v);
  s.max_input_variance = Vector::Zero(m);
  for (const auto& v : s.input_variance)
    s.max_input_variance = s.max_input_variance.cwiseMax(v);

  if (keep_records) s.records = std::move(records);
  return s;
}

ScanResult feasibility_scan(const SimConfig& cfg, const std::vector<std::string>& variants,
                            double lo, double hi, int points) {
  if (cfg.sys.n() != 2)
    throw std::invalid_argument("feasibility_scan: implemented for 2-state systems");
  ScanResult out;
  out.x1_grid.resize(points);
  out.x2_grid.resize(points);
  for (int i = 0; i < points; ++i) {
    const double f = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    out.x1_grid(i) = lo + f * (hi - lo);
    out.x2_grid(i) = lo + f * (hi - lo);
  }

  for (const auto& name : variants) {
    SimConfig vcfg = cfg;
    if (name == "smpcc_gaussian") {
      vcfg.controller = ControllerKind::smpcc;
      vcfg.factor = FactorKind::gaussian;
    } else if (name == "smpcc_cantelli") {
      vcfg.controller = ControllerKind::smpcc;
      vcfg.factor = FactorKind::cantelli;
    } else if (name == "smpcl_gaussian") {
      vcfg.controller = ControllerKind::smpcl;
      vcfg.factor = FactorKind::gaussian;
    } else if (name == "smpcl_cantelli") {
      vcfg.controller = ControllerKind::smpcl;
      vcfg.factor = FactorKind::cantelli;
    } else {
      throw std::invalid_argument("feasibility_scan: unknown variant " + name);
    }
    const ControllerDesign d = design_from_config(vcfg);
    const Matrix sigma11_0 = initial_sigma11(vcfg, d);

    std::vector<bool> grid(static_cast<std::size_t>(points) * points, false);
    const int total = points * points;
    std::atomic<int> next{0};
    const int nthreads = std::min(resolve_threads(cfg), total);

    auto worker = [&]() {
      AnyController ctrl = make_controller(vcfg, d);
      while (true) {
        const int idx = next.fetch_add(1);
        if (idx >= total) return;
        const int i = idx / points;
        const int j = idx % points;
        Vector x0(2);
        x0 << out.x1_grid(i), out.x2_grid(j);
        bool ok = false;
        ctrl.init(x0, sigma11_0);
        if (ctrl.c) {
          ok = ctrl.c->initial_feasible();
        } else {
          ok = ctrl.l->initial_feasible();
        }
        grid[static_cast<std::size_t>(idx)] = ok;
      }
    };
    if (nthreads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    out.variant_names.push_back(name);
    out.feasible.push_back(std::move(grid));
  }
  return out;
}

namespace {
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
}  // namespace

AnalyticResult analytic_compare(const AnalyticCase& c) {
  AnalyticResult r;
  r.dx_rpi = c.w_max / (1.0 - c.a);
  const double big_w = c.w_max * c.w_max / c.variance_divisor;
  const double x_var = big_w / (1.0 - c.a * c.a);
  r.dx_stochastic = std::sqrt(x_var * (1.0 - c.p) / c.p);
  const double one_minus_a = 1.0 - c.a;
  r.p_threshold = one_minus_a * one_minus_a /
                  (c.variance_divisor * (1.0 - c.a * c.a) + one_minus_a * one_minus_a);
  r.p_threshold_gaussian =
      1.0 - normal_cdf(std::sqrt(c.variance_divisor * (1.0 - c.a * c.a)) / one_minus_a);
  return r;
}

}  // namespace smpc
