#pragma once

#include <string>
#include <vector>

#include "smpc/config.hpp"
#include "smpc/sampling.hpp"
#include "smpc/smpc_c.hpp"
#include "smpc/smpc_l.hpp"

namespace smpc {

// Full closed-loop trace of one run.
struct RunRecord {
  std::vector<Vector> x;      // plant state, t = 0..T
  std::vector<Vector> xhat;   // estimate before the step
  std::vector<Vector> xbar;   // chosen nominal state
  std::vector<Vector> u;      // applied input, t = 0..T-1
  std::vector<Strategy> strategy;
  std::vector<double> j_star;
  std::vector<double> sigma_trace;
  std::vector<Vector> margins;  // per-constraint slack at each step
};

ControllerDesign design_from_config(const SimConfig& cfg);

// Steady-state observer-error covariance under the offline gain and the true
// noise (default initial covariance).
Matrix steady_observer_covariance(const ControllerDesign& d);

Matrix initial_sigma11(const SimConfig& cfg, const ControllerDesign& d);

RunRecord simulate_run(const SimConfig& cfg, const ControllerDesign& d, Rng rng);

struct McSummary {
  int runs = 0;
  int t_sim = 0;
  std::vector<Vector> violation_rate;   // per step, per constraint
  std::vector<Vector> state_mean;       // per step
  std::vector<Vector> state_variance;   // per step, per state coordinate
  std::vector<Vector> input_mean;       // per step
  std::vector<Vector> input_variance;   // per step, per input coordinate
  Vector max_state_variance;            // per coordinate
  Vector max_input_variance;
  long reset_steps = 0;
  long prediction_steps = 0;
  std::vector<RunRecord> records;       // retained when keep_records
};

McSummary monte_carlo(const SimConfig& cfg, const ControllerDesign& d, bool keep_records = false);

struct ScanResult {
  Vector x1_grid;
  Vector x2_grid;
  // One flag grid per variant, row-major over (x1, x2).
  std::vector<std::string> variant_names;
  std::vector<std::vector<bool>> feasible;
};

// t = 0 feasibility over a rectangular grid of initial estimates, for the
// requested controller/factor combinations ("smpcc_gaussian", ...).
ScanResult feasibility_scan(const SimConfig& cfg, const std::vector<std::string>& variants,
                            double lo, double hi, int points);

struct AnalyticCase {
  double a = 0.9;
  double w_max = 1.0;
  NoiseDist shape = NoiseDist::uniform;
  double variance_divisor = 3.0;  // W = w_max^2 / divisor
  double p = 0.1;
};

struct AnalyticResult {
  double dx_rpi = 0.0;         // worst-case tightening w_max / (1 - a)
  double dx_stochastic = 0.0;  // sqrt(X (1-p)/p) at the requested p
  double p_threshold = 0.0;    // stochastic beats worst-case for p above this
  double p_threshold_gaussian = 0.0;
};

AnalyticResult analytic_compare(const AnalyticCase& c);

}  // namespace smpc
