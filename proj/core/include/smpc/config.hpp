#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smpc/json_io.hpp"
#include "smpc/linear_system.hpp"
#include "smpc/tightening.hpp"

namespace smpc {

enum class ControllerKind { smpcc, smpcl };

// Everything a simulation campaign needs, parsed from one JSON document.
struct SimConfig {
  LinearSystem sys;
  NoiseSpec noise;
  std::vector<ChanceConstraint> constraints;
  Matrix Q, R, Q_L;
  int horizon = 9;

  ControllerKind controller = ControllerKind::smpcc;
  FactorKind factor = FactorKind::cantelli;
  double alpha_x = 1.0;
  double alpha_u = 1.0;
  double omega_bar_scale = 1.1;
  double lqg_vbar_scale = 1.0;
  double lqr_scale = 1.4142135623730951;
  double filter_scale = 1.4142135623730951;
  Matrix wbar_override;
  Matrix vbar_override;
  double rho = 0.99;
  bool exact_strategy_mode = false;

  int ccl_max_iter = 25;
  double ccl_gap_tol = 1e-3;  // relative to n
  double ccl_mu_fraction = 0.1;
  double sdp_tol = 1e-6;
  long sdp_max_iter = 50000;

  int t_sim = 30;
  int runs = 1;
  std::uint64_t seed = 1;
  Vector x0;
  Vector xhat0;
  Matrix sigma11_0;          // used when sigma11_steady is false
  bool sigma11_steady = true;  // default: steady-state observer covariance
  bool sample_initial_error = true;
  std::string output_dir = "out";
  int threads = 0;  // 0 = hardware concurrency

  static SimConfig from_json(const Json& j);
  Json echo() const;
};

SimConfig load_config(const std::string& path);

}  // namespace smpc
