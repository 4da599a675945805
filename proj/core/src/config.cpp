#include "smpc/config.hpp"

#include <fstream>
#include <numbers>
#include <stdexcept>

namespace smpc {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("matrix json: expected array of rows");
  if (j.empty()) return Matrix(0, 0);
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("matrix json: ragged rows");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("vector json: expected array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

namespace {

Json polytope_to_json(const Polytope& p) {
  return Json{{"G", matrix_to_json(p.G)}, {"g", vector_to_json(p.g)}};
}

Polytope polytope_from_json(const Json& j) {
  return Polytope{matrix_from_json(j.at("G")), vector_from_json(j.at("g"))};
}

Json constraint_to_json(const ChanceConstraint& c) {
  return Json{{"kind", c.kind == ConstraintKind::state ? "state" : "input"},
              {"direction", vector_to_json(c.direction)},
              {"bound", c.bound},
              {"prob", c.prob}};
}

ChanceConstraint constraint_from_json(const Json& j) {
  ChanceConstraint c;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "state")
    c.kind = ConstraintKind::state;
  else if (kind == "input")
    c.kind = ConstraintKind::input;
  else
    throw std::invalid_argument("constraint kind must be 'state' or 'input'");
  c.direction = vector_from_json(j.at("direction"));
  c.bound = j.at("bound").get<double>();
  c.prob = j.at("prob").get<double>();
  return c;
}

}  // namespace

Json certificate_to_json(const Theorem1Certificate& c) {
  return Json{{"alpha", c.alpha},
              {"beta", c.beta},
              {"omega", c.omega},
              {"sigma_bar_radius", c.sigma_bar_radius},
              {"lambda_min_sigma_bar", c.lambda_min_sigma_bar},
              {"rho", c.rho},
              {"holds", c.holds},
              {"band_radius", c.band_radius}};
}

Json design_to_json(const ControllerDesign& d) {
  Json j;
  j["system"] = {{"A", matrix_to_json(d.sys.A)},
                 {"B", matrix_to_json(d.sys.B)},
                 {"C", matrix_to_json(d.sys.C)},
                 {"F", matrix_to_json(d.sys.F)}};
  j["noise"] = {{"W", matrix_to_json(d.noise.W)},
                {"V", matrix_to_json(d.noise.V)},
                {"dist", to_string(d.noise.dist)}};
  Json cons = Json::array();
  for (const auto& c : d.constraints) cons.push_back(constraint_to_json(c));
  j["constraints"] = std::move(cons);
  j["weights"] = {{"Q", matrix_to_json(d.Q)}, {"R", matrix_to_json(d.R)},
                  {"Q_L", matrix_to_json(d.Q_L)}};
  j["horizon"] = d.N;
  j["factor"] = to_string(d.factor);
  j["alpha_x"] = d.alpha_x;
  j["alpha_u"] = d.alpha_u;
  j["gains"] = {{"K", matrix_to_json(d.Kbar)}, {"L", matrix_to_json(d.Lbar)}};
  j["terminal"] = {{"S", matrix_to_json(d.S)},
                   {"S_L", matrix_to_json(d.S_L)},
                   {"Wbar", matrix_to_json(d.Wbar)},
                   {"Vbar", matrix_to_json(d.Vbar)},
                   {"Sigma_bar", matrix_to_json(d.Sigma_bar)},
                   {"SigmaD_bar_11", matrix_to_json(d.SigmaD_bar_11)},
                   {"SigmaD_bar_22", matrix_to_json(d.SigmaD_bar_22)},
                   {"XF", polytope_to_json(d.XF)},
                   {"XF_lin", polytope_to_json(d.XF_lin)}};
  j["certificate"] = certificate_to_json(d.cert);
  j["version"] = kVersion;
  return j;
}

ControllerDesign design_from_json(const Json& j) {
  ControllerDesign d;
  const auto& sys = j.at("system");
  d.sys.A = matrix_from_json(sys.at("A"));
  d.sys.B = matrix_from_json(sys.at("B"));
  d.sys.C = matrix_from_json(sys.at("C"));
  d.sys.F = matrix_from_json(sys.at("F"));
  d.sys.validate_dims();
  const auto& noise = j.at("noise");
  d.noise.W = matrix_from_json(noise.at("W"));
  d.noise.V = matrix_from_json(noise.at("V"));
  d.noise.dist = noise_dist_from_string(noise.value("dist", "gaussian"));
  for (const auto& c : j.at("constraints")) d.constraints.push_back(constraint_from_json(c));
  d.Q = matrix_from_json(j.at("weights").at("Q"));
  d.R = matrix_from_json(j.at("weights").at("R"));
  d.Q_L = matrix_from_json(j.at("weights").at("Q_L"));
  d.N = j.at("horizon").get<int>();
  d.factor = factor_kind_from_string(j.at("factor").get<std::string>());
  d.alpha_x = j.value("alpha_x", 1.0);
  d.alpha_u = j.value("alpha_u", 1.0);
  d.Kbar = matrix_from_json(j.at("gains").at("K"));
  d.Lbar = matrix_from_json(j.at("gains").at("L"));
  const auto& t = j.at("terminal");
  d.S = matrix_from_json(t.at("S"));
  d.S_L = matrix_from_json(t.at("S_L"));
  d.Wbar = matrix_from_json(t.at("Wbar"));
  d.Vbar = matrix_from_json(t.at("Vbar"));
  d.Sigma_bar = matrix_from_json(t.at("Sigma_bar"));
  d.SigmaD_bar_11 = matrix_from_json(t.at("SigmaD_bar_11"));
  d.SigmaD_bar_22 = matrix_from_json(t.at("SigmaD_bar_22"));
  d.XF = polytope_from_json(t.at("XF"));
  d.XF_lin = polytope_from_json(t.at("XF_lin"));
  if (j.contains("certificate")) {
    const auto& c = j.at("certificate");
    d.cert.alpha = c.value("alpha", 0.0);
    d.cert.beta = c.value("beta", 0.0);
    d.cert.omega = c.value("omega", 0.0);
    d.cert.sigma_bar_radius = c.value("sigma_bar_radius", 0.0);
    d.cert.lambda_min_sigma_bar = c.value("lambda_min_sigma_bar", 0.0);
    d.cert.rho = c.value("rho", 0.0);
    d.cert.holds = c.value("holds", false);
    d.cert.band_radius = c.value("band_radius", 0.0);
  }
  return d;
}

SimConfig SimConfig::from_json(const Json& j) {
  SimConfig cfg;
  const auto& sys = j.at("system");
  cfg.sys.A = matrix_from_json(sys.at("A"));
  cfg.sys.B = matrix_from_json(sys.at("B"));
  cfg.sys.C = matrix_from_json(sys.at("C"));
  cfg.sys.F = matrix_from_json(sys.at("F"));
  cfg.sys.validate_dims();
  const auto& noise = j.at("noise");
  cfg.noise.W = matrix_from_json(noise.at("W"));
  cfg.noise.V = matrix_from_json(noise.at("V"));
  cfg.noise.dist = noise_dist_from_string(noise.value("dist", "gaussian"));
  cfg.noise.validate(cfg.sys.nw(), cfg.sys.p());
  for (const auto& c : j.at("constraints")) {
    ChanceConstraint cc = constraint_from_json(c);
    cc.validate(cfg.sys.n(), cfg.sys.m());
    cfg.constraints.push_back(std::move(cc));
  }
  const auto& w = j.at("weights");
  cfg.Q = matrix_from_json(w.at("Q"));
  cfg.R = matrix_from_json(w.at("R"));
  cfg.Q_L = w.contains("Q_L") ? matrix_from_json(w.at("Q_L")) : cfg.Q;
  cfg.horizon = j.at("horizon").get<int>();

  const std::string ctrl = j.value("controller", "smpcc");
  if (ctrl == "smpcc")
    cfg.controller = ControllerKind::smpcc;
  else if (ctrl == "smpcl")
    cfg.controller = ControllerKind::smpcl;
  else
    throw std::invalid_argument("controller must be 'smpcc' or 'smpcl'");
  cfg.factor = factor_kind_from_string(j.value("factor", "cantelli"));
  cfg.alpha_x = j.value("alpha_x", 1.0);
  cfg.alpha_u = j.value("alpha_u", 1.0);
  cfg.omega_bar_scale = j.value("omega_bar_scale", 1.1);
  cfg.lqg_vbar_scale = j.value("lqg_vbar_scale", 1.0);
  cfg.lqr_scale = j.value("lqr_scale", std::numbers::sqrt2);
  cfg.filter_scale = j.value("filter_scale", std::numbers::sqrt2);
  if (j.contains("wbar")) cfg.wbar_override = matrix_from_json(j.at("wbar"));
  if (j.contains("vbar")) cfg.vbar_override = matrix_from_json(j.at("vbar"));
  cfg.rho = j.value("rho", 0.99);
  cfg.exact_strategy_mode = j.value("exact_strategy_mode", false);

  if (j.contains("ccl")) {
    const auto& ccl = j.at("ccl");
    cfg.ccl_max_iter = ccl.value("max_iter", cfg.ccl_max_iter);
    cfg.ccl_gap_tol = ccl.value("gap_tol", cfg.ccl_gap_tol);
    cfg.ccl_mu_fraction = ccl.value("mu_fraction", cfg.ccl_mu_fraction);
  }
  if (j.contains("sdp")) {
    const auto& sdp = j.at("sdp");
    cfg.sdp_tol = sdp.value("tol", cfg.sdp_tol);
    cfg.sdp_max_iter = sdp.value("max_iter", cfg.sdp_max_iter);
  }

  const auto& sim = j.at("sim");
  cfg.t_sim = sim.value("t_sim", 30);
  cfg.runs = sim.value("runs", 1);
  cfg.seed = sim.value("seed", 1ULL);
  cfg.x0 = vector_from_json(sim.at("x0"));
  cfg.xhat0 = sim.contains("xhat0") ? vector_from_json(sim.at("xhat0")) : cfg.x0;
  if (sim.contains("sigma11_0")) {
    cfg.sigma11_0 = matrix_from_json(sim.at("sigma11_0"));
    cfg.sigma11_steady = false;
  } else {
    cfg.sigma11_steady = true;
  }
  cfg.sample_initial_error = sim.value("sample_initial_error", true);
  cfg.output_dir = sim.value("output_dir", std::string("out"));
  cfg.threads = sim.value("threads", 0);
  return cfg;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  Json j;
  in >> j;
  return SimConfig::from_json(j);
}

Json SimConfig::echo() const {
  Json j;
  j["system"] = {{"A", matrix_to_json(sys.A)},
                 {"B", matrix_to_json(sys.B)},
                 {"C", matrix_to_json(sys.C)},
                 {"F", matrix_to_json(sys.F)}};
  j["noise"] = {{"W", matrix_to_json(noise.W)},
                {"V", matrix_to_json(noise.V)},
                {"dist", to_string(noise.dist)}};
  Json cons = Json::array();
  for (const auto& c : constraints)
    cons.push_back(Json{{"kind", c.kind == ConstraintKind::state ? "state" : "input"},
                        {"direction", vector_to_json(c.direction)},
                        {"bound", c.bound},
                        {"prob", c.prob}});
  j["constraints"] = std::move(cons);
  j["weights"] = {{"Q", matrix_to_json(Q)}, {"R", matrix_to_json(R)}, {"Q_L", matrix_to_json(Q_L)}};
  j["horizon"] = horizon;
  j["controller"] = controller == ControllerKind::smpcc ? "smpcc" : "smpcl";
  j["factor"] = to_string(factor);
  j["alpha_x"] = alpha_x;
  j["alpha_u"] = alpha_u;
  j["omega_bar_scale"] = omega_bar_scale;
  j["lqg_vbar_scale"] = lqg_vbar_scale;
  j["lqr_scale"] = lqr_scale;
  j["filter_scale"] = filter_scale;
  j["rho"] = rho;
  j["exact_strategy_mode"] = exact_strategy_mode;
  j["sim"] = {{"t_sim", t_sim}, {"runs", runs},   {"seed", seed},
              {"x0", vector_to_json(x0)},         {"xhat0", vector_to_json(xhat0)},
              {"output_dir", output_dir},         {"threads", threads},
              {"sample_initial_error", sample_initial_error}};
  j["version"] = kVersion;
  return j;
}

}  // namespace smpc
