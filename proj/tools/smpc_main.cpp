#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "smpc/report.hpp"
#include "smpc/simulation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitConfig = 3;
constexpr int kExitSolver = 4;

smpc::Json analytic_json(double a, double p) {
  using smpc::AnalyticCase;
  using smpc::NoiseDist;
  smpc::Json cases = smpc::Json::array();
  const struct {
    const char* name;
    NoiseDist shape;
    double divisor;
  } specs[] = {{"uniform", NoiseDist::uniform, 3.0},
               {"triangular", NoiseDist::triangular, 18.0},
               {"truncated_gaussian", NoiseDist::truncated_gaussian, 25.0}};
  for (const auto& sp : specs) {
    AnalyticCase c;
    c.a = a;
    c.shape = sp.shape;
    c.variance_divisor = sp.divisor;
    c.p = p;
    const smpc::AnalyticResult r = smpc::analytic_compare(c);
    cases.push_back(smpc::Json{{"shape", sp.name},
                               {"variance_divisor", sp.divisor},
                               {"dx_rpi", r.dx_rpi},
                               {"dx_stochastic", r.dx_stochastic},
                               {"p_threshold", r.p_threshold},
                               {"p_threshold_gaussian", r.p_threshold_gaussian}});
  }
  return smpc::Json{{"a", a}, {"p", p}, {"cases", cases}};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Output-feedback stochastic MPC toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int runs_override = -1;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  std::string controller_override, factor_override;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("-c,--config", config_path, "configuration JSON file");
    if (needs_config) opt->required();
    cmd->add_option("-o,--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--runs", runs_override, "override run count");
    cmd->add_option("--seed", seed_override, "override master seed")
        ->each([&](const std::string&) { seed_set = true; });
    cmd->add_option("--controller", controller_override, "smpcc or smpcl");
    cmd->add_option("--factor", factor_override, "cantelli or gaussian");
  };

  auto* cmd_design = app.add_subcommand("design", "synthesize the offline design bundle");
  add_common(cmd_design, true);
  auto* cmd_run = app.add_subcommand("run", "single closed-loop simulation");
  add_common(cmd_run, true);
  auto* cmd_mc = app.add_subcommand("montecarlo", "seeded Monte Carlo campaign");
  add_common(cmd_mc, true);
  auto* cmd_scan = app.add_subcommand("scan", "initial-state feasibility grid");
  add_common(cmd_scan, true);
  double scan_lo = -10.0, scan_hi = 10.0;
  int scan_points = 41;
  std::vector<std::string> scan_variants;
  cmd_scan->add_option("--lo", scan_lo, "grid lower bound");
  cmd_scan->add_option("--hi", scan_hi, "grid upper bound");
  cmd_scan->add_option("--points", scan_points, "grid points per axis");
  cmd_scan->add_option("--variants", scan_variants,
                       "subset of smpcc_gaussian smpcc_cantelli smpcl_gaussian smpcl_cantelli");
  auto* cmd_analytic =
      app.add_subcommand("analytic", "closed-form tightening comparison for the scalar system");
  double analytic_a = 0.9, analytic_p = 0.1;
  cmd_analytic->add_option("-a,--contraction", analytic_a, "pole of the scalar system");
  cmd_analytic->add_option("-p,--prob", analytic_p, "violation probability");
  cmd_analytic->add_option("-o,--out", out_dir, "output directory");
  auto* cmd_certify = app.add_subcommand("certify", "convergence certificate for the design");
  add_common(cmd_certify, true);
  double certify_rho = -1.0;
  cmd_certify->add_option("--rho", certify_rho, "contraction parameter in (0,1)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_analytic->parsed()) {
      const smpc::Json j = analytic_json(analytic_a, analytic_p);
      std::cout << j.dump(2) << std::endl;
      if (!out_dir.empty()) {
        ensure_dir(out_dir);
        smpc::write_json(j, out_dir + "/analytic.json");
      }
      return kExitOk;
    }

    smpc::SimConfig cfg;
    try {
      cfg = smpc::load_config(config_path);
      if (runs_override > 0) cfg.runs = runs_override;
      if (seed_set) cfg.seed = seed_override;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (!controller_override.empty())
        cfg.controller = controller_override == "smpcl" ? smpc::ControllerKind::smpcl
                                                        : smpc::ControllerKind::smpcc;
      if (!factor_override.empty())
        cfg.factor = smpc::factor_kind_from_string(factor_override);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << std::endl;
      return kExitConfig;
    }
    ensure_dir(cfg.output_dir);

    const smpc::ControllerDesign design = smpc::design_from_config(cfg);

    if (cmd_design->parsed()) {
      const smpc::Json j = smpc::design_to_json(design);
      std::cout << j.dump(2) << std::endl;
      smpc::write_json(j, cfg.output_dir + "/design.json");
      return kExitOk;
    }

    if (cmd_certify->parsed()) {
      const double rho = certify_rho > 0.0 ? certify_rho : cfg.rho;
      const smpc::Matrix omega = smpc::stack_noise_covariance(design.noise);
      const bool lmi = cfg.controller == smpc::ControllerKind::smpcl;
      smpc::Matrix omega_used = omega;
      if (lmi) omega_used.bottomRightCorner(design.sys.p(), design.sys.p()) *= 2.0;
      const smpc::Theorem1Certificate cert =
          smpc::certificate(design, omega_used, rho, lmi);
      smpc::Json j = smpc::certificate_to_json(cert);
      j["controller"] = lmi ? "smpcl" : "smpcc";
      std::cout << j.dump(2) << std::endl;
      smpc::write_json(j, cfg.output_dir + "/certificate.json");
      return kExitOk;
    }

    if (cmd_run->parsed()) {
      smpc::Rng rng = smpc::Rng(cfg.seed).derive(0);
      const smpc::RunRecord rec = smpc::simulate_run(cfg, design, rng);
      smpc::write_trace_csv({rec}, cfg, cfg.output_dir + "/trace.csv");
      smpc::Json j;
      j["config"] = cfg.echo();
      j["steps"] = static_cast<int>(rec.u.size());
      j["final_state"] = smpc::vector_to_json(rec.x.back());
      j["certificate"] = smpc::certificate_to_json(design.cert);
      std::cout << j.dump(2) << std::endl;
      smpc::write_json(j, cfg.output_dir + "/summary.json");
      return kExitOk;
    }

    if (cmd_mc->parsed()) {
      const smpc::McSummary s = smpc::monte_carlo(cfg, design, true);
      smpc::write_trace_csv(s.records, cfg, cfg.output_dir + "/trace.csv");
      const smpc::Json j = smpc::summary_to_json(s, cfg, design);
      std::cout << j.dump(2) << std::endl;
      smpc::write_json(j, cfg.output_dir + "/summary.json");
      smpc::write_envelope_svg(s, cfg.output_dir + "/envelopes.svg");
      return kExitOk;
    }

    if (cmd_scan->parsed()) {
      if (scan_variants.empty())
        scan_variants = {"smpcc_gaussian", "smpcc_cantelli", "smpcl_gaussian",
                         "smpcl_cantelli"};
      const smpc::ScanResult scan =
          smpc::feasibility_scan(cfg, scan_variants, scan_lo, scan_hi, scan_points);
      const smpc::Json j = smpc::scan_to_json(scan);
      std::cout << j.dump(2) << std::endl;
      smpc::write_json(j, cfg.output_dir + "/scan.json");
      smpc::write_scan_svg(scan, cfg.output_dir + "/scan.svg");
      return kExitOk;
    }
  } catch (const smpc::InfeasibleAtStart& e) {
    std::cerr << "infeasible at t=0: " << e.what() << std::endl;
    return kExitInfeasible;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << std::endl;
    return kExitSolver;
  }
  return kExitOk;
}
