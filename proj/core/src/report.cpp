#include "smpc/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace smpc {

namespace {

void ensure_open(const std::ofstream& f, const std::string& path) {
  if (!f) throw std::runtime_error("cannot open output file: " + path);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

void write_trace_csv(const std::vector<RunRecord>& records, const SimConfig& cfg,
                     const std::string& path) {
  std::ofstream f(path);
  ensure_open(f, path);
  const int n = cfg.sys.n();
  const int m = cfg.sys.m();
  f << "run,t";
  for (int i = 1; i <= n; ++i) f << ",x" << i;
  for (int i = 1; i <= n; ++i) f << ",xhat" << i;
  for (int i = 1; i <= n; ++i) f << ",xbar" << i;
  for (int i = 1; i <= m; ++i) f << ",u" << i;
  f << ",strategy,J_star";
  for (std::size_t i = 1; i <= cfg.constraints.size(); ++i) f << ",margin" << i;
  f << "\n";
  for (std::size_t run = 0; run < records.size(); ++run) {
    const RunRecord& r = records[run];
    for (std::size_t t = 0; t < r.u.size(); ++t) {
      f << run << "," << t;
      for (int i = 0; i < n; ++i) f << "," << fmt(r.x[t](i));
      for (int i = 0; i < n; ++i) f << "," << fmt(r.xhat[t](i));
      for (int i = 0; i < n; ++i) f << "," << fmt(r.xbar[t](i));
      for (int i = 0; i < m; ++i) f << "," << fmt(r.u[t](i));
      f << "," << (r.strategy[t] == Strategy::reset ? "reset" : "prediction");
      f << "," << fmt(r.j_star[t]);
      for (Eigen::Index i = 0; i < r.margins[t].size(); ++i) f << "," << fmt(r.margins[t](i));
      f << "\n";
    }
  }
}

Json summary_to_json(const McSummary& s, const SimConfig& cfg, const ControllerDesign& d) {
  Json j;
  j["config"] = cfg.echo();
  j["runs"] = s.runs;
  j["t_sim"] = s.t_sim;
  Json seeds = Json::array();
  for (int run = 0; run < s.runs; ++run) seeds.push_back(cfg.seed);
  j["seed"] = cfg.seed;

  auto series = [](const std::vector<Vector>& vs) {
    Json out = Json::array();
    for (const auto& v : vs) out.push_back(vector_to_json(v));
    return out;
  };
  j["violation_rate"] = series(s.violation_rate);
  j["state_mean"] = series(s.state_mean);
  j["state_variance"] = series(s.state_variance);
  j["input_mean"] = series(s.input_mean);
  j["input_variance"] = series(s.input_variance);
  j["max_state_variance"] = vector_to_json(s.max_state_variance);
  j["max_input_variance"] = vector_to_json(s.max_input_variance);
  j["strategy_histogram"] = {{"reset", s.reset_steps}, {"prediction", s.prediction_steps}};
  j["certificate"] = certificate_to_json(d.cert);
  j["version"] = kVersion;
  return j;
}

void write_json(const Json& j, const std::string& path) {
  std::ofstream f(path);
  ensure_open(f, path);
  f << j.dump(2) << "\n";
}

namespace {

struct SvgCanvas {
  std::ostringstream body;
  double width = 720, height = 480;
  double margin = 50;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;

  double px(double x) const {
    return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
  }
  double py(double y) const {
    return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
  }
  void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& color, double opacity = 1.0) {
    body << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-opacity=\"" << opacity
         << "\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) body << px(xs[i]) << "," << py(ys[i]) << " ";
    body << "\"/>\n";
  }
  void dot(double x, double y, const std::string& color, double r = 2.0) {
    body << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"" << r << "\" fill=\""
         << color << "\"/>\n";
  }
  void text(double x, double y, const std::string& t) {
    body << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"12\" font-family=\"sans-serif\">"
         << t << "</text>\n";
  }
  std::string render() const {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << width - 2 * margin
       << "\" height=\"" << height - 2 * margin
       << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n"
       << body.str() << "</svg>\n";
    return os.str();
  }
};

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

void write_envelope_svg(const McSummary& s, const std::string& path) {
  std::ofstream f(path);
  ensure_open(f, path);
  SvgCanvas cv;
  cv.xmin = 0;
  cv.xmax = std::max(1, s.t_sim);
  cv.ymin = 1e30;
  cv.ymax = -1e30;
  const int n = s.state_mean.empty() ? 0 : static_cast<int>(s.state_mean[0].size());
  const int m = s.input_mean.empty() ? 0 : static_cast<int>(s.input_mean[0].size());
  auto bound = [&](double v) {
    cv.ymin = std::min(cv.ymin, v);
    cv.ymax = std::max(cv.ymax, v);
  };
  for (std::size_t t = 0; t < s.state_mean.size(); ++t)
    for (int i = 0; i < n; ++i) {
      bound(s.state_mean[t](i) + 2 * std::sqrt(s.state_variance[t](i)));
      bound(s.state_mean[t](i) - 2 * std::sqrt(s.state_variance[t](i)));
    }
  for (std::size_t t = 0; t < s.input_mean.size(); ++t)
    for (int i = 0; i < m; ++i) {
      bound(s.input_mean[t](i) + 2 * std::sqrt(s.input_variance[t](i)));
      bound(s.input_mean[t](i) - 2 * std::sqrt(s.input_variance[t](i)));
    }
  if (cv.ymin > cv.ymax) {
    cv.ymin = -1;
    cv.ymax = 1;
  }
  const double pad = 0.05 * (cv.ymax - cv.ymin + 1e-9);
  cv.ymin -= pad;
  cv.ymax += pad;

  int color = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> ts, mean, up, dn;
    for (std::size_t t = 0; t < s.state_mean.size(); ++t) {
      ts.push_back(static_cast<double>(t));
      mean.push_back(s.state_mean[t](i));
      up.push_back(s.state_mean[t](i) + 2 * std::sqrt(s.state_variance[t](i)));
      dn.push_back(s.state_mean[t](i) - 2 * std::sqrt(s.state_variance[t](i)));
    }
    const std::string c = kColors[color++ % 6];
    cv.polyline(ts, mean, c);
    cv.polyline(ts, up, c, 0.4);
    cv.polyline(ts, dn, c, 0.4);
    cv.text(cv.width - 160.0, 20.0 + 14.0 * i, "x" + std::to_string(i + 1) + " mean +/- 2sd");
  }
  for (int i = 0; i < m; ++i) {
    std::vector<double> ts, mean, up, dn;
    for (std::size_t t = 0; t < s.input_mean.size(); ++t) {
      ts.push_back(static_cast<double>(t));
      mean.push_back(s.input_mean[t](i));
      up.push_back(s.input_mean[t](i) + 2 * std::sqrt(s.input_variance[t](i)));
      dn.push_back(s.input_mean[t](i) - 2 * std::sqrt(s.input_variance[t](i)));
    }
    const std::string c = kColors[color++ % 6];
    cv.polyline(ts, mean, c);
    cv.polyline(ts, up, c, 0.4);
    cv.polyline(ts, dn, c, 0.4);
    cv.text(cv.width - 160.0, 20.0 + 14.0 * (n + i), "u" + std::to_string(i + 1) + " mean +/- 2sd");
  }
  f << cv.render();
}

void write_scan_svg(const ScanResult& scan, const std::string& path) {
  std::ofstream f(path);
  ensure_open(f, path);
  SvgCanvas cv;
  const int points = static_cast<int>(scan.x1_grid.size());
  cv.xmin = scan.x1_grid(0);
  cv.xmax = scan.x1_grid(points - 1);
  cv.ymin = scan.x2_grid(0);
  cv.ymax = scan.x2_grid(points - 1);
  for (std::size_t v = 0; v < scan.variant_names.size(); ++v) {
    const std::string c = kColors[v % 6];
    for (int i = 0; i < points; ++i)
      for (int j = 0; j < points; ++j)
        if (scan.feasible[v][static_cast<std::size_t>(i * points + j)])
          cv.dot(scan.x1_grid(i), scan.x2_grid(j), c, 2.5 - 0.5 * static_cast<double>(v % 4));
    cv.text(cv.width - 180.0, 20.0 + 14.0 * v, scan.variant_names[v]);
  }
  f << cv.render();
}

Json scan_to_json(const ScanResult& scan) {
  Json j;
  j["x1_grid"] = vector_to_json(scan.x1_grid);
  j["x2_grid"] = vector_to_json(scan.x2_grid);
  for (std::size_t v = 0; v < scan.variant_names.size(); ++v) {
    Json grid = Json::array();
    for (bool b : scan.feasible[v]) grid.push_back(b ? 1 : 0);
    j["feasible"][scan.variant_names[v]] = std::move(grid);
  }
  return j;
}

}  // namespace smpc
