#include "smpc/tightening.hpp"

#include <cmath>
#include <stdexcept>

namespace smpc {

std::string to_string(FactorKind k) {
  return k == FactorKind::cantelli ? "cantelli" : "gaussian";
}

FactorKind factor_kind_from_string(const std::string& s) {
  if (s == "cantelli") return FactorKind::cantelli;
  if (s == "gaussian") return FactorKind::gaussian;
  throw std::invalid_argument("unknown tightening factor kind: " + s);
}

double cantelli_factor(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("cantelli_factor: p must lie in (0,1)");
  return std::sqrt((1.0 - p) / p);
}

namespace {
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
}  // namespace

double gaussian_factor(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("gaussian_factor: p must lie in (0,1)");
  const double target = 1.0 - p;
  double lo = -40.0, hi = 40.0;
  // Monotone bisection; 1e-10 interval tolerance.
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double tightening_factor(FactorKind kind, double p) {
  return kind == FactorKind::cantelli ? cantelli_factor(p) : gaussian_factor(p);
}

double tightened_bound(const ChanceConstraint& c, const Matrix& cov, FactorKind kind) {
  const double radicand = quad_form(c.direction, symmetrize(cov));
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (radicand < -kPsdTol * scale)
    throw std::runtime_error("tightened_bound: negative variance, covariance not PSD");
  const double sd = std::sqrt(std::max(0.0, radicand));
  return c.bound - sd * tightening_factor(kind, c.prob);
}

double linearized_tightened_bound(const ChanceConstraint& c, const Matrix& cov, FactorKind kind,
                                  double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("linearized_tightened_bound: alpha must lie in (0,1]");
  const double variance = std::max(0.0, quad_form(c.direction, symmetrize(cov)));
  const double f = tightening_factor(kind, c.prob);
  return (1.0 - 0.5 * alpha) * c.bound - variance * f * f / (2.0 * alpha * c.bound);
}

double empirical_violation(std::span<const Vector> samples, const ChanceConstraint& c) {
  if (samples.empty()) throw std::invalid_argument("empirical_violation: empty sample set");
  std::size_t hits = 0;
  for (const auto& z : samples)
    if (c.direction.dot(z) >= c.bound) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace smpc
