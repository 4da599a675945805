#include <doctest.h>

#include <cmath>
#include <vector>

#include "smpc/sampling.hpp"
#include "smpc/tightening.hpp"

using namespace smpc;

namespace {

// Independent standard-normal CDF via adaptive Simpson quadrature of the
// density, used as the oracle for the quantile routine.
double phi_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

double simpson(double a, double b) {
  const double c = 0.5 * (a + b);
  return (b - a) / 6.0 * (phi_density(a) + 4.0 * phi_density(c) + phi_density(b));
}

double adaptive_simpson(double a, double b, double whole, double tol, int depth) {
  const double c = 0.5 * (a + b);
  const double left = simpson(a, c);
  const double right = simpson(c, b);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(a, c, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(c, b, right, 0.5 * tol, depth - 1);
}

double normal_cdf_quadrature(double x) {
  if (x < -12.0) return 0.0;
  const double lo = -12.0;
  return adaptive_simpson(lo, x, simpson(lo, x), 1e-13, 40);
}

double quantile_oracle(double tail_prob) {
  double lo = -12.0, hi = 12.0;
  const double target = 1.0 - tail_prob;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf_quadrature(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

ChanceConstraint scalar_constraint(double bound, double p) {
  ChanceConstraint c;
  c.direction = Vector::Constant(1, 1.0);
  c.bound = bound;
  c.prob = p;
  c.kind = ConstraintKind::state;
  return c;
}

}  // namespace

TEST_CASE("distribution-free factor") {
  CHECK(cantelli_factor(0.5) == doctest::Approx(1.0));
  CHECK(cantelli_factor(0.1) == doctest::Approx(3.0));
  CHECK(cantelli_factor(0.2) == doctest::Approx(2.0));
  CHECK_THROWS_AS(cantelli_factor(0.0), std::invalid_argument);
  CHECK_THROWS_AS(cantelli_factor(1.0), std::invalid_argument);

  // p f(p)^2 = 1 - p identically.
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double p = 1e-4 + 0.9998 * rng.uniform01();
    const double f = cantelli_factor(p);
    CHECK(p * f * f == doctest::Approx(1.0 - p).epsilon(1e-12));
  }
}

TEST_CASE("gaussian quantile factor") {
  CHECK(gaussian_factor(0.5) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(gaussian_factor(0.1) == doctest::Approx(quantile_oracle(0.1)).epsilon(1e-4));
  CHECK(std::abs(gaussian_factor(0.1) - 1.2816) < 1e-4);
  CHECK(std::abs(gaussian_factor(0.025) - 1.9600) < 1e-4);
  // Antisymmetry about one half.
  CHECK(gaussian_factor(0.8) == doctest::Approx(-gaussian_factor(0.2)).epsilon(1e-8));
  // The distribution-free factor always dominates on p <= 1/2.
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const double p = 1e-3 + 0.499 * rng.uniform01();
    CHECK(gaussian_factor(p) <= cantelli_factor(p));
  }
}

TEST_CASE("tightened bound") {
  SUBCASE("zero covariance keeps the bound") {
    CHECK(tightened_bound(scalar_constraint(5.0, 0.1), Matrix::Zero(1, 1),
                          FactorKind::cantelli) == doctest::Approx(5.0));
  }
  SUBCASE("unit variance with distribution-free factor") {
    CHECK(tightened_bound(scalar_constraint(5.0, 0.1), Matrix::Identity(1, 1),
                          FactorKind::cantelli) == doctest::Approx(2.0));
  }
  SUBCASE("gaussian variant") {
    CHECK(tightened_bound(scalar_constraint(5.0, 0.1), Matrix::Identity(1, 1),
                          FactorKind::gaussian) == doctest::Approx(5.0 - 1.2816).epsilon(1e-3));
  }
}

TEST_CASE("linearized tightening") {
  SUBCASE("zero covariance halves the bound at alpha = 1") {
    CHECK(linearized_tightened_bound(scalar_constraint(4.0, 0.1), Matrix::Zero(1, 1),
                                     FactorKind::cantelli, 1.0) == doctest::Approx(2.0));
  }
  SUBCASE("direct substitution") {
    CHECK(linearized_tightened_bound(scalar_constraint(5.0, 0.1), Matrix::Identity(1, 1),
                                     FactorKind::cantelli, 1.0) == doctest::Approx(1.6));
  }
  SUBCASE("alpha validation") {
    CHECK_THROWS_AS(linearized_tightened_bound(scalar_constraint(5.0, 0.1),
                                               Matrix::Identity(1, 1), FactorKind::cantelli,
                                               0.0),
                    std::invalid_argument);
  }
  SUBCASE("linearized margin never exceeds the exact margin") {
    Rng rng(17);
    for (int i = 0; i < 10000; ++i) {
      const int n = 1 + static_cast<int>(rng.next_u64() % 3);
      Matrix a(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a(r, c) = rng.normal();
      const Matrix cov = symmetrize(a * a.transpose());
      ChanceConstraint c;
      c.direction = Vector(n);
      for (int r = 0; r < n; ++r) c.direction(r) = rng.normal();
      if (c.direction.isZero(0.0)) continue;
      c.bound = 0.1 + 5.0 * rng.uniform01();
      c.prob = 0.01 + 0.98 * rng.uniform01();
      c.kind = ConstraintKind::state;
      const double alpha = 0.05 + 0.95 * rng.uniform01();
      const FactorKind kind = (rng.next_u64() & 1) ? FactorKind::cantelli : FactorKind::gaussian;
      const double lin = linearized_tightened_bound(c, cov, kind, alpha);
      const double exact = tightened_bound(c, cov, kind);
      CHECK(lin <= exact + 1e-9);
    }
  }
}

TEST_CASE("empirical violation") {
  ChanceConstraint c = scalar_constraint(2.0, 0.1);
  SUBCASE("origin samples never violate a positive bound") {
    std::vector<Vector> samples(10, Vector::Zero(1));
    CHECK(empirical_violation(samples, c) == doctest::Approx(0.0));
  }
  SUBCASE("half the samples beyond the bound") {
    std::vector<Vector> samples{Vector::Constant(1, 3.0), Vector::Constant(1, 1.0)};
    CHECK(empirical_violation(samples, c) == doctest::Approx(0.5));
  }
  SUBCASE("empty input throws") {
    std::vector<Vector> samples;
    CHECK_THROWS_AS(empirical_violation(samples, c), std::invalid_argument);
  }
  SUBCASE("gaussian tail calibration") {
    Rng rng(23);
    std::vector<Vector> samples;
    samples.reserve(100000);
    for (int i = 0; i < 100000; ++i) samples.push_back(Vector::Constant(1, rng.normal()));
    ChanceConstraint cq = scalar_constraint(1.2816, 0.1);
    CHECK(std::abs(empirical_violation(samples, cq) - 0.10) < 0.01);
  }
}

TEST_CASE("tightening is distribution free at equality") {
  // Mean placed exactly on the tightened bound: the violation rate stays
  // below p (plus sampling error) for every supported shape.
  Rng rng(29);
  const double p = 0.1;
  const int draws = 200000;
  for (NoiseDist dist : {NoiseDist::gaussian, NoiseDist::uniform, NoiseDist::triangular}) {
    const double var = 0.7;
    ChanceConstraint c = scalar_constraint(3.0, p);
    const double margin =
        tightened_bound(c, Matrix::Constant(1, 1, var), FactorKind::cantelli);
    NoiseSampler sampler(Matrix::Constant(1, 1, var), dist);
    std::vector<Vector> samples;
    samples.reserve(draws);
    for (int i = 0; i < draws; ++i)
      samples.push_back(Vector::Constant(1, margin + sampler.sample(rng)(0)));
    const double rate = empirical_violation(samples, c);
    const double sigma_mc = std::sqrt(p * (1.0 - p) / draws);
    CHECK(rate <= p + 3.0 * sigma_mc);
  }
}
