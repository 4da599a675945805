#include <doctest.h>

#include "smpc/covariance.hpp"
#include "smpc/sampling.hpp"

using namespace smpc;

namespace {

LinearSystem scalar_system(double a, double b, double c, double f) {
  LinearSystem s;
  s.A = Matrix::Constant(1, 1, a);
  s.B = Matrix::Constant(1, 1, b);
  s.C = Matrix::Constant(1, 1, c);
  s.F = Matrix::Constant(1, 1, f);
  return s;
}

Matrix random_psd(Rng& rng, int n) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return symmetrize(a * a.transpose());
}

}  // namespace

TEST_CASE("augmented dynamics block layout") {
  LinearSystem s = scalar_system(0.9, 1.0, 1.0, 1.0);

  SUBCASE("zero gains decouple the blocks") {
    const AugmentedDynamics d =
        build_augmented(s, Matrix::Zero(1, 1), Matrix::Zero(1, 1));
    Matrix phi(2, 2), psi(2, 2);
    phi << 0.9, 0, 0, 0.9;
    psi << 1, 0, 0, 0;
    CHECK((d.Phi - phi).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK((d.Psi - psi).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("scalar substitution") {
    const AugmentedDynamics d =
        build_augmented(s, Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.4));
    Matrix phi(2, 2), psi(2, 2);
    phi << 0.5, 0, 0.4, 0.4;
    psi << 1, -0.4, 0, 0.4;
    CHECK((d.Phi - phi).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((d.Psi - psi).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(build_augmented(s, Matrix::Zero(2, 1), Matrix::Zero(1, 1)),
                    std::invalid_argument);
  }
}

TEST_CASE("two-state block assembly matches independent construction") {
  LinearSystem s;
  s.A = (Matrix(2, 2) << 1, 1, 0, 1).finished();
  s.B = (Matrix(2, 1) << 0.5, 1).finished();
  s.C = Matrix::Identity(2, 2);
  s.F = Matrix::Identity(2, 2);
  Matrix k(1, 2), l(2, 2);
  k << 0.6, 1.1;
  l << 0.8, 0.1, 0.05, 0.9;
  const AugmentedDynamics d = build_augmented(s, k, l);
  // Assemble the blocks one by one and compare.
  Matrix phi = Matrix::Zero(4, 4);
  phi.block(0, 0, 2, 2) = s.A - l * s.C;
  phi.block(2, 0, 2, 2) = l * s.C;
  phi.block(2, 2, 2, 2) = s.A - s.B * k;
  CHECK((d.Phi - phi).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(d.Phi.block(0, 2, 2, 2).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("covariance propagation") {
  LinearSystem s = scalar_system(0.9, 1.0, 1.0, 1.0);
  NoiseSpec noise;
  noise.W = Matrix::Constant(1, 1, 0.19);
  noise.V = Matrix::Zero(1, 1);

  SUBCASE("zero covariance and noise stay zero") {
    const AugmentedDynamics d =
        build_augmented(s, Matrix::Zero(1, 1), Matrix::Zero(1, 1));
    CovarianceState cs{Matrix::Zero(2, 2)};
    cs = propagate_covariance(cs, d, Matrix::Zero(2, 2));
    CHECK(cs.Sigma.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("zero Phi leaves the noise term") {
    AugmentedDynamics d;
    d.Phi = Matrix::Zero(2, 2);
    d.Psi = Matrix::Identity(2, 2);
    Matrix omega(2, 2);
    omega << 0.3, 0.1, 0.1, 0.2;
    CovarianceState cs{Matrix::Identity(2, 2)};
    cs = propagate_covariance(cs, d, omega);
    CHECK((cs.Sigma - omega).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("scalar chain converges to the stationary variance") {
    // x+ = 0.9 x + w with W = 0.19 settles at W / (1 - a^2) = 1.
    AugmentedDynamics d;
    d.Phi = Matrix::Zero(2, 2);
    d.Phi(0, 0) = 0.9;
    d.Psi = Matrix::Zero(2, 2);
    d.Psi(0, 0) = 1.0;
    Matrix omega = Matrix::Zero(2, 2);
    omega(0, 0) = 0.19;
    CovarianceState cs{Matrix::Zero(2, 2)};
    double prev = -1.0;
    for (int it = 0; it < 500; ++it) {
      cs = propagate_covariance(cs, d, omega);
      if (std::abs(cs.Sigma(0, 0) - prev) < 1e-10) break;
      prev = cs.Sigma(0, 0);
    }
    CHECK(cs.Sigma(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  }

  SUBCASE("propagation preserves symmetry and psd on random inputs") {
    Rng rng(11);
    const AugmentedDynamics d =
        build_augmented(s, Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.4));
    Matrix omega(2, 2);
    omega << 0.19, 0.0, 0.0, 0.01;
    for (int trial = 0; trial < 1000; ++trial) {
      CovarianceState cs{random_psd(rng, 2)};
      const CovarianceState next = propagate_covariance(cs, d, omega);
      CHECK((next.Sigma - next.Sigma.transpose()).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
      CHECK(min_eigenvalue(next.Sigma) >= -1e-9 * std::max(1.0, next.Sigma.norm()));
    }
  }
}

TEST_CASE("marginal covariances") {
  SUBCASE("identity stacks to twice the identity") {
    CovarianceState cs{Matrix::Identity(4, 4)};
    const MarginalCovariances mc = marginal_covariances(cs, Matrix::Zero(1, 2));
    CHECK((mc.X - 2.0 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(mc.U.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("scalar block arithmetic") {
    Matrix sigma(2, 2);
    sigma << 2, 1, 1, 3;
    CovarianceState cs{sigma};
    const MarginalCovariances mc = marginal_covariances(cs, Matrix::Constant(1, 1, 2.0));
    CHECK(mc.X(0, 0) == doctest::Approx(7.0));
    CHECK(mc.U(0, 0) == doctest::Approx(12.0));
    // Generic quadratic-form oracle: X = [I I] Sigma [I; I].
    Matrix sel(1, 2);
    sel << 1, 1;
    CHECK(mc.X(0, 0) == doctest::Approx((sel * sigma * sel.transpose())(0, 0)));
  }
}
