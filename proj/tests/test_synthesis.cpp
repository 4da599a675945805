#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "smpc/json_io.hpp"
#include "smpc/sampling.hpp"

using namespace smpc;

TEST_CASE("system doubling") {
  LinearSystem s;
  s.A = Matrix::Identity(2, 2);
  s.B = (Matrix(2, 1) << 0.5, 1).finished();
  s.C = Matrix::Identity(2, 2);
  s.F = Matrix::Identity(2, 2);
  NoiseSpec noise;
  noise.W = Matrix::Identity(2, 2);
  noise.V = 1e-4 * Matrix::Identity(2, 2);
  const DoubledSystem d = double_system(s, noise);
  CHECK(d.A(0, 0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(d.V(0, 0) == doctest::Approx(2e-4));

  LinearSystem di;
  di.A = (Matrix(2, 2) << 1, 1, 0, 1).finished();
  di.B = s.B;
  di.C = s.C;
  di.F = s.F;
  const DoubledSystem dd = double_system(di, noise);
  CHECK(dd.A(0, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(dd.A(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("riccati fixed point") {
  SUBCASE("scalar oracle") {
    // p = a^2 p - a^2 p^2 b^2/(r + b^2 p) + q with a=0.5, b=1, q=r=1.
    const Matrix a = Matrix::Constant(1, 1, 0.5);
    const Matrix b = Matrix::Constant(1, 1, 1.0);
    const Matrix q = Matrix::Identity(1, 1);
    const Matrix r = Matrix::Identity(1, 1);
    const Matrix p = dare_fixed_point(a, b, q, r);
    // Independent fixed-point iteration at tighter tolerance.
    double po = 1.0;
    for (int i = 0; i < 100000; ++i) {
      const double pn = 0.25 * po - 0.25 * po * po / (1.0 + po) + 1.0;
      if (std::abs(pn - po) < 1e-14) break;
      po = pn;
    }
    CHECK(p(0, 0) == doctest::Approx(po).epsilon(1e-10));
    const double k = p(0, 0) * 0.5 / (1.0 + p(0, 0));
    DoubledSystem ds{a, b, Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
    const LqgGains g = lqg_gains(ds, Matrix::Identity(1, 1), q, r, Matrix::Identity(1, 1),
                                 Matrix::Identity(1, 1));
    CHECK(g.K(0, 0) == doctest::Approx(k).epsilon(1e-9));
  }

  SUBCASE("zero state cost needs no input") {
    const Matrix a = Matrix::Constant(1, 1, 0.5);
    const Matrix b = Matrix::Constant(1, 1, 1.0);
    const Matrix p = dare_fixed_point(a, b, Matrix::Zero(1, 1), Matrix::Identity(1, 1));
    CHECK(p(0, 0) == doctest::Approx(0.0));
  }
}

TEST_CASE("benchmark design is internally consistent") {
  const ControllerDesign d = testfix::double_integrator_design();
  const DoubledSystem ds = double_system(d.sys, d.noise);

  SUBCASE("both doubled loops are stable") {
    CHECK(spectral_radius(ds.A - ds.B * d.Kbar) < 1.0);
    CHECK(spectral_radius(ds.A - d.Lbar * ds.C) < 1.0);
    CHECK(spectral_radius(d.sys.A - d.sys.B * d.Kbar) < 1.0);
    CHECK(spectral_radius(d.sys.A - d.Lbar * d.sys.C) < 1.0);
  }

  SUBCASE("terminal weight equalities on the doubled loops") {
    const Matrix a_k = ds.A - ds.B * d.Kbar;
    const Matrix a_l = ds.A - d.Lbar * ds.C;
    const Matrix res_s =
        a_k.transpose() * d.S * a_k - d.S + d.Q + d.Kbar.transpose() * d.R * d.Kbar;
    const Matrix res_sl = a_l.transpose() * d.S_L * a_l - d.S_L + d.Q_L +
                          ds.C.transpose() * d.Lbar.transpose() * d.S * d.Lbar * ds.C;
    const double scale = std::max(1.0, d.S.cwiseAbs().maxCoeff());
    CHECK(max_eigenvalue(res_s) <= 1e-8 * scale);
    CHECK(max_eigenvalue(res_sl) <= 1e-8 * scale);
  }

  SUBCASE("terminal cost inequality holds for the undoubled loop") {
    const AugmentedDynamics dyn = d.constant_gain_dynamics();
    const Matrix resid = d.q_t() - d.s_t() + dyn.Phi.transpose() * d.s_t() * dyn.Phi;
    CHECK(max_eigenvalue(resid) <= 1e-8 * std::max(1.0, d.s_t().cwiseAbs().maxCoeff()));
  }

  SUBCASE("stationary covariance residual") {
    const AugmentedDynamics dyn = d.constant_gain_dynamics();
    Matrix omega_bar = Matrix::Zero(4, 4);
    omega_bar.topLeftCorner(2, 2) = d.Wbar;
    omega_bar.bottomRightCorner(2, 2) = d.Vbar;
    const Matrix resid = d.Sigma_bar - dyn.Phi * d.Sigma_bar * dyn.Phi.transpose() -
                         dyn.Psi * omega_bar * dyn.Psi.transpose();
    CHECK(resid.cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, d.Sigma_bar.cwiseAbs().maxCoeff()));
  }

  SUBCASE("block-diagonal bound is stationary under its own recursion") {
    const Matrix a_l = ds.A - d.Lbar * ds.C;
    const Matrix a_k = ds.A - ds.B * d.Kbar;
    const Matrix vbar_d = 2.0 * d.Vbar;
    const Matrix r11 = a_l * d.SigmaD_bar_11 * a_l.transpose() +
                       d.sys.F * d.Wbar * d.sys.F.transpose() +
                       d.Lbar * vbar_d * d.Lbar.transpose() - d.SigmaD_bar_11;
    const Matrix r22 = a_k * d.SigmaD_bar_22 * a_k.transpose() +
                       d.Lbar * ds.C * d.SigmaD_bar_11 * ds.C.transpose() * d.Lbar.transpose() +
                       d.Lbar * vbar_d * d.Lbar.transpose() - d.SigmaD_bar_22;
    CHECK(r11.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(r22.cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("terminal sets are invariant and admissible at the vertices") {
    const Matrix a_k = d.a_k();
    for (const Polytope* p : {&d.XF, &d.XF_lin}) {
      REQUIRE(p->rows() > 0);
      const auto verts = vertices(*p);
      REQUIRE(verts.size() >= 3);
      CovarianceState sbar{d.Sigma_bar};
      const MarginalCovariances mc = marginal_covariances(sbar, d.Kbar);
      for (const auto& v : verts) {
        CHECK(p->contains(a_k * v, 1e-7));
        if (p == &d.XF) {
          for (const auto& c : d.constraints) {
            const bool is_state = c.kind == ConstraintKind::state;
            const double margin = tightened_bound(c, is_state ? mc.X : mc.U, d.factor);
            const Vector dir = is_state ? c.direction : Vector(-d.Kbar.transpose() * c.direction);
            CHECK(dir.dot(v) <= margin + 1e-7);
          }
        }
      }
    }
  }

  SUBCASE("steady covariance geometric series") {
    AugmentedDynamics dyn;
    dyn.Phi = Matrix::Constant(1, 1, 0.9);
    dyn.Psi = Matrix::Constant(1, 1, 1.0);
    const Matrix sbar = steady_covariance(dyn, Matrix::Constant(1, 1, 0.19));
    CHECK(sbar(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_THROWS(steady_covariance(
        AugmentedDynamics{Matrix::Constant(1, 1, 1.1), Matrix::Constant(1, 1, 1.0)},
        Matrix::Identity(1, 1)));
  }
}

TEST_CASE("certificate") {
  const ControllerDesign d = testfix::double_integrator_design();

  SUBCASE("zero noise certifies with zero band") {
    const Theorem1Certificate c = certificate(d, Matrix::Zero(4, 4), 0.99, false);
    CHECK(c.holds);
    CHECK(c.band_radius == doctest::Approx(0.0));
  }

  SUBCASE("band scales linearly with the noise") {
    const Matrix omega = stack_noise_covariance(d.noise);
    const Theorem1Certificate c1 = certificate(d, omega, 0.99, false);
    const Theorem1Certificate c01 = certificate(d, 0.1 * omega, 0.99, false);
    const Theorem1Certificate c001 = certificate(d, 0.01 * omega, 0.99, false);
    CHECK(c01.band_radius == doctest::Approx(0.1 * c1.band_radius).epsilon(1e-9));
    CHECK(c001.band_radius == doctest::Approx(0.01 * c1.band_radius).epsilon(1e-9));
    CHECK(c1.band_radius >= c01.band_radius);
    CHECK(c01.band_radius >= c001.band_radius);
  }

  SUBCASE("alpha and beta definitions") {
    const Theorem1Certificate c = certificate(d, stack_noise_covariance(d.noise), 0.99, false);
    CHECK(c.alpha ==
          doctest::Approx(std::min(min_eigenvalue(d.Q),
                                   1.0 / (d.Q.inverse() + d.Q_L.inverse()).trace())));
    CHECK(c.beta == doctest::Approx(std::max(max_eigenvalue(d.S), d.s_t().trace())));
    CHECK(c.beta >= c.alpha);
  }

  SUBCASE("benchmark outcome is frozen as a regression value") {
    // Computed once from the synthesized design at rho = 0.99.
    CHECK(d.cert.holds == false);
  }
}

TEST_CASE("design bundle json round trip") {
  const ControllerDesign d = testfix::double_integrator_design();
  const Json j = design_to_json(d);
  const ControllerDesign back = design_from_json(j);
  CHECK((back.Kbar - d.Kbar).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.Sigma_bar - d.Sigma_bar).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.XF.G - d.XF.G).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(back.N == d.N);
  CHECK(back.factor == d.factor);
  const Json j2 = design_to_json(back);
  CHECK(j == j2);
}
