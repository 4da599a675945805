#include <doctest.h>

#include "smpc/sampling.hpp"
#include "smpc/sdp.hpp"

using namespace smpc;

TEST_CASE("psd projection") {
  SUBCASE("psd input unchanged") {
    Matrix m(2, 2);
    m << 2, 0.5, 0.5, 1;
    CHECK((psd_project(m) - m).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("clips the negative eigenvalue") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1;
    m(1, 1) = -1;
    const Matrix p = psd_project(m);
    CHECK(p(0, 0) == doctest::Approx(1.0));
    CHECK(p(1, 1) == doctest::Approx(0.0));
  }
  SUBCASE("idempotent") {
    Rng rng(43);
    for (int t = 0; t < 50; ++t) {
      Matrix m(3, 3);
      for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = rng.normal();
      m = symmetrize(m);
      const Matrix p1 = psd_project(m);
      const Matrix p2 = psd_project(p1);
      CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("closest among random psd candidates") {
    Rng rng(47);
    Matrix m(3, 3);
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = rng.normal();
    m = symmetrize(m);
    const Matrix p = psd_project(m);
    const double best = (m - p).norm();
    for (int t = 0; t < 1000; ++t) {
      Matrix a(3, 3);
      for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.normal();
      const Matrix cand = symmetrize(a * a.transpose());
      CHECK((m - cand).norm() >= best - 1e-9);
    }
  }
}

namespace {

// min z s.t. z I - I >= 0  (one scalar variable)
SdpProblem min_z_geq_one() {
  SdpProblem p;
  p.num_vars = 1;
  p.c = Vector::Ones(1);
  SdpBlock b;
  b.size = 2;
  b.F0 = -Matrix::Identity(2, 2);
  b.terms = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
  p.blocks.push_back(b);
  p.A_eq.resize(0, 1);
  p.b_eq.resize(0);
  return p;
}

}  // namespace

TEST_CASE("sdp trivial instances") {
  SUBCASE("identity shift") {
    const SdpResult r = sdp_solve(min_z_geq_one());
    REQUIRE(r.status.state == SolveState::optimal);
    CHECK(r.z(0) == doctest::Approx(1.0).epsilon(1e-4));
  }

  SUBCASE("scalar bound") {
    SdpProblem p;
    p.num_vars = 1;
    p.c = Vector::Ones(1);
    SdpBlock b;
    b.size = 1;
    b.F0 = Matrix::Constant(1, 1, -3.0);
    b.terms = {{0, 0, 0, 1.0}};
    p.blocks.push_back(b);
    p.A_eq.resize(0, 1);
    p.b_eq.resize(0);
    const SdpResult r = sdp_solve(p);
    REQUIRE(r.status.state == SolveState::optimal);
    CHECK(r.z(0) == doctest::Approx(3.0).epsilon(1e-4));
  }

  SUBCASE("off-diagonal coupling") {
    // min z s.t. [[z, 1], [1, z]] >= 0  ->  z* = 1.
    SdpProblem p;
    p.num_vars = 1;
    p.c = Vector::Ones(1);
    SdpBlock b;
    b.size = 2;
    b.F0 = Matrix::Zero(2, 2);
    b.F0(0, 1) = 1.0;
    b.F0(1, 0) = 1.0;
    b.terms = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
    p.blocks.push_back(b);
    p.A_eq.resize(0, 1);
    p.b_eq.resize(0);
    const SdpResult r = sdp_solve(p);
    REQUIRE(r.status.state == SolveState::optimal);
    CHECK(r.z(0) == doctest::Approx(1.0).epsilon(1e-4));
    // Eigenvalue oracle: the block at the solution is PSD within tolerance.
    Matrix m(2, 2);
    m << r.z(0), 1.0, 1.0, r.z(0);
    CHECK(min_eigenvalue(m) >= -1e-6 * std::max(1.0, m.trace()));
  }

  SUBCASE("equality constraints") {
    // min z1 + z2 s.t. z1 + z2 = 2 (two 1x1 PSD blocks keep z >= 0).
    SdpProblem p;
    p.num_vars = 2;
    p.c = Vector::Ones(2);
    for (int i = 0; i < 2; ++i) {
      SdpBlock b;
      b.size = 1;
      b.F0 = Matrix::Zero(1, 1);
      b.terms = {{i, 0, 0, 1.0}};
      p.blocks.push_back(b);
    }
    p.A_eq = Matrix::Ones(1, 2);
    p.b_eq = Vector::Constant(1, 2.0);
    const SdpResult r = sdp_solve(p);
    REQUIRE(r.status.state == SolveState::optimal);
    CHECK(r.z(0) + r.z(1) == doctest::Approx(2.0).epsilon(1e-6));
  }

  SUBCASE("infeasible block is detected") {
    // z >= 1 and z <= -1 simultaneously.
    SdpProblem p;
    p.num_vars = 1;
    p.c = Vector::Zero(1);
    SdpBlock b1;
    b1.size = 1;
    b1.F0 = Matrix::Constant(1, 1, -1.0);
    b1.terms = {{0, 0, 0, 1.0}};
    SdpBlock b2;
    b2.size = 1;
    b2.F0 = Matrix::Constant(1, 1, -1.0);
    b2.terms = {{0, 0, 0, -1.0}};
    p.blocks.push_back(b1);
    p.blocks.push_back(b2);
    p.A_eq.resize(0, 1);
    p.b_eq.resize(0);
    SdpOptions opts;
    opts.max_iter = 20000;
    const SdpResult r = sdp_solve(p, opts);
    CHECK(r.status.state == SolveState::infeasible);
  }
}

TEST_CASE("sdp objective never undercuts a verified feasible point") {
  // Feasible point z = 2 for the identity-shift problem; optimal value 1.
  const SdpProblem p = min_z_geq_one();
  const SdpResult r = sdp_solve(p);
  REQUIRE(r.status.state == SolveState::optimal);
  CHECK(r.status.objective <= 2.0 + 1e-6);
  CHECK(r.status.objective >= 1.0 - 1e-4);
}

TEST_CASE("sdp warm start reuses the kernel") {
  SdpProblem p = min_z_geq_one();
  SdpKernel kernel(p, SdpOptions{});
  SdpWarmStart warm;
  const SdpResult cold = kernel.solve(p, &warm);
  REQUIRE(cold.status.state == SolveState::optimal);
  // Perturb the constant block and re-solve warm.
  p.blocks[0].F0 = -1.1 * Matrix::Identity(2, 2);
  const SdpResult hot = kernel.solve(p, &warm);
  REQUIRE(hot.status.state == SolveState::optimal);
  CHECK(hot.z(0) == doctest::Approx(1.1).epsilon(1e-4));
  CHECK(hot.status.iterations <= cold.status.iterations);
}
