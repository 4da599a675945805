#include <doctest.h>

#include "smpc/polytope.hpp"
#include "smpc/sampling.hpp"

using namespace smpc;

TEST_CASE("lp support basics") {
  // Unit box in 2-D.
  Matrix g(4, 2);
  g << 1, 0, -1, 0, 0, 1, 0, -1;
  Vector b = Vector::Ones(4);
  SUBCASE("support values") {
    Vector d(2);
    d << 1, 1;
    const LpResult r = lp_maximize(d, g, b);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.value == doctest::Approx(2.0));
  }
  SUBCASE("unbounded direction") {
    Matrix half(1, 2);
    half << 1, 0;
    Vector rhs = Vector::Ones(1);
    Vector d(2);
    d << -1, 0;
    CHECK(lp_maximize(d, half, rhs).status == LpStatus::unbounded);
    d << 1, 0;
    const LpResult r = lp_maximize(d, half, rhs);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.value == doctest::Approx(1.0));
  }
  SUBCASE("infeasible system") {
    Matrix a(2, 1);
    a << 1, -1;
    Vector rhs(2);
    rhs << 1, -2;  // x <= 1 and x >= 2
    Vector d = Vector::Ones(1);
    CHECK(lp_maximize(d, a, rhs).status == LpStatus::infeasible);
  }
  SUBCASE("negative right-hand side needs phase one") {
    // x >= 1 (as -x <= -1), x <= 3.
    Matrix a(2, 1);
    a << -1, 1;
    Vector rhs(2);
    rhs << -1, 3;
    Vector d = Vector::Ones(1);
    const LpResult r = lp_maximize(d, a, rhs);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.value == doctest::Approx(3.0));
    const LpResult rmin = lp_maximize(-d, a, rhs);
    REQUIRE(rmin.status == LpStatus::optimal);
    CHECK(rmin.value == doctest::Approx(-1.0));
  }
}

TEST_CASE("redundancy reduction") {
  Matrix g(3, 1);
  g << 1, 1, -1;
  Vector b(3);
  b << 2, 5, 1;  // x <= 2, x <= 5 (redundant), -x <= 1
  const Polytope p{g, b};
  const Polytope r = reduce(p);
  CHECK(r.rows() == 2);
  CHECK(r.contains(Vector::Constant(1, 2.0)));
  CHECK_FALSE(r.contains(Vector::Constant(1, 2.1)));
}

TEST_CASE("chebyshev radius") {
  SUBCASE("unit box") {
    Matrix g(4, 2);
    g << 1, 0, -1, 0, 0, 1, 0, -1;
    CHECK(chebyshev_radius(Polytope{g, Vector::Ones(4)}) == doctest::Approx(1.0));
  }
  SUBCASE("asymmetric interval") {
    Matrix g(2, 1);
    g << 1, -1;
    Vector b(2);
    b << 2, 1;
    CHECK(chebyshev_radius(Polytope{g, b}) == doctest::Approx(1.0));
  }
  SUBCASE("lower bound against sampled directions") {
    Rng rng(31);
    Matrix g(6, 2);
    Vector b(6);
    for (int i = 0; i < 6; ++i) {
      const double th = 2.0 * M_PI * rng.uniform01();
      g(i, 0) = std::cos(th);
      g(i, 1) = std::sin(th);
      b(i) = 0.5 + rng.uniform01();
    }
    const Polytope p{g, b};
    const double r = chebyshev_radius(p);
    // Every sampled boundary direction stays feasible at radius r.
    for (int i = 0; i < 10000; ++i) {
      const double th = 2.0 * M_PI * rng.uniform01();
      Vector x(2);
      x << r * std::cos(th), r * std::sin(th);
      CHECK(p.contains(x, 1e-9));
    }
  }
}

TEST_CASE("maximal invariant set") {
  SUBCASE("scalar contraction keeps the box") {
    Matrix a = Matrix::Constant(1, 1, 0.5);
    Matrix g(2, 1);
    g << 1, -1;
    Vector b(2);
    b << 2, 2;
    const Polytope inv = max_invariant_set(a, Polytope{g, b});
    CHECK(inv.contains(Vector::Constant(1, 2.0)));
    CHECK_FALSE(inv.contains(Vector::Constant(1, 2.01)));
  }

  SUBCASE("one-sided scalar constraint yields a half line") {
    Matrix a = Matrix::Constant(1, 1, 0.5);
    Matrix g(1, 1);
    g << 1;
    const Polytope inv = max_invariant_set(a, Polytope{g, Vector::Constant(1, 2.0)});
    CHECK(inv.contains(Vector::Constant(1, -1e6)));
    CHECK(inv.contains(Vector::Constant(1, 2.0)));
    CHECK_FALSE(inv.contains(Vector::Constant(1, 2.01)));
  }

  SUBCASE("membership agrees with a forward-simulation oracle") {
    // Rotation-contraction in 2-D with a box plus a skewed input-style row.
    Matrix a(2, 2);
    a << 0.6, 0.4, -0.3, 0.7;
    Matrix g(5, 2);
    g << 1, 0, -1, 0, 0, 1, 0, -1, 0.5, -0.8;
    Vector b(5);
    b << 2, 2, 1.5, 1.5, 1.0;
    const Polytope base{g, b};
    const Polytope inv = max_invariant_set(a, base);
    Rng rng(37);
    for (int trial = 0; trial < 1000; ++trial) {
      Vector x(2);
      x << -2.5 + 5.0 * rng.uniform01(), -2.0 + 4.0 * rng.uniform01();
      bool stays = true;
      Vector z = x;
      for (int k = 0; k < 100 && stays; ++k) {
        if (!base.contains(z, 1e-10)) stays = false;
        z = a * z;
      }
      if (stays != inv.contains(x, 1e-8)) {
        // Points within LP tolerance of the boundary may flip; allow a tiny band.
        const double slack = (base.G * x - base.g).maxCoeff();
        CHECK(std::abs(slack) < 1e-6);
      }
    }

    SUBCASE("vertex invariance") {
      for (const auto& v : vertices(inv)) {
        CHECK(inv.contains(a * v, 1e-8));
      }
    }
  }

  SUBCASE("empty margins are rejected") {
    Matrix a = Matrix::Constant(1, 1, 0.5);
    Matrix g(1, 1);
    g << 1;
    CHECK_THROWS(max_invariant_set(a, Polytope{g, Vector::Constant(1, -0.5)}));
  }
}
