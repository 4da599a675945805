#include <doctest.h>

#include "smpc/numeric.hpp"
#include "smpc/sampling.hpp"

using namespace smpc;

namespace {
Matrix random_psd(Rng& rng, int n, double scale = 1.0) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return scale * symmetrize(a * a.transpose());
}
}  // namespace

TEST_CASE("symmetrize and psd checks") {
  Matrix m(2, 2);
  m << 1.0, 0.3, 0.1, 2.0;
  const Matrix s = symmetrize(m);
  CHECK(s(0, 1) == doctest::Approx(0.2));
  CHECK(is_psd(s));
  Matrix neg = -Matrix::Identity(2, 2);
  CHECK_FALSE(is_psd(neg));
}

TEST_CASE("dlyap solves the stationary equation") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = 0.4 * rng.normal();
    if (spectral_radius(a) >= 0.99) continue;
    const Matrix q = random_psd(rng, 3);
    const Matrix x = dlyap(a, q);
    const Matrix resid = x - a * x * a.transpose() - q;
    CHECK(resid.cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, x.cwiseAbs().maxCoeff()));
    CHECK(is_psd(x));
  }
}

TEST_CASE("dlyap scalar geometric series") {
  Matrix a(1, 1), q(1, 1);
  a << 0.9;
  q << 0.19;
  CHECK(dlyap(a, q)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rank_svd detects rank deficiency") {
  Matrix m(3, 3);
  m << 1, 2, 3, 2, 4, 6, 0, 0, 1;  // second row is a multiple of the first
  CHECK(rank_svd(m) == 2);
  CHECK(rank_svd(Matrix::Identity(4, 4)) == 4);
}
