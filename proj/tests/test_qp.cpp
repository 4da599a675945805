#include <doctest.h>

#include <vector>

#include "smpc/qp.hpp"
#include "smpc/sampling.hpp"

using namespace smpc;

namespace {

// Exhaustive oracle: solve the equality-constrained problem for every active
// subset of inequality rows and keep the best primal-feasible KKT point.
double enumeration_oracle(const QpProblem& p, bool* feasible) {
  const Eigen::Index d = p.H.rows();
  const Eigen::Index mi = p.A_in.rows();
  const Eigen::Index me = p.A_eq.rows();
  double best = std::numeric_limits<double>::infinity();
  *feasible = false;

  std::vector<int> subset;
  auto try_subset = [&]() {
    const Eigen::Index na = static_cast<Eigen::Index>(subset.size()) + me;
    Matrix kkt(d + na, d + na);
    kkt.setZero();
    kkt.topLeftCorner(d, d) = p.H;
    Vector rhs(d + na);
    rhs.head(d) = -p.g;
    Eigen::Index row = d;
    for (Eigen::Index i = 0; i < me; ++i, ++row) {
      kkt.block(row, 0, 1, d) = p.A_eq.row(i);
      kkt.block(0, row, d, 1) = p.A_eq.row(i).transpose();
      rhs(row) = p.b_eq(i);
    }
    for (int idx : subset) {
      kkt.block(row, 0, 1, d) = p.A_in.row(idx);
      kkt.block(0, row, d, 1) = p.A_in.row(idx).transpose();
      rhs(row) = p.b_in(idx);
      ++row;
    }
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) return;
    const Vector sol = lu.solve(rhs);
    const Vector z = sol.head(d);
    // Primal feasibility of the remaining rows.
    for (Eigen::Index i = 0; i < mi; ++i)
      if (p.A_in.row(i).dot(z) > p.b_in(i) + 1e-8) return;
    for (Eigen::Index i = 0; i < me; ++i)
      if (std::abs(p.A_eq.row(i).dot(z) - p.b_eq(i)) > 1e-8) return;
    *feasible = true;
    best = std::min(best, 0.5 * z.dot(p.H * z) + p.g.dot(z));
  };

  auto recurse = [&](auto&& self, int start) -> void {
    if (static_cast<Eigen::Index>(subset.size()) > d) return;
    try_subset();
    for (int i = start; i < static_cast<int>(mi); ++i) {
      subset.push_back(i);
      self(self, i + 1);
      subset.pop_back();
    }
  };
  recurse(recurse, 0);
  return best;
}

}  // namespace

TEST_CASE("qp basics") {
  SUBCASE("clipped scalar minimum") {
    QpProblem p;
    p.H = Matrix::Constant(1, 1, 2.0);
    p.g = Vector::Constant(1, -2.0);  // (z-1)^2 = z^2 - 2z + 1
    p.A_in = Matrix::Constant(1, 1, 1.0);
    p.b_in = Vector::Zero(1);
    p.A_eq.resize(0, 1);
    p.b_eq.resize(0);
    const QpResult r = qp_solve(p);
    REQUIRE(r.status.state == SolveState::optimal);
    CHECK(r.z(0) == doctest::Approx(0.0));
    CHECK(r.status.objective + 1.0 == doctest::Approx(1.0));  // objective excludes the +1
  }

  SUBCASE("symmetric equality split") {
    QpProblem p;
    p.H = 2.0 * Matrix::Identity(2, 2);
    p.g = Vector::Zero(2);
    p.A_in.resize(0, 2);
    p.b_in.resize(0);
    p.A_eq = Matrix::Ones(1, 2);
    p.b_eq = Vector::Constant(1, 2.0);
    const QpResult r = qp_solve(p);
    REQUIRE(r.status.state == SolveState::optimal);
    CHECK(r.z(0) == doctest::Approx(1.0));
    CHECK(r.z(1) == doctest::Approx(1.0));
  }

  SUBCASE("infeasible box") {
    QpProblem p;
    p.H = Matrix::Identity(1, 1);
    p.g = Vector::Zero(1);
    p.A_in.resize(2, 1);
    p.A_in << 1, -1;
    p.b_in.resize(2);
    p.b_in << 1, -2;  // z <= 1 and z >= 2
    p.A_eq.resize(0, 1);
    p.b_eq.resize(0);
    CHECK(qp_solve(p).status.state == SolveState::infeasible);
  }

  SUBCASE("inconsistent equalities") {
    QpProblem p;
    p.H = Matrix::Identity(2, 2);
    p.g = Vector::Zero(2);
    p.A_in.resize(0, 2);
    p.b_in.resize(0);
    p.A_eq.resize(2, 2);
    p.A_eq << 1, 1, 1, 1;
    p.b_eq.resize(2);
    p.b_eq << 1, 2;
    CHECK(qp_solve(p).status.state == SolveState::infeasible);
  }
}

TEST_CASE("qp matches the enumeration oracle on random instances") {
  Rng rng(41);
  int solved = 0;
  int infeasible_agreed = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 2 + static_cast<int>(rng.next_u64() % 7);  // 2..8
    QpProblem p;
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
    p.H = symmetrize(a * a.transpose()) + 0.5 * static_cast<double>(d) * Matrix::Identity(d, d);
    p.g = Vector(d);
    for (int i = 0; i < d; ++i) p.g(i) = 2.0 * rng.normal();

    const int mi = 4 + static_cast<int>(rng.next_u64() % 9);  // 4..12 rows
    p.A_in.resize(mi, d);
    p.b_in.resize(mi);
    for (int i = 0; i < mi; ++i) {
      for (int j = 0; j < d; ++j) p.A_in(i, j) = rng.normal();
      p.b_in(i) = -0.5 + 2.0 * rng.uniform01();
    }
    // Occasionally one equality row.
    if (rng.next_u64() % 3 == 0) {
      p.A_eq.resize(1, d);
      for (int j = 0; j < d; ++j) p.A_eq(0, j) = rng.normal();
      p.b_eq = Vector::Constant(1, 0.3 * rng.normal());
    } else {
      p.A_eq.resize(0, d);
      p.b_eq.resize(0);
    }

    bool oracle_feasible = false;
    const double oracle = enumeration_oracle(p, &oracle_feasible);
    const QpResult r = qp_solve(p);
    if (!oracle_feasible) {
      CHECK(r.status.state == SolveState::infeasible);
      ++infeasible_agreed;
      continue;
    }
    REQUIRE_MESSAGE(r.status.state == SolveState::optimal, "trial ", trial);
    CHECK(r.status.objective == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(r.status.primal_residual < 1e-8);
    CHECK(r.status.dual_residual < 1e-7 * std::max(1.0, p.g.cwiseAbs().maxCoeff()));
    ++solved;
  }
  CHECK(solved > 300);  // the instance generator must exercise the solver
  CHECK(solved + infeasible_agreed == 500);
}
