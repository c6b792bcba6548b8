#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "misspec/errors.hpp"
#include "misspec/geometry.hpp"

using namespace misspec;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

constexpr double kInf = std::numeric_limits<double>::infinity();

// {x1 + x2 <= 2, x >= 0}
FeasibleSet triangle() {
  Mat A(1, 2);
  A << -1.0, -1.0;
  return FeasibleSet::polyhedron(A, Vec::Constant(1, -2.0), Vec::Zero(2), Vec::Constant(2, kInf), 2.0);
}

// Exact projection onto {A x >= b, lo <= x <= hi} for tiny instances:
// enumerate active sets of the rows and bounds, solve the equality-constrained
// projection, keep the closest feasible candidate.
Vec brute_force_projection(const Mat& A, const Vec& b, const Vec& lo, const Vec& hi, const Vec& x) {
  const Index n = x.size();
  std::vector<std::pair<Vec, double>> cons;  // a^T y = c candidates
  for (Index i = 0; i < A.rows(); ++i) cons.emplace_back(A.row(i).transpose(), b(i));
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(lo(j))) cons.emplace_back(Vec::Unit(n, j), lo(j));
    if (std::isfinite(hi(j))) cons.emplace_back(Vec::Unit(n, j), hi(j));
  }
  const std::size_t m = cons.size();
  Vec best;
  double best_d = kInf;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) act.push_back(i);
    }
    if (static_cast<Index>(act.size()) > n) continue;
    Mat C(static_cast<Index>(act.size()), n);
    Vec d(static_cast<Index>(act.size()));
    for (std::size_t r = 0; r < act.size(); ++r) {
      C.row(static_cast<Index>(r)) = cons[act[r]].first.transpose();
      d(static_cast<Index>(r)) = cons[act[r]].second;
    }
    Vec y = x;
    if (!act.empty()) {
      const Mat CCt = C * C.transpose();
      Eigen::FullPivLU<Mat> lu(CCt);
      if (lu.rank() < CCt.rows()) continue;
      y = x - C.transpose() * lu.solve(C * x - d);
    }
    const bool feasible = (A.rows() == 0 || ((A * y - b).array() >= -1e-9).all()) &&
                          ((y - lo).array() >= -1e-9).all() && ((hi - y).array() >= -1e-9).all();
    if (feasible && (y - x).norm() < best_d) {
      best_d = (y - x).norm();
      best = y;
    }
  }
  return best;
}

struct RandomSet {
  FeasibleSet set;
  Mat A;
  Vec b, lo, hi;
};

RandomSet random_polyhedron(std::mt19937_64& rng, Index n, Index m) {
  std::normal_distribution<double> N;
  Mat A(m, n);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) A(i, j) = N(rng);
  }
  // Feasible by construction: the origin-centred point c satisfies A c >= b.
  Vec c(n);
  for (Index j = 0; j < n; ++j) c(j) = 0.3 * N(rng);
  Vec b = A * c - Vec::Constant(m, 0.5);
  Vec lo = Vec::Constant(n, -2.0);
  Vec hi = Vec::Constant(n, 2.0);
  return {FeasibleSet::polyhedron(A, b, lo, hi), A, b, lo, hi};
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("box projection clamps componentwise") {
    const auto X = FeasibleSet::box(v2(0, 0), v2(2, 2));
    const Vec p = X.project(v2(3, -1));
    CHECK(p(0) == 2.0);
    CHECK(p(1) == 0.0);
  }

  TEST_CASE("orthant projection is the identity on feasible points") {
    const auto X = FeasibleSet::nonneg_orthant(2);
    const Vec x = v2(0.5, 0.7);
    CHECK(X.project(x) == x);
    CHECK(X.project(v2(-1, 3)) == v2(0, 3));
  }

  TEST_CASE("triangle projection matches the closed-form halfspace projection") {
    const Vec p = triangle().project(v2(2, 2));
    const Vec oracle = project_halfspace(v2(-1, -1), -2.0, v2(2, 2));
    CHECK((p - oracle).norm() <= 1e-9);
    CHECK((p - v2(1, 1)).norm() <= 1e-9);
  }

  TEST_CASE("halfspace examples") {
    CHECK(project_halfspace(v2(1, 0), 0.0, v2(-3, 5)) == v2(0, 5));
    CHECK(project_halfspace(v2(1, 1), 2.0, v2(2, 2)) == v2(2, 2));
    const Vec p = project_halfspace(v2(1, 1), 2.0, v2(0, 0));
    CHECK((p - v2(1, 1)).norm() <= 1e-15);
    // Brute-force oracle: the closest point of the boundary line on a fine grid.
    double best = kInf;
    for (int i = -20000; i <= 20000; ++i) {
      const double t = i * 1e-4;
      best = std::min(best, v2(1 + t, 1 - t).norm());
    }
    CHECK(p.norm() <= best + 1e-12);
    CHECK_THROWS_AS(project_halfspace(v2(0, 0), 1.0, v2(1, 1)), std::invalid_argument);
  }

  TEST_CASE("dimension mismatch is an error") {
    CHECK_THROWS_AS(FeasibleSet::box(v2(0, 0), v2(1, 1)).project(Vec::Zero(3)), DimensionMismatch);
    CHECK_THROWS_AS(triangle().project(Vec::Zero(1)), DimensionMismatch);
  }

  TEST_CASE("invalid sets are rejected") {
    CHECK_THROWS(FeasibleSet::box(v2(1, 0), v2(0, 1)));
    Mat A(2, 2);
    A << 1, 0, -1, 0;  // x1 >= 1 and x1 <= -1
    CHECK_THROWS_AS(FeasibleSet::polyhedron(A, v2(1, 1), Vec::Constant(2, -5), Vec::Constant(2, 5)),
                    std::invalid_argument);
  }

  TEST_CASE("Dykstra failure carries the last iterate") {
    Mat A(2, 2);
    A << 1, 2, 2, 1;
    const auto hard = FeasibleSet::polyhedron(A, v2(1, 1), Vec::Constant(2, -3), Vec::Constant(2, 3))
                          .with_projection_options({1e-14, 2});
    try {
      hard.project(v2(-3, -3));
      FAIL("expected ProjectionError");
    } catch (const ProjectionError& e) {
      CHECK(e.last_iterate().size() == 2);
      CHECK(e.residual() >= 0.0);
    }
  }

  TEST_CASE("polyhedron projection agrees with active-set enumeration") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> N;
    for (int trial = 0; trial < 50; ++trial) {
      auto s = random_polyhedron(rng, 3, 3);
      Vec x(3);
      for (Index j = 0; j < 3; ++j) x(j) = 3.0 * N(rng);
      const Vec exact = brute_force_projection(s.A, s.b, s.lo, s.hi, x);
      REQUIRE(exact.size() == 3);
      CHECK((s.set.project(x) - exact).norm() <= 1e-7);
    }
  }

  TEST_CASE("projection properties on random sets") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N;
    std::vector<FeasibleSet> sets = {FeasibleSet::box(Vec::Constant(4, -1), Vec::Constant(4, 2)),
                                     FeasibleSet::nonneg_orthant(4), random_polyhedron(rng, 4, 5).set};
    for (const auto& X : sets) {
      const double tol = X.projection_tolerance();
      // Feasible sample points for the variational inequality check.
      std::vector<Vec> feasible;
      for (int i = 0; i < 20; ++i) {
        Vec y(4);
        for (Index j = 0; j < 4; ++j) y(j) = 2.0 * N(rng);
        feasible.push_back(X.project(y));
      }
      for (int i = 0; i < 1000; ++i) {
        Vec x(4), y(4);
        for (Index j = 0; j < 4; ++j) {
          x(j) = 3.0 * N(rng);
          y(j) = 3.0 * N(rng);
        }
        const Vec px = X.project(x);
        const Vec py = X.project(y);
        // idempotence
        CHECK((X.project(px) - px).norm() <= (tol > 0.0 ? 10.0 * tol : 1e-10));
        // nonexpansive
        CHECK((px - py).norm() <= (x - y).norm() + 2.0 * tol + 1e-12);
        // feasibility
        CHECK(X.residual(px) <= tol + 1e-12);
        // variational characterization
        if (i % 50 == 0) {
          for (const auto& z : feasible) CHECK((x - px).dot(z - px) <= 1e-6);
        }
      }
    }
  }

  TEST_CASE("diameter bound dominates sampled feasible points") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N;
    const auto poly = random_polyhedron(rng, 3, 4).set;
    const auto box = FeasibleSet::box(Vec::Constant(3, -1), Vec::Constant(3, 3));
    for (const FeasibleSet* X : {&poly, &box}) {
      for (int i = 0; i < 500; ++i) {
        Vec y(3);
        for (Index j = 0; j < 3; ++j) y(j) = 10.0 * N(rng);
        CHECK(X->project(y).norm() <= X->diameter_bound() + 1e-9);
      }
    }
    CHECK_FALSE(FeasibleSet::nonneg_orthant(2).bounded());
  }
}
