#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "misspec/errors.hpp"
#include "misspec/problems.hpp"
#include "misspec/solvers.hpp"
#include "oracles.hpp"

using namespace misspec;
using doctest::Approx;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v1(double a) { return Vec::Constant(1, a); }

Mat random_symmetric(std::mt19937_64& rng, Index n) {
  Mat m(n, n);
  std::normal_distribution<double> N;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) m(i, j) = N(rng);
  }
  return 0.5 * (m + m.transpose());
}

}  // namespace

TEST_SUITE("problems") {
  TEST_CASE("power iteration agrees with a dense eigensolver") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const Index n = 2 + trial % 7;
      const Mat S = random_symmetric(rng, n);
      Eigen::SelfAdjointEigenSolver<Mat> es(S);
      CHECK(largest_eigenvalue(S) == Approx(es.eigenvalues().maxCoeff()).epsilon(1e-8));
      CHECK(smallest_eigenvalue(S) == Approx(es.eigenvalues().minCoeff()).epsilon(1e-8));
      const Mat B = random_symmetric(rng, n) + Mat::Identity(n, n);
      Eigen::JacobiSVD<Mat> svd(B);
      CHECK(spectral_norm(B) == Approx(svd.singularValues()(0)).epsilon(1e-8));
    }
  }

  TEST_CASE("quadratic objective: constants and closed-form solution") {
    const auto obj = make_quadratic_objective(Mat::Identity(2, 2), -Mat::Identity(2, 2), 20.0);
    const auto X = FeasibleSet::box(Vec::Constant(2, -10), Vec::Constant(2, 10));
    const Vec theta = v2(1, 2);
    const Reference ref = reference_solve(obj, X, theta, Vec::Zero(2));
    CHECK((*ref.x_star - theta).norm() <= 1e-12);
    CHECK(*ref.f_star == Approx(-2.5).epsilon(1e-14));

    Mat Q = Mat::Zero(2, 2);
    Q(0, 0) = 20;
    Q(1, 1) = 2;
    const auto o2 = make_quadratic_objective(Q, -Mat::Identity(2, 2));
    CHECK(o2.constants.eta_f == Approx(2.0).epsilon(1e-10));
    CHECK(o2.constants.G_fx == Approx(20.0).epsilon(1e-10));
    CHECK(o2.constants.G_ftheta == Approx(1.0).epsilon(1e-10));
    CHECK(o2.constants.L_theta == Approx(1.0).epsilon(1e-10));

    Mat bad(2, 2);
    bad << 1, 2, 0, 1;
    CHECK_THROWS_AS(make_quadratic_objective(bad, Mat::Identity(2, 2)), std::invalid_argument);
    Mat indefinite = Mat::Identity(2, 2);
    indefinite(1, 1) = -1;
    CHECK_THROWS_AS(make_quadratic_objective(indefinite, Mat::Identity(2, 2)), std::invalid_argument);
  }

  TEST_CASE("quadratic objective: gradients and declared constants are honest") {
    std::mt19937_64 rng(8);
    Mat R = random_symmetric(rng, 4);
    const Mat Q = R * R.transpose() + 0.5 * Mat::Identity(4, 4);
    Mat B(4, 3);
    for (Index i = 0; i < 4; ++i) B.row(i) = oracle::gaussian(rng, 3).transpose();
    const auto obj = make_quadratic_objective(Q, B);
    auto sx = [](std::mt19937_64& r) { return oracle::gaussian(r, 4, 2.0); };
    for (int t = 0; t < 3; ++t) {
      const Vec theta = oracle::gaussian(rng, 3);
      const double excess = oracle::finite_difference_excess([&](const Vec& x) { return obj.eval(x, theta); },
                                                             [&](const Vec& x) { return obj.grad_x(x, theta); }, sx, rng);
      CHECK(excess <= 0.0);
      const double lip = oracle::max_lipschitz_ratio([&](const Vec& x) { return obj.grad_x(x, theta); }, sx, rng);
      CHECK(lip <= obj.constants.G_fx + 1e-8);
    }
    const Vec x = oracle::gaussian(rng, 4);
    const double lip_theta = oracle::max_lipschitz_ratio([&](const Vec& th) { return obj.grad_x(x, th); },
                                                         [](std::mt19937_64& r) { return oracle::gaussian(r, 3); }, rng);
    CHECK(lip_theta <= obj.constants.G_ftheta + 1e-8);
    // Strong convexity lower bound on sampled pairs.
    for (int i = 0; i < 1000; ++i) {
      const Vec a = oracle::gaussian(rng, 4), b = oracle::gaussian(rng, 4);
      const Vec th = oracle::gaussian(rng, 3);
      CHECK((obj.grad_x(a, th) - obj.grad_x(b, th)).dot(a - b) >= obj.constants.eta_f * (a - b).squaredNorm() - 1e-8);
    }
  }

  TEST_CASE("decoupled objective ignores theta") {
    const auto obj = make_quadratic_objective(Mat::Identity(2, 2), Mat::Zero(2, 2));
    CHECK(obj.grad_x(v2(1, 2), v2(5, 5)) == obj.grad_x(v2(1, 2), v2(-3, 0)));
    CHECK(obj.constants.L_ftheta == 0.0);
  }

  TEST_CASE("least-squares learning") {
    // c = theta1 g^2 + theta2 g with samples g = 1 (c = 3) and g = 2 (c = 10).
    const auto lp = make_lsq_learning({{v2(1, 1), 3.0}, {v2(4, 2), 10.0}});
    CHECK((lp.truth - v2(2, 1)).norm() <= 1e-12);
    CHECK(lp.constants.eta_g > 0.0);
    CHECK(lp.grad(lp.truth).norm() <= 1e-8);
    CHECK_THROWS_AS(make_lsq_learning({{v2(1, 1), 3.0}}), std::invalid_argument);

    std::vector<RegressionSample> exact;
    for (int g = 1; g <= 5; ++g) exact.push_back({v2(g * g, g), 0.5 * g * g + 3.0 * g});
    const auto e = make_lsq_learning(exact);
    CHECK((e.truth - v2(0.5, 3)).norm() <= 1e-10);

    // eta_g / G_g are 2 lambda(D^T D) / n and bound the curvature of g.
    Mat D(5, 2);
    for (int g = 1; g <= 5; ++g) D.row(g - 1) << g * g, g;
    Eigen::SelfAdjointEigenSolver<Mat> es(D.transpose() * D);
    CHECK(e.constants.eta_g == Approx(2.0 * es.eigenvalues()(0) / 5.0).epsilon(1e-8));
    CHECK(e.constants.G_g == Approx(2.0 * es.eigenvalues()(1) / 5.0).epsilon(1e-8));
    std::mt19937_64 rng(4);
    const double excess = oracle::finite_difference_excess(e.eval, e.grad,
                                                           [](std::mt19937_64& r) { return oracle::gaussian(r, 2); }, rng);
    CHECK(excess <= 0.0);
    for (int i = 0; i < 200; ++i) {
      const Vec th = oracle::gaussian(rng, 2, 3.0);
      const double d = (th - e.truth).norm();
      CHECK(e.eval(th) - e.eval(e.truth) >= 0.5 * e.constants.eta_g * d * d - 1e-9);
    }
  }

  TEST_CASE("block least squares concatenates per-block solutions") {
    std::mt19937_64 rng(1);
    std::vector<LsqBlock> blocks;
    Vec joint(4);
    for (int b = 0; b < 2; ++b) {
      Mat D(6, 2);
      for (Index i = 0; i < 6; ++i) D.row(i) = oracle::gaussian(rng, 2).transpose();
      const Vec y = oracle::gaussian(rng, 6);
      blocks.push_back({D, y});
      joint.segment(2 * b, 2) = make_lsq_learning(D, y).truth;
    }
    const auto lp = make_block_lsq_learning(blocks);
    CHECK((lp.truth - joint).norm() <= 1e-12);
    CHECK(lp.grad(lp.truth).norm() <= 1e-10);
  }

  TEST_CASE("weak-sharp learning") {
    const auto absval = make_sharp_learning({{v1(1), 0.0}, {v1(-1), 0.0}}, v1(0));
    CHECK(absval.constants.sharpness_alpha == Approx(1.0).epsilon(1e-12));
    CHECK(absval.constants.eta_g == 0.0);

    const auto kink = make_sharp_learning({{v1(1), -1.0}, {v1(-1), 1.0}, {v1(0.5), -0.5}}, v1(1));
    CHECK(kink.constants.sharpness_alpha >= 0.5);
    // Lowest-index active piece at the kink.
    CHECK(kink.grad(v1(1))(0) == 1.0);

    CHECK_THROWS_AS(make_sharp_learning({{v1(0), 2.0}, {v1(0), 1.0}}, v1(0)), std::invalid_argument);

    // Sampled growth condition.
    const auto X = FeasibleSet::box(Vec::Zero(2), Vec::Constant(2, 5));
    const auto plane = make_sharp_learning({{v2(1, 1), 0.0}}, Vec::Zero(2), X);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(0.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
      const Vec th = v2(U(rng), U(rng));
      CHECK(plane.eval(th) - plane.eval(plane.truth) >= plane.constants.sharpness_alpha * plane.dist(th) - 1e-12);
    }
  }

  TEST_CASE("skew map") {
    Mat J(2, 2);
    J << 0, 1, -1, 0;
    const auto map = make_skew_map(J, Mat::Zero(2, 2));
    std::mt19937_64 rng(6);
    for (int i = 0; i < 1000; ++i) {
      const Vec a = oracle::gaussian(rng, 2), b = oracle::gaussian(rng, 2);
      CHECK(std::abs((map.eval(a, Vec::Zero(2)) - map.eval(b, Vec::Zero(2))).dot(a - b)) <= 1e-12);
    }
    CHECK(map.constants.L_Fx == Approx(1.0).epsilon(1e-10));
    // J x = 0 only at x = 0.
    CHECK(map.eval(Vec::Zero(2), Vec::Zero(2)).norm() == 0.0);
    CHECK(J.fullPivLu().rank() == 2);

    Mat notskew = J;
    notskew(0, 0) = 1.0;
    CHECK_THROWS_AS(make_skew_map(notskew, Mat::Zero(2, 2)), std::invalid_argument);
    Mat neg = -Mat::Identity(2, 2);
    CHECK_THROWS_AS(make_affine_map(neg, Mat::Zero(2, 1), Vec::Zero(2)), std::invalid_argument);
  }

  TEST_CASE("constant map on a box: solutions are the LP-optimal vertices") {
    const auto map = make_skew_map(Mat::Zero(2, 2), Mat::Identity(2, 2));
    const auto X = FeasibleSet::box(Vec::Constant(2, -1), Vec::Constant(2, 1));
    const Vec theta = v2(0.5, -2.0);
    // F = theta; a vertex solves the VI iff theta^T (y - x) >= 0 for every vertex y.
    int solutions = 0;
    for (double a : {-1.0, 1.0}) {
      for (double b : {-1.0, 1.0}) {
        const Vec x = v2(a, b);
        bool solves = true;
        for (double c : {-1.0, 1.0}) {
          for (double d : {-1.0, 1.0}) solves = solves && theta.dot(v2(c, d) - x) >= 0.0;
        }
        const double gap = *vi_gap(map, X, theta, x);
        CHECK((gap <= 1e-14) == solves);
        solutions += solves;
      }
    }
    CHECK(solutions == 1);
  }

  TEST_CASE("affine maps: monotone and Lipschitz constants are honest") {
    std::mt19937_64 rng(12);
    Mat S = random_symmetric(rng, 3);
    Mat K(3, 3);
    for (Index i = 0; i < 3; ++i) K.row(i) = oracle::gaussian(rng, 3).transpose();
    const Mat M = S * S.transpose() + (K - K.transpose());
    const Mat B = random_symmetric(rng, 3);
    const auto map = make_affine_map(M, B, oracle::gaussian(rng, 3));
    auto sample = [](std::mt19937_64& r) { return oracle::gaussian(r, 3, 2.0); };
    const Vec theta = oracle::gaussian(rng, 3);
    CHECK(oracle::min_monotonicity([&](const Vec& x) { return map.eval(x, theta); }, sample, rng) >= -1e-10);
    CHECK(oracle::max_lipschitz_ratio([&](const Vec& x) { return map.eval(x, theta); }, sample, rng) <=
          map.constants.L_Fx + 1e-8);
    const Vec x = oracle::gaussian(rng, 3);
    CHECK(oracle::max_lipschitz_ratio([&](const Vec& th) { return map.eval(x, th); }, sample, rng) <=
          map.constants.L_Ftheta + 1e-8);
  }

  TEST_CASE("quadratic learning and specify") {
    const auto lp = make_quadratic_learning(v2(1, 2), 3.0);
    CHECK(lp.constants.eta_g == 3.0);
    CHECK(lp.grad(v2(1, 2)).norm() == 0.0);
    const auto obj = make_quadratic_objective(Mat::Identity(2, 2), -Mat::Identity(2, 2));
    const auto fixed = specify(obj, v2(1, 2));
    CHECK(fixed.eval(v2(0, 0), v2(9, 9)) == obj.eval(v2(0, 0), v2(1, 2)));
    CHECK(fixed.grad_x(v2(3, 1), v2(9, 9)) == obj.grad_x(v2(3, 1), v2(1, 2)));
  }
}
