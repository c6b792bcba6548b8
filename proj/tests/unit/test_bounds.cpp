#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "misspec/bounds.hpp"
#include "misspec/errors.hpp"
#include "misspec/schedules.hpp"

using namespace misspec;
using doctest::Approx;

TEST_SUITE("bounds") {
  TEST_CASE("strongly convex bound examples") {
    const StronglyConvexParams p{0.04, 20.0, 20.0, 0.003, 1.0, 2.0, 5.0};
    // No learning error: plain linear rate q_x^{k+1}.
    CHECK(strongly_convex_bound(3, p, 2.0, 0.0) == Approx(std::pow(0.2, 4) * 2.0).epsilon(1e-13));
    // q_x = 0; k = 0 leaves only gamma_f L_theta theta0_err.
    const double gg = 0.5;  // with eta_g = G_g = 1, q_g = 1 - gamma_g
    CHECK(contraction_factor(gg, 1.0, 1.0) == Approx(0.5).epsilon(1e-14));
    const StronglyConvexParams p0{1.0, 1.0, 1.0, gg, 1.0, 1.0, 1.0};
    CHECK(strongly_convex_bound(0, p0, 7.0, 3.0) == Approx(3.0).epsilon(1e-14));
    CHECK(strongly_convex_bound(2, p0, 7.0, 3.0) == Approx(3.0 * 1.0 * 0.25 * 3.0).epsilon(1e-14));
  }

  TEST_CASE("strongly convex bound eventually decreases") {
    const StronglyConvexParams p{0.04, 20.0, 20.0, 0.02, 1.0, 2.0, 1.0};
    double prev = strongly_convex_bound(50, p, 1.0, 1.0);
    for (long k = 51; k < 2000; ++k) {
      const double b = strongly_convex_bound(k, p, 1.0, 1.0);
      CHECK(b < prev);
      prev = b;
    }
  }

  TEST_CASE("averaging bound examples") {
    CHECK(averaging_bound(10, 0.5, 1.0, 0.0, 3.0, 1.0, 1.0, 0.5) == Approx(0.1).epsilon(1e-15));
    CHECK(averaging_bound(4, 0.1, 2.0, 1.0, 10.0, 1.0, 1.0, 0.5) == Approx(10.0625).epsilon(1e-15));
    CHECK(averaging_bound(100'000'000, 0.1, 2.0, 1.0, 10.0, 1.0, 1.0, 0.5) < 1e-6);
    CHECK_THROWS_AS(averaging_bound(4, 0.1, 2.0, 1.0, 10.0, 1.0, 1.0, 1.0), InadmissibleParameter);
    CHECK_THROWS_AS(averaging_bound(4, 0.1, 2.0, 1.0, 10.0, 1.0, 1.0, 0.0), InadmissibleParameter);
  }

  TEST_CASE("subgradient bound examples") {
    CHECK(subgradient_bound(3, 1.0, 1.0, 0.0, 1.0, 0.5) == Approx(0.5).epsilon(1e-15));
    CHECK(subgradient_bound(1, 2.0, 1.0, 1.0, 1.0, 0.5) == Approx(2.0 / std::sqrt(2.0) + 2.5).epsilon(1e-15));
    CHECK_THROWS_AS(subgradient_bound(1, 2.0, 1.0, 1.0, 1.0, 1.5), InadmissibleParameter);
    // The learning term becomes negligible next to M R / sqrt(K+1).
    double prev_ratio = std::numeric_limits<double>::infinity();
    for (long K : {10L, 100L, 1000L, 10000L, 100000L}) {
      const double lead = 2.0 / std::sqrt(K + 1.0);
      const double ratio = (subgradient_bound(K, 2.0, 1.0, 1.0, 1.0, 0.5) - lead) / lead;
      CHECK(ratio < prev_ratio);
      prev_ratio = ratio;
    }
    CHECK(prev_ratio < 0.01);
  }

  TEST_CASE("bounds are nondecreasing in the initial errors") {
    const StronglyConvexParams p{0.04, 20.0, 20.0, 0.003, 1.0, 2.0, 5.0};
    for (double e = 0.0; e < 5.0; e += 0.5) {
      CHECK(strongly_convex_bound(10, p, e, 1.0) <= strongly_convex_bound(10, p, e + 0.5, 1.0));
      CHECK(strongly_convex_bound(10, p, 1.0, e) <= strongly_convex_bound(10, p, 1.0, e + 0.5));
      CHECK(averaging_bound(10, 0.1, e, 1.0, 2.0, 1.0, 1.0, 0.9) <= averaging_bound(10, 0.1, e + 0.5, 1.0, 2.0, 1.0, 1.0, 0.9));
      CHECK(averaging_bound(10, 0.1, 1.0, e, 2.0, 1.0, 1.0, 0.9) <= averaging_bound(10, 0.1, 1.0, e + 0.5, 2.0, 1.0, 1.0, 0.9));
      CHECK(subgradient_bound(10, 1.0, e, 1.0, 1.0, 0.9) <= subgradient_bound(10, 1.0, e + 0.5, 1.0, 1.0, 0.9));
      CHECK(subgradient_bound(10, 1.0, 1.0, e, 1.0, 0.9) <= subgradient_bound(10, 1.0, 1.0, e + 0.5, 1.0, 0.9));
    }
  }

  TEST_CASE("learning bound and rate fit") {
    CHECK(learning_bound(0, 0.5, 1.0, 1.0, 2.0) == 2.0);
    CHECK(learning_bound(3, 0.5, 1.0, 1.0, 2.0) == Approx(2.0 * std::pow(std::sqrt(0.25), 3)).epsilon(1e-14));
    std::vector<double> ks, errs;
    for (int k = 0; k < 40; ++k) {
      ks.push_back(k);
      errs.push_back(3.0 * std::pow(0.7, k));
    }
    const RateFit fit = fit_linear_rate(ks, errs);
    CHECK(fit.rate == Approx(0.7).epsilon(1e-12));
    CHECK(fit.intercept == Approx(std::log(3.0)).epsilon(1e-12));
  }
}
