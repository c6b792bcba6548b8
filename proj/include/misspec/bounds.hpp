#pragma once

#include <span>

namespace misspec {

struct StronglyConvexParams {
  double gamma_f;
  double eta_f;
  double G_fx;
  double gamma_g;
  double eta_g;
  double G_g;
  double L_theta;
};

/// Envelope on ||x_{k+1} - x*|| for the joint gradient scheme with constant
/// steps when both f(., theta) and g are strongly convex:
///   q_x^{k+1} ||x0 - x*|| + (k+1) gamma_f L_theta q^k ||theta0 - theta*||,
/// q = max(q_x, q_g).
double strongly_convex_bound(long k, const StronglyConvexParams& p, double x0_err, double theta0_err);

/// q_g^k ||theta0 - theta*||, the geometric envelope of the learning iterates.
double learning_bound(long k, double gamma_g, double eta_g, double G_g, double theta0_err);

/// Bound on |f(x_avg_K, theta_K) - f*| for the averaged joint gradient
/// scheme on a merely convex f:
///   a_x / K + ||theta0 - theta*|| (b_theta / K + L_ftheta q_g^K),
/// a_x = ||x0 - x*||^2 / (2 gamma_f), b_theta = C G_ftheta / (1 - q_g).
double averaging_bound(long K, double gamma_f, double x0_err, double theta0_err, double C, double G_ftheta,
                       double L_ftheta, double q_g);

/// Bound on |f(x_avg_K, theta_K) - f*| for the joint subgradient scheme run
/// with the optimal constant step for horizon K:
///   M ||x0 - x*|| / sqrt(K+1) + ||theta0 - theta*|| (L_ftheta q_g^K + c_theta / (K+1)),
/// c_theta = 2 L_ftheta / (1 - q_g).
double subgradient_bound(long K, double M, double x0_err, double theta0_err, double L_ftheta, double q_g);

struct RateFit {
  double rate;       // fitted per-iteration factor exp(slope)
  double intercept;  // log error at k = 0
};

/// Least-squares fit of log(err_k) = intercept + k log(rate) over the
/// positive entries, for comparing observed decay with the envelope.
RateFit fit_linear_rate(std::span<const double> ks, std::span<const double> errors);

}  // namespace misspec
