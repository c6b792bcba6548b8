#include "misspec/bounds.hpp"

#include <cmath>
#include <stdexcept>

#include "misspec/errors.hpp"
#include "misspec/schedules.hpp"

namespace misspec {

namespace {

void check_qg(double q_g) {
  if (!(q_g > 0.0 && q_g < 1.0)) throw InadmissibleParameter("bound: q_g must lie in (0, 1)");
}

void check_errors(double x0_err, double theta0_err) {
  if (!(x0_err >= 0.0) || !(theta0_err >= 0.0)) throw std::invalid_argument("bound: initial errors must be >= 0");
}

}  // namespace

double strongly_convex_bound(long k, const StronglyConvexParams& p, double x0_err, double theta0_err) {
  if (k < 0) throw std::invalid_argument("strongly_convex_bound: k must be >= 0");
  check_errors(x0_err, theta0_err);
  const double q_x = contraction_factor(p.gamma_f, p.eta_f, p.G_fx);
  const double q_g = contraction_factor(p.gamma_g, p.eta_g, p.G_g);
  const double q = std::max(q_x, q_g);
  const double kd = static_cast<double>(k);
  double degradation = 0.0;
  if (theta0_err > 0.0 && p.L_theta > 0.0) degradation = (kd + 1.0) * p.gamma_f * p.L_theta * std::pow(q, kd) * theta0_err;
  return std::pow(q_x, kd + 1.0) * x0_err + degradation;
}

double learning_bound(long k, double gamma_g, double eta_g, double G_g, double theta0_err) {
  if (k < 0) throw std::invalid_argument("learning_bound: k must be >= 0");
  return std::pow(contraction_factor(gamma_g, eta_g, G_g), static_cast<double>(k)) * theta0_err;
}

double averaging_bound(long K, double gamma_f, double x0_err, double theta0_err, double C, double G_ftheta,
                       double L_ftheta, double q_g) {
  if (K < 1) throw std::invalid_argument("averaging_bound: K must be >= 1");
  if (!(gamma_f > 0.0)) throw InadmissibleParameter("averaging_bound: gamma_f must be positive");
  check_qg(q_g);
  check_errors(x0_err, theta0_err);
  const double Kd = static_cast<double>(K);
  const double a_x = x0_err * x0_err / (2.0 * gamma_f);
  double learning = 0.0;
  if (theta0_err > 0.0) {
    const double b_theta = C * G_ftheta / (1.0 - q_g);
    learning = theta0_err * (b_theta / Kd + L_ftheta * std::pow(q_g, Kd));
  }
  return a_x / Kd + learning;
}

double subgradient_bound(long K, double M, double x0_err, double theta0_err, double L_ftheta, double q_g) {
  if (K < 1) throw std::invalid_argument("subgradient_bound: K must be >= 1");
  check_qg(q_g);
  check_errors(x0_err, theta0_err);
  const double Kd = static_cast<double>(K);
  double learning = 0.0;
  if (theta0_err > 0.0) {
    const double c_theta = 2.0 * L_ftheta / (1.0 - q_g);
    learning = theta0_err * (L_ftheta * std::pow(q_g, Kd) + c_theta / (Kd + 1.0));
  }
  return M * x0_err / std::sqrt(Kd + 1.0) + learning;
}

RateFit fit_linear_rate(std::span<const double> ks, std::span<const double> errors) {
  if (ks.size() != errors.size()) throw std::invalid_argument("fit_linear_rate: length mismatch");
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(errors[i] > 0.0)) continue;
    const double y = std::log(errors[i]);
    n += 1;
    sx += ks[i];
    sy += y;
    sxx += ks[i] * ks[i];
    sxy += ks[i] * y;
  }
  if (n < 2) throw std::invalid_argument("fit_linear_rate: need at least two positive errors");
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_linear_rate: iteration indices are all equal");
  const double slope = (n * sxy - sx * sy) / denom;
  return {std::exp(slope), (sy - slope * sx) / n};
}

}  // namespace misspec
