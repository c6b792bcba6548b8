#include "misspec/schedules.hpp"

#include <cmath>
#include <string>

#include "misspec/errors.hpp"

namespace misspec {

StepSchedule StepSchedule::constant(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InadmissibleParameter("constant steplength must be positive and finite");
  return StepSchedule(ConstantStep{gamma});
}

StepSchedule StepSchedule::harmonic(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InadmissibleParameter("harmonic scale must be positive and finite");
  return StepSchedule(HarmonicStep{scale});
}

StepSchedule StepSchedule::optimal_subgradient(double R, double M, long K) {
  if (!(R > 0.0) || !(M > 0.0) || K < 1) {
    throw InadmissibleParameter("optimal subgradient steplength needs R > 0, M > 0, K >= 1");
  }
  return StepSchedule(OptimalSubgradientStep{R, M, K});
}

double StepSchedule::step_at(long k) const {
  if (k < 1) throw std::invalid_argument("step_at: k must be >= 1");
  return std::visit(
      [k](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ConstantStep>) {
          return s.gamma;
        } else if constexpr (std::is_same_v<S, HarmonicStep>) {
          return s.scale / static_cast<double>(k);
        } else {
          return s.R / (s.M * std::sqrt(static_cast<double>(s.K) + 1.0));
        }
      },
      kind_);
}

bool StepSchedule::is_constant() const { return !std::holds_alternative<HarmonicStep>(kind_); }

TikhonovSchedule::TikhonovSchedule(double L_Fx, double alpha, double beta) : L_Fx_(L_Fx), alpha_(alpha), beta_(beta) {
  if (!(L_Fx >= 0.0) || !std::isfinite(L_Fx)) throw InadmissibleParameter("tikhonov schedule: L_Fx must be finite and >= 0");
  if (!(0.0 < beta && beta < alpha && alpha < 1.0)) {
    throw InadmissibleParameter("tikhonov schedule: need 0 < beta < alpha < 1 (alpha=" + std::to_string(alpha) +
                                ", beta=" + std::to_string(beta) + ")");
  }
  if (!(alpha + beta < 1.0)) throw InadmissibleParameter("tikhonov schedule: need alpha + beta < 1");
}

TikhonovStep TikhonovSchedule::at(long k) const {
  if (k < 1) throw std::invalid_argument("tikhonov schedule: k must be >= 1");
  const double kp1 = static_cast<double>(k) + 1.0;
  const double lp1 = L_Fx_ + 1.0;
  return {1.0 / (lp1 * lp1 * std::pow(kp1, alpha_)), std::pow(kp1, -beta_)};
}

double contraction_factor(double gamma, double eta, double G) {
  if (!(G > 0.0)) throw InadmissibleParameter("contraction_factor: G must be positive");
  if (!(eta > 0.0)) throw InadmissibleParameter("contraction_factor: eta must be positive");
  if (!(gamma > 0.0)) throw InadmissibleParameter("contraction_factor: gamma must be positive");
  // Eigenvalue estimates of equal extremes can differ in the last bits.
  if (eta > G * (1.0 + 1e-12)) throw InadmissibleParameter("contraction_factor: eta exceeds G");
  if (gamma * G >= 2.0) throw InadmissibleParameter("contraction_factor: gamma >= 2/G, the scheme may diverge");
  const double radicand = 1.0 - gamma * eta * (2.0 - gamma * G);
  return std::sqrt(std::max(0.0, radicand));
}

double extragradient_step_bound(double L_Fx, double L_Ftheta, double theta_gap) {
  if (!(L_Fx >= 0.0) || !(L_Ftheta >= 0.0) || !(theta_gap >= 0.0)) {
    throw InadmissibleParameter("extragradient_step_bound: constants must be nonnegative");
  }
  const double denom = L_Fx * L_Fx + 2.0 * L_Ftheta * theta_gap;
  if (denom == 0.0) throw InadmissibleParameter("extragradient_step_bound: unbounded (L_Fx = 0 and no learning term)");
  return std::sqrt(1.0 / denom);
}

}  // namespace misspec
