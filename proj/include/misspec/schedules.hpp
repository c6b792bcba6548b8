#pragma once

#include <utility>
#include <variant>

namespace misspec {

struct ConstantStep {
  double gamma;
};

/// gamma_k = scale / k.
struct HarmonicStep {
  double scale = 1.0;
};

/// gamma = R / (M sqrt(K + 1)) for a run terminated after K iterations,
/// with R = ||x0 - x*|| and M the subgradient bound.
struct OptimalSubgradientStep {
  double R;
  double M;
  long K;
};

class StepSchedule {
 public:
  using Kind = std::variant<ConstantStep, HarmonicStep, OptimalSubgradientStep>;

  static StepSchedule constant(double gamma);
  static StepSchedule harmonic(double scale = 1.0);
  static StepSchedule optimal_subgradient(double R, double M, long K);

  /// Steplength used by the k-th update, k >= 1.
  double step_at(long k) const;

  /// True when every k gets the same steplength.
  bool is_constant() const;
  const Kind& kind() const { return kind_; }

  friend bool operator==(const StepSchedule& a, const StepSchedule& b);

 private:
  explicit StepSchedule(Kind k) : kind_(k) {}
  Kind kind_;
};

inline bool operator==(const ConstantStep& a, const ConstantStep& b) { return a.gamma == b.gamma; }
inline bool operator==(const HarmonicStep& a, const HarmonicStep& b) { return a.scale == b.scale; }
inline bool operator==(const OptimalSubgradientStep& a, const OptimalSubgradientStep& b) {
  return a.R == b.R && a.M == b.M && a.K == b.K;
}
inline bool operator==(const StepSchedule& a, const StepSchedule& b) { return a.kind_ == b.kind_; }

struct TikhonovStep {
  double gamma;
  double epsilon;
};

/// Paired steplength/regularization sequences for the regularized projection
/// scheme:
///   gamma_k = 1 / ((L + 1)^2 (k + 1)^alpha),   eps_k = (k + 1)^-beta,
/// with 0 < beta < alpha < 1 and alpha + beta < 1.
class TikhonovSchedule {
 public:
  TikhonovSchedule(double L_Fx, double alpha, double beta);

  TikhonovStep at(long k) const;

  double lipschitz() const { return L_Fx_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  double L_Fx_;
  double alpha_;
  double beta_;
};

/// sqrt(1 - gamma * eta * (2 - gamma * G)): the per-step contraction of
/// projected gradient on an eta-strongly convex function with G-Lipschitz
/// gradient. Requires 0 < gamma < 2/G and 0 < eta <= G.
double contraction_factor(double gamma, double eta, double G);

/// sqrt(1 / (L_Fx^2 + 2 L_Ftheta * theta_gap)), the supremum of admissible
/// extragradient steps.
double extragradient_step_bound(double L_Fx, double L_Ftheta, double theta_gap);

/// Default extragradient step when none is configured.
inline constexpr double kExtragradientStepFraction = 0.9;

}  // namespace misspec
