#pragma once

#include <functional>
#include <string>
#include <vector>

#include "misspec/geometry.hpp"
#include "misspec/linalg.hpp"

namespace misspec {

/// Declared constants of f(x, theta). Solvers trust these; constructors
/// compute them in closed form where possible.
struct ObjectiveConstants {
  double eta_f = 0.0;       // strong convexity in x (0 if merely convex)
  double G_fx = 0.0;        // Lipschitz constant of grad_x f in x
  double G_ftheta = 0.0;    // Lipschitz constant of grad_x f in theta, uniformly in x
  double L_ftheta = 0.0;    // Lipschitz constant of f in theta, uniformly in x
  double L_theta = 0.0;     // Lipschitz constant of grad_x f(x*, .) in theta
  double M_subgrad = 0.0;   // bound on subgradient norms
};

struct MisspecifiedObjective {
  std::function<double(const Vec& x, const Vec& theta)> eval;
  /// Gradient in x, or a subgradient when !smooth.
  std::function<Vec(const Vec& x, const Vec& theta)> grad_x;
  bool smooth = true;
  ObjectiveConstants constants;
  Index x_dim = 0;
  Index theta_dim = 0;
};

struct LearningConstants {
  double eta_g = 0.0;            // strong convexity (0 for weak-sharp instances)
  double G_g = 0.0;              // Lipschitz constant of grad g
  double sharpness_alpha = 0.0;  // weak-sharpness modulus (0 if not applicable)
};

struct LearningProblem {
  std::function<double(const Vec& theta)> eval;
  std::function<Vec(const Vec& theta)> grad;
  FeasibleSet set = FeasibleSet::whole_space(0);
  LearningConstants constants;
  /// theta* (a representative of the solution set), used for metrics only.
  Vec truth;
  /// dist(theta, Theta*); defaults to ||theta - truth||.
  std::function<double(const Vec& theta)> distance;

  double dist(const Vec& theta) const { return distance ? distance(theta) : (theta - truth).norm(); }
};

struct MapConstants {
  double L_Fx = 0.0;
  double L_Ftheta = 0.0;
};

struct MisspecifiedMap {
  std::function<Vec(const Vec& x, const Vec& theta)> eval;
  MapConstants constants;
  Index x_dim = 0;
  Index theta_dim = 0;
};

/// f(x, theta) = 1/2 x^T Q x + (B theta)^T x.
/// `x_radius` is sup ||x|| over the feasible set and only feeds L_ftheta
/// (= ||B|| x_radius); pass +inf when the set is unbounded.
MisspecifiedObjective make_quadratic_objective(const Mat& Q, const Mat& B,
                                               double x_radius = std::numeric_limits<double>::infinity());

struct RegressionSample {
  Vec features;
  double output;
};

/// g(theta) = (1/normalization) * sum_j (output_j - features_j^T theta)^2.
/// normalization <= 0 means "number of samples".
LearningProblem make_lsq_learning(const std::vector<RegressionSample>& samples, double normalization = 0.0);

/// Same problem from a design matrix and response vector.
LearningProblem make_lsq_learning(const Mat& design, const Vec& response, double normalization = 0.0);

struct LsqBlock {
  Mat design;
  Vec response;
};

/// Block-diagonal least squares: theta is the concatenation of per-block
/// parameters and g(theta) = (1/normalization) sum_b ||response_b - design_b theta_b||^2.
/// The truth is the concatenation of the per-block normal-equation solutions.
LearningProblem make_block_lsq_learning(const std::vector<LsqBlock>& blocks, double normalization = 0.0);

struct LinearPiece {
  Vec slope;
  double intercept;
};

/// g(theta) = max_i (slope_i^T theta + intercept_i) over `set`, minimized at
/// `truth`. The sharpness modulus is estimated by sampling; G_g holds the
/// largest slope norm (the Lipschitz modulus of g), which is what the
/// steplength check uses for these piecewise-linear instances.
LearningProblem make_sharp_learning(const std::vector<LinearPiece>& pieces, const Vec& truth,
                                    FeasibleSet set = FeasibleSet::whole_space(0), unsigned seed = 12345);

/// F(x, theta) = A x + B theta with A skew-symmetric.
MisspecifiedMap make_skew_map(const Mat& A, const Mat& B);

/// F(x, theta) = M x + B theta + c for any monotone M (M + M^T PSD).
MisspecifiedMap make_affine_map(const Mat& M, const Mat& B, const Vec& c);

/// g(theta) = 1/2 ||theta - target||^2 scaled by `weight`: eta_g = G_g = weight.
LearningProblem make_quadratic_learning(const Vec& target, double weight = 1.0,
                                        FeasibleSet set = FeasibleSet::whole_space(0));

/// Fixed-theta view: the objective no longer depends on theta.
MisspecifiedObjective specify(const MisspecifiedObjective& obj, const Vec& theta);

}  // namespace misspec
