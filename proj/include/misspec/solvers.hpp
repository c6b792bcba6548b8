#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "misspec/geometry.hpp"
#include "misspec/problems.hpp"
#include "misspec/schedules.hpp"

namespace misspec {

enum class Averaging {
  none,
  uniform,   // mean of x_1..x_k
  weighted,  // sum_{i<=k} gamma_i x_i / sum_{i<=k} gamma_i, x_0 included
};

enum class Phase { joint, learn, optimize };

struct TraceRecord {
  long k = 0;
  Vec x;
  Vec theta;
  std::optional<Vec> x_avg;
  double gamma_f = 0.0;
  double gamma_g = 0.0;
  std::optional<double> epsilon;
  /// ||grad_x f(x_k, theta_k) - grad_x f(x_k, theta*)|| (F in place of grad for VIs).
  double residual_norm = 0.0;
  double theta_err = 0.0;
  std::optional<double> x_err;
  /// f(x_k, theta*) - f*.
  std::optional<double> f_gap;
  /// |f(x_avg_k, theta_k) - f*|, the quantity the averaging bounds control.
  std::optional<double> avg_gap;
  std::optional<double> vi_gap;
  /// Theoretical bound for this record's error, filled in by the experiment layer.
  std::optional<double> bound;
  Phase phase = Phase::joint;
};

struct SolveTrace {
  std::string scheme;
  long iterations = 0;
  std::vector<TraceRecord> records;

  const TraceRecord& final() const { return records.back(); }
};

/// Solution of the specified problem, used only for metrics.
struct Reference {
  std::optional<Vec> x_star;
  std::optional<double> f_star;
};

struct SolverOptions {
  /// Skip steplength/schedule admissibility checks.
  bool override_checks = false;
  /// Every iteration is recorded up to this many; beyond it every
  /// ceil(K / record_limit)-th iteration (and the last) is kept.
  long record_limit = 10'000;
  /// When false every iteration is recorded.
  bool thin = true;
};

/// A non-finite or exploding iterate. Carries the trace up to the failure.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, SolveTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SolveTrace& partial() const { return partial_; }

 private:
  SolveTrace partial_;
};

/// Joint projected gradient: x and theta updated simultaneously, the x step
/// using the current estimate theta_k.
SolveTrace joint_gradient(const MisspecifiedObjective& obj, const LearningProblem& learn, const FeasibleSet& X,
                          const Vec& x0, const Vec& theta0, const StepSchedule& sched_f,
                          const StepSchedule& sched_g, long K, Averaging averaging = Averaging::none,
                          const Reference& ref = {}, const SolverOptions& opts = {});

/// Joint projected subgradient scheme. x_avg holds the steplength-weighted
/// average by default.
SolveTrace joint_subgradient(const MisspecifiedObjective& obj, const LearningProblem& learn, const FeasibleSet& X,
                             const Vec& x0, const Vec& theta0, const StepSchedule& sched_f,
                             const StepSchedule& sched_g, long K, const Reference& ref = {},
                             const SolverOptions& opts = {}, Averaging averaging = Averaging::weighted);

/// Joint extragradient for VI(X, F(.; theta*)). Both projections of an
/// iteration use the same theta_k.
SolveTrace extragradient(const MisspecifiedMap& map, const LearningProblem& learn, const FeasibleSet& X,
                         const Vec& x0, const Vec& theta0, double tau, double gamma_g, long K,
                         const Reference& ref = {}, const SolverOptions& opts = {});

/// Regularized (iterative Tikhonov) projection scheme; converges to the
/// least-norm solution of VI(X, F(.; theta*)).
SolveTrace tikhonov(const MisspecifiedMap& map, const LearningProblem& learn, const FeasibleSet& X,
                    const Vec& x0, const Vec& theta0, const TikhonovSchedule& sched, double gamma_g, long K,
                    const Reference& ref = {}, const SolverOptions& opts = {});

/// Learn first (learn_steps projected gradient steps on g), then optimize
/// f(., theta_hat) for opt_steps.
SolveTrace sequential_baseline(const MisspecifiedObjective& obj, const LearningProblem& learn, const FeasibleSet& X,
                               const Vec& x0, const Vec& theta0, long learn_steps, long opt_steps,
                               const StepSchedule& sched_f, const StepSchedule& sched_g, const Reference& ref = {},
                               const SolverOptions& opts = {});

struct ReferenceOptions {
  double step_tolerance = 1e-12;
  long max_iterations = 1'000'000;
};

/// High-accuracy solve of min_{x in X} f(x, theta) by projected gradient
/// with step 1/G_fx, stopped when consecutive iterates differ by less than
/// step_tolerance (or by the projection accuracy, whichever is larger).
Reference reference_solve(const MisspecifiedObjective& obj, const FeasibleSet& X, const Vec& theta,
                          const Vec& x_start, const ReferenceOptions& opts = {});

/// Gap of VI(X, F(.; theta)) at x. Nonnegative orthant: the modified gap
/// F(x)^T x. Box: sup_{y in X} F(x)^T (x - y). Empty for polyhedra.
std::optional<double> vi_gap(const MisspecifiedMap& map, const FeasibleSet& X, const Vec& theta, const Vec& x);

}  // namespace misspec
