#include "misspec/solvers.hpp"

#include <cmath>
#include <string>

#include "misspec/errors.hpp"

namespace misspec {

namespace {

class Recorder {
 public:
  Recorder(long K, const SolverOptions& opts) : K_(K), limit_(opts.record_limit), thin_(opts.thin) {
    stride_ = (thin_ && K > limit_ && limit_ > 0) ? (K + limit_ - 1) / limit_ : 1;
  }
  bool should_record(long k) const { return !thin_ || k <= limit_ || k % stride_ == 0 || k == K_; }

 private:
  long K_;
  long limit_;
  bool thin_;
  long stride_ = 1;
};

void check_divergence(const Vec& x, const Vec& theta, const FeasibleSet& X, long k, SolveTrace& trace) {
  const bool finite = x.allFinite() && theta.allFinite();
  const double cap = std::isfinite(X.diameter_bound()) ? 1e12 * (1.0 + X.diameter_bound())
                                                       : std::numeric_limits<double>::infinity();
  if (!finite || x.norm() > cap) {
    throw DivergenceError(trace.scheme + ": iterate diverged at k=" + std::to_string(k), std::move(trace));
  }
}

Vec learn_step(const LearningProblem& learn, const Vec& theta, double gamma) {
  return learn.set.project(theta - gamma * learn.grad(theta));
}

void check_learning_step(const LearningProblem& learn, const StepSchedule& sched_g, const char* scheme) {
  if (!sched_g.is_constant()) return;
  const double gamma = sched_g.step_at(1);
  if (learn.constants.G_g > 0.0 && !(gamma * learn.constants.G_g < 2.0)) {
    throw InadmissibleParameter(std::string(scheme) + ": learning steplength " + std::to_string(gamma) +
                                " violates gamma_g < 2/G_g = " + std::to_string(2.0 / learn.constants.G_g));
  }
}

void check_learning_gamma(const LearningProblem& learn, double gamma_g, const char* scheme) {
  if (!(gamma_g > 0.0)) throw InadmissibleParameter(std::string(scheme) + ": gamma_g must be positive");
  check_learning_step(learn, StepSchedule::constant(gamma_g), scheme);
}

// Diminishing learning steps on a weak-sharp problem are only analyzed with
// gamma_{f,k} = gamma_{g,k}.
void check_weak_sharp_pairing(const LearningProblem& learn, const StepSchedule& sched_f, const StepSchedule& sched_g,
                              const char* scheme) {
  const bool weak_sharp = learn.constants.eta_g == 0.0 && learn.constants.sharpness_alpha > 0.0;
  if (weak_sharp && !sched_g.is_constant() && !(sched_f == sched_g)) {
    throw InadmissibleParameter(std::string(scheme) +
                                ": diminishing learning steps on a weak-sharp problem require identical x and theta schedules");
  }
}

void check_dims(const MisspecifiedObjective& obj, const LearningProblem& learn, const FeasibleSet& X, const Vec& x0,
                const Vec& theta0) {
  if (x0.size() != X.dim() || x0.size() != obj.x_dim) throw DimensionMismatch("x0 does not match the objective/set dimension");
  if (theta0.size() != learn.set.dim() || theta0.size() != obj.theta_dim) {
    throw DimensionMismatch("theta0 does not match the learning problem dimension");
  }
}

void check_dims(const MisspecifiedMap& map, const LearningProblem& learn, const FeasibleSet& X, const Vec& x0,
                const Vec& theta0) {
  if (x0.size() != X.dim() || x0.size() != map.x_dim) throw DimensionMismatch("x0 does not match the map/set dimension");
  if (theta0.size() != learn.set.dim() || theta0.size() != map.theta_dim) {
    throw DimensionMismatch("theta0 does not match the learning problem dimension");
  }
}

TraceRecord objective_record(const MisspecifiedObjective& obj, const LearningProblem& learn, const Reference& ref,
                             long k, const Vec& x, const Vec& theta, const std::optional<Vec>& x_avg, double gamma_f,
                             double gamma_g, Phase phase) {
  TraceRecord r;
  r.k = k;
  r.x = x;
  r.theta = theta;
  r.x_avg = x_avg;
  r.gamma_f = gamma_f;
  r.gamma_g = gamma_g;
  r.phase = phase;
  r.theta_err = learn.dist(theta);
  r.residual_norm = (obj.grad_x(x, theta) - obj.grad_x(x, learn.truth)).norm();
  if (ref.x_star) r.x_err = (x - *ref.x_star).norm();
  if (ref.f_star) {
    r.f_gap = obj.eval(x, learn.truth) - *ref.f_star;
    if (x_avg) r.avg_gap = std::abs(obj.eval(*x_avg, theta) - *ref.f_star);
  }
  return r;
}

TraceRecord map_record(const MisspecifiedMap& map, const LearningProblem& learn, const FeasibleSet& X,
                       const Reference& ref, long k, const Vec& x, const Vec& theta, double gamma_f, double gamma_g,
                       std::optional<double> epsilon) {
  TraceRecord r;
  r.k = k;
  r.x = x;
  r.theta = theta;
  r.gamma_f = gamma_f;
  r.gamma_g = gamma_g;
  r.epsilon = epsilon;
  r.theta_err = learn.dist(theta);
  r.residual_norm = (map.eval(x, theta) - map.eval(x, learn.truth)).norm();
  if (ref.x_star) r.x_err = (x - *ref.x_star).norm();
  r.vi_gap = vi_gap(map, X, learn.truth, x);
  return r;
}

class Averager {
 public:
  Averager(Averaging mode, Index dim) : mode_(mode), sum_(Vec::Zero(dim)) {}

  /// Fold x_k into the average; gamma is the steplength applied at x_k.
  void add(long k, const Vec& x, double gamma) {
    if (mode_ == Averaging::uniform) {
      if (k == 0) return;  // x_0 excluded
      sum_ += x;
      weight_ += 1.0;
    } else if (mode_ == Averaging::weighted) {
      sum_ += gamma * x;
      weight_ += gamma;
    }
  }

  std::optional<Vec> value() const {
    if (mode_ == Averaging::none || weight_ == 0.0) return std::nullopt;
    return Vec(sum_ / weight_);
  }

 private:
  Averaging mode_;
  Vec sum_;
  double weight_ = 0.0;
};

// Shared driver for the two optimization schemes; they differ only in
// whether grad_x is a gradient or a subgradient.
SolveTrace joint_first_order(const char* scheme, const MisspecifiedObjective& obj, const LearningProblem& learn,
                             const FeasibleSet& X, const Vec& x0_in, const Vec& theta0_in, const StepSchedule& sched_f,
                             const StepSchedule& sched_g, long K, Averaging averaging, const Reference& ref,
                             const SolverOptions& opts) {
  if (K < 0) throw std::invalid_argument(std::string(scheme) + ": K must be >= 0");
  check_dims(obj, learn, X, x0_in, theta0_in);
  if (!opts.override_checks) {
    if (obj.smooth && sched_f.is_constant() && obj.constants.G_fx > 0.0) {
      const double gamma = sched_f.step_at(1);
      if (!(gamma * obj.constants.G_fx < 2.0)) {
        throw InadmissibleParameter(std::string(scheme) + ": steplength " + std::to_string(gamma) +
                                    " violates gamma_f < 2/G_fx = " + std::to_string(2.0 / obj.constants.G_fx));
      }
      if (averaging == Averaging::uniform && gamma * obj.constants.G_fx > 1.0) {
        throw InadmissibleParameter(std::string(scheme) + ": averaging requires gamma_f <= 1/G_fx");
      }
    }
    check_learning_step(learn, sched_g, scheme);
    check_weak_sharp_pairing(learn, sched_f, sched_g, scheme);
  }

  SolveTrace trace;
  trace.scheme = scheme;
  trace.iterations = K;
  Recorder rec(K, opts);
  Vec x = X.contains(x0_in, X.projection_tolerance()) ? x0_in : X.project(x0_in);
  Vec theta = learn.set.contains(theta0_in, learn.set.projection_tolerance()) ? theta0_in : learn.set.project(theta0_in);
  Averager avg(averaging, x.size());

  for (long k = 0;; ++k) {
    const double gf = k < K ? sched_f.step_at(k + 1) : 0.0;
    const double gg = k < K ? sched_g.step_at(k + 1) : 0.0;
    avg.add(k, x, averaging == Averaging::weighted && k == K ? sched_f.step_at(k + 1) : gf);
    if (rec.should_record(k)) {
      trace.records.push_back(objective_record(obj, learn, ref, k, x, theta, avg.value(), gf, gg, Phase::joint));
    }
    if (k == K) break;
    Vec x_next = X.project(x - gf * obj.grad_x(x, theta));
    theta = learn_step(learn, theta, gg);
    x = std::move(x_next);
    check_divergence(x, theta, X, k + 1, trace);
  }
  return trace;
}

}  // namespace

SolveTrace joint_gradient(const MisspecifiedObjective& obj, const LearningProblem& learn, const FeasibleSet& X,
                          const Vec& x0, const Vec& theta0, const StepSchedule& sched_f, const StepSchedule& sched_g,
                          long K, Averaging averaging, const Reference& ref, const SolverOptions& opts) {
  return joint_first_order("joint-gradient", obj, learn, X, x0, theta0, sched_f, sched_g, K, averaging, ref, opts);
}

SolveTrace joint_subgradient(const MisspecifiedObjective& obj, const LearningProblem& learn, const FeasibleSet& X,
                             const Vec& x0, const Vec& theta0, const StepSchedule& sched_f, const StepSchedule& sched_g,
                             long K, const Reference& ref, const SolverOptions& opts, Averaging averaging) {
  return joint_first_order("joint-subgradient", obj, learn, X, x0, theta0, sched_f, sched_g, K, averaging, ref, opts);
}

SolveTrace extragradient(const MisspecifiedMap& map, const LearningProblem& learn, const FeasibleSet& X,
                         const Vec& x0_in, const Vec& theta0_in, double tau, double gamma_g, long K,
                         const Reference& ref, const SolverOptions& opts) {
  if (K < 0) throw std::invalid_argument("extragradient: K must be >= 0");
  check_dims(map, learn, X, x0_in, theta0_in);
  Vec x = X.contains(x0_in, X.projection_tolerance()) ? x0_in : X.project(x0_in);
  Vec theta = learn.set.contains(theta0_in, learn.set.projection_tolerance()) ? theta0_in : learn.set.project(theta0_in);
  if (!(tau > 0.0)) throw InadmissibleParameter("extragradient: tau must be positive");
  if (!opts.override_checks) {
    const double bound = extragradient_step_bound(map.constants.L_Fx, map.constants.L_Ftheta, learn.dist(theta));
    if (!(tau < bound)) {
      throw InadmissibleParameter("extragradient: tau " + std::to_string(tau) + " is not below the admissible bound " +
                                  std::to_string(bound));
    }
    check_learning_gamma(learn, gamma_g, "extragradient");
  }

  SolveTrace trace;
  trace.scheme = "extragradient";
  trace.iterations = K;
  Recorder rec(K, opts);
  for (long k = 0;; ++k) {
    if (rec.should_record(k)) {
      trace.records.push_back(map_record(map, learn, X, ref, k, x, theta, tau, gamma_g, std::nullopt));
    }
    if (k == K) break;
    const Vec z = X.project(x - tau * map.eval(x, theta));
    Vec x_next = X.project(x - tau * map.eval(z, theta));
    theta = learn_step(learn, theta, gamma_g);
    x = std::move(x_next);
    check_divergence(x, theta, X, k + 1, trace);
  }
  return trace;
}

SolveTrace tikhonov(const MisspecifiedMap& map, const LearningProblem& learn, const FeasibleSet& X, const Vec& x0_in,
                    const Vec& theta0_in, const TikhonovSchedule& sched, double gamma_g, long K, const Reference& ref,
                    const SolverOptions& opts) {
  if (K < 0) throw std::invalid_argument("tikhonov: K must be >= 0");
  check_dims(map, learn, X, x0_in, theta0_in);
  if (!opts.override_checks) {
    if (sched.lipschitz() < map.constants.L_Fx * (1.0 - 1e-12)) {
      throw InadmissibleParameter("tikhonov: schedule L_Fx " + std::to_string(sched.lipschitz()) +
                                  " is below the map's Lipschitz constant " + std::to_string(map.constants.L_Fx));
    }
    if (!X.bounded()) throw InadmissibleParameter("tikhonov: the feasible set must be compact");
    check_learning_gamma(learn, gamma_g, "tikhonov");
  }

  SolveTrace trace;
  trace.scheme = "tikhonov";
  trace.iterations = K;
  Recorder rec(K, opts);
  Vec x = X.contains(x0_in, X.projection_tolerance()) ? x0_in : X.project(x0_in);
  Vec theta = learn.set.contains(theta0_in, learn.set.projection_tolerance()) ? theta0_in : learn.set.project(theta0_in);
  for (long k = 0;; ++k) {
    const TikhonovStep step = k < K ? sched.at(k + 1) : TikhonovStep{0.0, 0.0};
    if (rec.should_record(k)) {
      std::optional<double> eps;
      if (k < K) eps = step.epsilon;
      trace.records.push_back(map_record(map, learn, X, ref, k, x, theta, step.gamma, gamma_g, eps));
    }
    if (k == K) break;
    Vec x_next = X.project(x - step.gamma * (map.eval(x, theta) + step.epsilon * x));
    theta = learn_step(learn, theta, gamma_g);
    x = std::move(x_next);
    check_divergence(x, theta, X, k + 1, trace);
  }
  return trace;
}

SolveTrace sequential_baseline(const MisspecifiedObjective& obj, const LearningProblem& learn, const FeasibleSet& X,
                               const Vec& x0_in, const Vec& theta0_in, long learn_steps, long opt_steps,
                               const StepSchedule& sched_f, const StepSchedule& sched_g, const Reference& ref,
                               const SolverOptions& opts) {
  if (learn_steps < 0 || opt_steps < 0) throw std::invalid_argument("sequential: step counts must be >= 0");
  check_dims(obj, learn, X, x0_in, theta0_in);
  if (!opts.override_checks) {
    if (obj.smooth && sched_f.is_constant() && obj.constants.G_fx > 0.0 &&
        !(sched_f.step_at(1) * obj.constants.G_fx < 2.0)) {
      throw InadmissibleParameter("sequential: steplength violates gamma_f < 2/G_fx");
    }
    check_learning_step(learn, sched_g, "sequential");
  }

  const long K = learn_steps + opt_steps;
  SolveTrace trace;
  trace.scheme = "sequential";
  trace.iterations = K;
  Recorder rec(K, opts);
  Vec x = X.contains(x0_in, X.projection_tolerance()) ? x0_in : X.project(x0_in);
  Vec theta = learn.set.contains(theta0_in, learn.set.projection_tolerance()) ? theta0_in : learn.set.project(theta0_in);

  for (long k = 0;; ++k) {
    const bool learning = k < learn_steps;
    const double gg = learning ? sched_g.step_at(k + 1) : 0.0;
    const double gf = (!learning && k < K) ? sched_f.step_at(k - learn_steps + 1) : 0.0;
    if (rec.should_record(k)) {
      const Phase phase = learning ? Phase::learn : Phase::optimize;
      trace.records.push_back(objective_record(obj, learn, ref, k, x, theta, std::nullopt, gf, gg, phase));
    }
    if (k == K) break;
    if (learning) {
      theta = learn_step(learn, theta, gg);
    } else {
      x = X.project(x - gf * obj.grad_x(x, theta));
    }
    check_divergence(x, theta, X, k + 1, trace);
  }
  return trace;
}

Reference reference_solve(const MisspecifiedObjective& obj, const FeasibleSet& X, const Vec& theta, const Vec& x_start,
                          const ReferenceOptions& opts) {
  if (!obj.smooth) throw std::invalid_argument("reference_solve: projected gradient reference needs a smooth objective");
  const double gamma = obj.constants.G_fx > 0.0 ? 1.0 / obj.constants.G_fx : 1.0;
  const double stop = std::max(opts.step_tolerance, 10.0 * X.projection_tolerance());
  Vec x = X.project(x_start);
  for (long it = 0; it < opts.max_iterations; ++it) {
    Vec next = X.project(x - gamma * obj.grad_x(x, theta));
    const double change = (next - x).norm();
    x = std::move(next);
    if (change < stop) break;
  }
  return Reference{x, obj.eval(x, theta)};
}

std::optional<double> vi_gap(const MisspecifiedMap& map, const FeasibleSet& X, const Vec& theta, const Vec& x) {
  if (std::holds_alternative<NonnegOrthant>(X.kind())) {
    return map.eval(x, theta).dot(x);
  }
  if (const auto* box = std::get_if<Box>(&X.kind())) {
    const Vec F = map.eval(x, theta);
    double gap = F.dot(x);
    for (Index i = 0; i < F.size(); ++i) {
      if (F(i) > 0.0) {
        gap -= F(i) * box->lower(i);
      } else if (F(i) < 0.0) {
        gap -= F(i) * box->upper(i);
      }
    }
    return gap;
  }
  return std::nullopt;
}

}  // namespace misspec
