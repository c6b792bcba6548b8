#include "misspec/problems.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <string>

#include "misspec/errors.hpp"

namespace misspec {

namespace {

double sym_scale(const Mat& m) { return m.size() == 0 ? 1.0 : std::max(1.0, m.cwiseAbs().maxCoeff()); }

FeasibleSet resolve_set(FeasibleSet set, Index dim) {
  if (set.dim() == 0 && dim != 0) return FeasibleSet::whole_space(dim);
  if (set.dim() != dim) throw DimensionMismatch("learning set dimension does not match theta");
  return set;
}

}  // namespace

MisspecifiedObjective make_quadratic_objective(const Mat& Q, const Mat& B, double x_radius) {
  if (!is_symmetric(Q)) throw std::invalid_argument("make_quadratic_objective: Q is not symmetric");
  if (B.rows() != Q.rows()) throw DimensionMismatch("make_quadratic_objective: B must have as many rows as Q");
  const double lmin = smallest_eigenvalue(Q);
  const double lmax = largest_eigenvalue(Q);
  if (lmin < -1e-10 * sym_scale(Q)) throw std::invalid_argument("make_quadratic_objective: Q is not positive semidefinite");
  const double bnorm = spectral_norm(B);

  MisspecifiedObjective obj;
  obj.x_dim = Q.rows();
  obj.theta_dim = B.cols();
  obj.smooth = true;
  obj.constants.eta_f = lmin <= 1e-12 * std::max(1.0, lmax) ? 0.0 : lmin;
  obj.constants.G_fx = lmax;
  obj.constants.G_ftheta = bnorm;
  obj.constants.L_theta = bnorm;
  obj.constants.L_ftheta = bnorm == 0.0 ? 0.0 : bnorm * x_radius;
  auto q = std::make_shared<const Mat>(Q);
  auto b = std::make_shared<const Mat>(B);
  obj.eval = [q, b](const Vec& x, const Vec& theta) { return 0.5 * x.dot(*q * x) + (*b * theta).dot(x); };
  obj.grad_x = [q, b](const Vec& x, const Vec& theta) -> Vec { return *q * x + *b * theta; };
  return obj;
}

LearningProblem make_lsq_learning(const Mat& design, const Vec& response, double normalization) {
  if (design.rows() != response.size()) throw DimensionMismatch("make_lsq_learning: design rows != responses");
  if (design.rows() == 0 || design.cols() == 0) throw std::invalid_argument("make_lsq_learning: empty design");
  const double n = normalization > 0.0 ? normalization : static_cast<double>(design.rows());
  const Mat gram = design.transpose() * design;
  const double lmax = largest_eigenvalue(gram);
  const double lmin = smallest_eigenvalue(gram);
  if (design.rows() < design.cols() || !(lmin > 1e-12 * std::max(1.0, lmax))) {
    throw std::invalid_argument("make_lsq_learning: design matrix is rank deficient");
  }
  auto d = std::make_shared<const Mat>(design);
  auto c = std::make_shared<const Vec>(response);
  auto hess = std::make_shared<const Mat>((2.0 / n) * gram);
  auto lin = std::make_shared<const Vec>((2.0 / n) * (design.transpose() * response));

  LearningProblem lp;
  lp.constants.eta_g = 2.0 * lmin / n;
  lp.constants.G_g = 2.0 * lmax / n;
  lp.truth = gram.ldlt().solve(design.transpose() * response);
  lp.set = FeasibleSet::whole_space(design.cols());
  lp.eval = [d, c, n](const Vec& theta) { return (*c - *d * theta).squaredNorm() / n; };
  lp.grad = [hess, lin](const Vec& theta) -> Vec { return *hess * theta - *lin; };
  return lp;
}

LearningProblem make_block_lsq_learning(const std::vector<LsqBlock>& blocks, double normalization) {
  if (blocks.empty()) throw std::invalid_argument("make_block_lsq_learning: no blocks");
  Index dim = 0;
  Index rows = 0;
  for (const auto& b : blocks) {
    if (b.design.rows() != b.response.size()) throw DimensionMismatch("make_block_lsq_learning: design rows != responses");
    dim += b.design.cols();
    rows += b.design.rows();
  }
  const double n = normalization > 0.0 ? normalization : static_cast<double>(rows);

  auto shared = std::make_shared<const std::vector<LsqBlock>>(blocks);
  Mat hess = Mat::Zero(dim, dim);
  Vec lin(dim);
  Vec truth(dim);
  double lmin = std::numeric_limits<double>::infinity();
  double lmax = 0.0;
  Index off = 0;
  for (const auto& b : blocks) {
    const Index p = b.design.cols();
    const Mat gram = b.design.transpose() * b.design;
    const double hi = largest_eigenvalue(gram);
    const double lo = smallest_eigenvalue(gram);
    if (b.design.rows() < p || !(lo > 1e-12 * std::max(1.0, hi))) {
      throw std::invalid_argument("make_block_lsq_learning: a block design matrix is rank deficient");
    }
    lmin = std::min(lmin, lo);
    lmax = std::max(lmax, hi);
    hess.block(off, off, p, p) = (2.0 / n) * gram;
    const Vec rhs = b.design.transpose() * b.response;
    lin.segment(off, p) = (2.0 / n) * rhs;
    truth.segment(off, p) = gram.ldlt().solve(rhs);
    off += p;
  }

  LearningProblem lp;
  lp.constants.eta_g = 2.0 * lmin / n;
  lp.constants.G_g = 2.0 * lmax / n;
  lp.truth = truth;
  lp.set = FeasibleSet::whole_space(dim);
  auto h = std::make_shared<const Mat>(std::move(hess));
  auto l = std::make_shared<const Vec>(std::move(lin));
  lp.eval = [shared, n](const Vec& theta) {
    double total = 0.0;
    Index o = 0;
    for (const auto& b : *shared) {
      total += (b.response - b.design * theta.segment(o, b.design.cols())).squaredNorm();
      o += b.design.cols();
    }
    return total / n;
  };
  lp.grad = [h, l](const Vec& theta) -> Vec { return *h * theta - *l; };
  return lp;
}

LearningProblem make_lsq_learning(const std::vector<RegressionSample>& samples, double normalization) {
  if (samples.empty()) throw std::invalid_argument("make_lsq_learning: no samples");
  const Index p = samples.front().features.size();
  Mat design(static_cast<Index>(samples.size()), p);
  Vec response(static_cast<Index>(samples.size()));
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (samples[j].features.size() != p) throw DimensionMismatch("make_lsq_learning: feature vectors differ in length");
    design.row(static_cast<Index>(j)) = samples[j].features.transpose();
    response(static_cast<Index>(j)) = samples[j].output;
  }
  return make_lsq_learning(design, response, normalization);
}

LearningProblem make_sharp_learning(const std::vector<LinearPiece>& pieces, const Vec& truth, FeasibleSet set,
                                    unsigned seed) {
  if (pieces.empty()) throw std::invalid_argument("make_sharp_learning: no pieces");
  const Index n = truth.size();
  for (const auto& p : pieces) {
    if (p.slope.size() != n) throw DimensionMismatch("make_sharp_learning: slope dimension != truth dimension");
  }
  set = resolve_set(std::move(set), n);
  auto ps = std::make_shared<const std::vector<LinearPiece>>(pieces);

  auto value = [ps](const Vec& theta) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : *ps) best = std::max(best, p.slope.dot(theta) + p.intercept);
    return best;
  };
  auto subgrad = [ps](const Vec& theta) -> Vec {
    std::size_t arg = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ps->size(); ++i) {
      const double v = (*ps)[i].slope.dot(theta) + (*ps)[i].intercept;
      if (v > best) {  // strict: lowest-index piece wins ties
        best = v;
        arg = i;
      }
    }
    return (*ps)[arg].slope;
  };

  // Sharpness modulus: smallest observed (g(theta) - g*) / ||theta - truth||
  // along random rays at several radii. Along a ray the ratio of a convex
  // function is nondecreasing, so small radii dominate.
  const double gstar = value(truth);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double alpha = std::numeric_limits<double>::infinity();
  auto probe = [&](const Vec& dir) {
    for (double r : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
      const Vec theta = set.project(truth + r * dir);
      const double dist = (theta - truth).norm();
      if (dist < 1e-12) continue;
      alpha = std::min(alpha, (value(theta) - gstar) / dist);
    }
  };
  for (Index i = 0; i < n; ++i) {
    probe(Vec::Unit(n, i));
    probe(-Vec::Unit(n, i));
  }
  for (int s = 0; s < 2000; ++s) {
    Vec dir(n);
    for (Index i = 0; i < n; ++i) dir(i) = normal(rng);
    if (dir.norm() == 0.0) continue;
    probe(dir.normalized());
  }
  if (!(alpha > 1e-6)) {
    throw std::invalid_argument("make_sharp_learning: sampled sharpness modulus " + std::to_string(alpha) +
                                " is not positive; truth is not a sharp minimizer");
  }

  double gmax = 0.0;
  for (const auto& p : pieces) gmax = std::max(gmax, p.slope.norm());

  LearningProblem lp;
  lp.eval = value;
  lp.grad = subgrad;
  lp.set = std::move(set);
  lp.truth = truth;
  lp.constants.eta_g = 0.0;
  lp.constants.G_g = gmax > 0.0 ? gmax : 1.0;
  lp.constants.sharpness_alpha = alpha;
  return lp;
}

MisspecifiedMap make_skew_map(const Mat& A, const Mat& B) {
  if (A.rows() != A.cols()) throw DimensionMismatch("make_skew_map: A is not square");
  if ((A + A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * sym_scale(A)) {
    throw std::invalid_argument("make_skew_map: A is not skew-symmetric");
  }
  return make_affine_map(A, B, Vec::Zero(A.rows()));
}

MisspecifiedMap make_affine_map(const Mat& M, const Mat& B, const Vec& c) {
  if (M.rows() != M.cols()) throw DimensionMismatch("make_affine_map: M is not square");
  if (B.rows() != M.rows() || c.size() != M.rows()) throw DimensionMismatch("make_affine_map: B, c not conformal with M");
  const Mat sym = 0.5 * (M + M.transpose());
  if (sym.size() > 0 && smallest_eigenvalue(sym) < -1e-10 * sym_scale(M)) {
    throw std::invalid_argument("make_affine_map: map is not monotone (symmetric part indefinite)");
  }
  MisspecifiedMap map;
  map.x_dim = M.rows();
  map.theta_dim = B.cols();
  map.constants.L_Fx = spectral_norm(M);
  map.constants.L_Ftheta = spectral_norm(B);
  auto m = std::make_shared<const Mat>(M);
  auto b = std::make_shared<const Mat>(B);
  auto off = std::make_shared<const Vec>(c);
  map.eval = [m, b, off](const Vec& x, const Vec& theta) -> Vec { return *m * x + *b * theta + *off; };
  return map;
}

LearningProblem make_quadratic_learning(const Vec& target, double weight, FeasibleSet set) {
  if (!(weight > 0.0)) throw std::invalid_argument("make_quadratic_learning: weight must be positive");
  set = resolve_set(std::move(set), target.size());
  LearningProblem lp;
  lp.constants.eta_g = weight;
  lp.constants.G_g = weight;
  lp.truth = set.project(target);
  lp.set = std::move(set);
  lp.eval = [target, weight](const Vec& theta) { return 0.5 * weight * (theta - target).squaredNorm(); };
  lp.grad = [target, weight](const Vec& theta) -> Vec { return weight * (theta - target); };
  return lp;
}

MisspecifiedObjective specify(const MisspecifiedObjective& obj, const Vec& theta) {
  MisspecifiedObjective fixed = obj;
  fixed.eval = [f = obj.eval, theta](const Vec& x, const Vec&) { return f(x, theta); };
  fixed.grad_x = [g = obj.grad_x, theta](const Vec& x, const Vec&) -> Vec { return g(x, theta); };
  fixed.constants.G_ftheta = 0.0;
  fixed.constants.L_ftheta = 0.0;
  fixed.constants.L_theta = 0.0;
  return fixed;
}

}  // namespace misspec
