#include "misspec/geometry.hpp"

#include <cmath>
#include <string>

#include "misspec/errors.hpp"

namespace misspec {

namespace {

void check_dim(Index expected, const Vec& x, const char* where) {
  if (x.size() != expected) {
    throw DimensionMismatch(std::string(where) + ": expected dimension " + std::to_string(expected) +
                            ", got " + std::to_string(x.size()));
  }
}

double box_radius(const Vec& lower, const Vec& upper) {
  return lower.cwiseAbs().cwiseMax(upper.cwiseAbs()).norm();
}

Vec clamp(const Vec& x, const Vec& lower, const Vec& upper) { return x.cwiseMax(lower).cwiseMin(upper); }

}  // namespace

Vec project_halfspace(const Vec& a, double b, const Vec& x) {
  if (a.size() != x.size()) throw DimensionMismatch("project_halfspace: a and x differ in dimension");
  const double nsq = a.squaredNorm();
  if (nsq == 0.0) throw std::invalid_argument("project_halfspace: normal vector is zero");
  const double ax = a.dot(x);
  if (ax >= b) return x;
  return x + ((b - ax) / nsq) * a;
}

FeasibleSet FeasibleSet::box(Vec lower, Vec upper) {
  if (lower.size() != upper.size()) throw DimensionMismatch("box: bound vectors differ in dimension");
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("box: lower > upper in some component");
  FeasibleSet s;
  s.dim_ = lower.size();
  s.diameter_bound_ = box_radius(lower, upper);
  s.kind_ = Box{std::move(lower), std::move(upper)};
  return s;
}

FeasibleSet FeasibleSet::whole_space(Index dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return box(Vec::Constant(dim, -inf), Vec::Constant(dim, inf));
}

FeasibleSet FeasibleSet::nonneg_orthant(Index dim) {
  if (dim < 0) throw std::invalid_argument("nonneg_orthant: negative dimension");
  FeasibleSet s;
  s.dim_ = dim;
  s.kind_ = NonnegOrthant{dim};
  return s;
}

FeasibleSet FeasibleSet::polyhedron(Mat A, Vec b, Vec lower, Vec upper, std::optional<double> diameter_bound,
                                    ProjectionOptions opts) {
  const Index n = lower.size();
  if (upper.size() != n) throw DimensionMismatch("polyhedron: bound vectors differ in dimension");
  if (A.cols() != n || A.rows() != b.size()) throw DimensionMismatch("polyhedron: A, b and bounds are not conformal");
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("polyhedron: lower > upper in some component");

  FeasibleSet s;
  s.dim_ = n;
  s.opts_ = opts;
  s.rows_ = A.sparseView();
  s.rows_.makeCompressed();
  s.row_norms_sq_ = A.rowwise().squaredNorm();
  for (Index i = 0; i < A.rows(); ++i) {
    if (s.row_norms_sq_(i) == 0.0) throw std::invalid_argument("polyhedron: constraint row " + std::to_string(i) + " is zero");
  }
  if (diameter_bound) {
    s.diameter_bound_ = *diameter_bound;
  } else {
    s.diameter_bound_ = box_radius(lower, upper);
  }
  s.kind_ = Polyhedron{std::move(A), std::move(b), std::move(lower), std::move(upper)};

  // Nonemptiness: project a point of the box and check the residual.
  const auto& p = std::get<Polyhedron>(s.kind_);
  Vec probe = clamp(Vec::Zero(n), p.lower, p.upper);
  for (Index i = 0; i < n; ++i) {
    if (std::isfinite(p.lower(i)) && std::isfinite(p.upper(i))) probe(i) = 0.5 * (p.lower(i) + p.upper(i));
  }
  try {
    const Vec y = s.project(probe);
    if (s.residual(y) > 10.0 * opts.tolerance) throw std::invalid_argument("polyhedron: set appears to be empty");
  } catch (const ProjectionError& e) {
    throw std::invalid_argument(std::string("polyhedron: set appears to be empty (") + e.what() + ")");
  }
  return s;
}

FeasibleSet FeasibleSet::with_projection_options(ProjectionOptions opts) const {
  FeasibleSet copy = *this;
  copy.opts_ = opts;
  return copy;
}

double FeasibleSet::projection_tolerance() const {
  return std::holds_alternative<Polyhedron>(kind_) ? opts_.tolerance : 0.0;
}

Vec FeasibleSet::project(const Vec& x) const {
  check_dim(dim_, x, "project");
  return std::visit(
      [&](const auto& k) -> Vec {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Box>) {
          return clamp(x, k.lower, k.upper);
        } else if constexpr (std::is_same_v<K, NonnegOrthant>) {
          return x.cwiseMax(0.0);
        } else {
          return project_polyhedron(k, x);
        }
      },
      kind_);
}

double FeasibleSet::residual(const Vec& x) const {
  check_dim(dim_, x, "residual");
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if (x.size() == 0) return 0.0;
        if constexpr (std::is_same_v<K, Box>) {
          return std::max(0.0, std::max((k.lower - x).maxCoeff(), (x - k.upper).maxCoeff()));
        } else if constexpr (std::is_same_v<K, NonnegOrthant>) {
          return std::max(0.0, -x.minCoeff());
        } else {
          double r = std::max(0.0, std::max((k.lower - x).maxCoeff(), (x - k.upper).maxCoeff()));
          if (k.A.rows() > 0) r = std::max(r, (k.b - rows_ * x).maxCoeff());
          return r;
        }
      },
      kind_);
}

// Dykstra's alternating projections over the halfspace rows and the box.
// A halfspace correction is always a multiple of its normal, so only one
// scalar per row is stored; the box keeps a full correction vector.
Vec FeasibleSet::project_polyhedron(const Polyhedron& p, const Vec& x0) const {
  const Index m = rows_.rows();
  Vec x = x0;
  Vec mult = Vec::Zero(m);  // halfspace corrections, p_i = mult_i * a_i
  Vec box_corr = Vec::Zero(dim_);
  Vec prev = x;
  double residual = std::numeric_limits<double>::infinity();

  for (int cycle = 0; cycle < opts_.max_dykstra_iters; ++cycle) {
    for (Index i = 0; i < m; ++i) {
      double ax = 0.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows_, i); it; ++it) {
        ax += it.value() * x(it.index());
      }
      // u = a^T (x + t a)
      const double t = mult(i);
      const double u = ax + t * row_norms_sq_(i);
      const double t_new = u >= p.b(i) ? 0.0 : -(p.b(i) - u) / row_norms_sq_(i);
      const double shift = t - t_new;
      if (shift != 0.0) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows_, i); it; ++it) {
          x(it.index()) += shift * it.value();
        }
      }
      mult(i) = t_new;
    }
    const Vec y = x + box_corr;
    x = clamp(y, p.lower, p.upper);
    box_corr = y - x;

    const double change = (x - prev).norm();
    residual = m > 0 ? std::max(0.0, (p.b - rows_ * x).maxCoeff()) : 0.0;
    if (change <= opts_.tolerance && residual <= opts_.tolerance) return x;
    prev = x;
  }
  throw ProjectionError("polyhedron projection did not converge within max_dykstra_iters", x, residual);
}

}  // namespace misspec
