#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Sparse>

#include "misspec/linalg.hpp"

namespace misspec {

struct Box {
  Vec lower;
  Vec upper;
};

struct NonnegOrthant {
  Index dim = 0;
};

/// {x : A x >= b, lower <= x <= upper}.
struct Polyhedron {
  Mat A;
  Vec b;
  Vec lower;
  Vec upper;
};

struct ProjectionOptions {
  double tolerance = 1e-9;
  int max_dykstra_iters = 10'000;
};

/// Dykstra did not reach the requested tolerance.
class ProjectionError : public std::runtime_error {
 public:
  ProjectionError(const std::string& what, Vec last_iterate, double residual)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}
  const Vec& last_iterate() const { return last_iterate_; }
  double residual() const { return residual_; }

 private:
  Vec last_iterate_;
  double residual_;
};

/// Closed convex feasible set with a Euclidean projection. Immutable once
/// built; project() keeps its Dykstra workspace on the stack of the call.
class FeasibleSet {
 public:
  using Kind = std::variant<Box, NonnegOrthant, Polyhedron>;

  static FeasibleSet box(Vec lower, Vec upper);
  /// R^n, i.e. a box with infinite bounds.
  static FeasibleSet whole_space(Index dim);
  static FeasibleSet nonneg_orthant(Index dim);
  static FeasibleSet polyhedron(Mat A, Vec b, Vec lower, Vec upper,
                                std::optional<double> diameter_bound = std::nullopt,
                                ProjectionOptions opts = {});

  Vec project(const Vec& x) const;

  /// Largest violation of any constraint at x (0 when feasible).
  double residual(const Vec& x) const;
  bool contains(const Vec& x, double tol) const { return residual(x) <= tol; }

  Index dim() const { return dim_; }
  /// C with sup_{x in set} ||x|| <= C; +inf for unbounded sets.
  double diameter_bound() const { return diameter_bound_; }
  bool bounded() const { return std::isfinite(diameter_bound_); }
  /// Accuracy of project(): 0 for the closed-form sets.
  double projection_tolerance() const;
  const Kind& kind() const { return kind_; }

  FeasibleSet with_projection_options(ProjectionOptions opts) const;

 private:
  FeasibleSet() = default;

  Vec project_polyhedron(const Polyhedron& p, const Vec& x) const;

  Kind kind_;
  Index dim_ = 0;
  double diameter_bound_ = std::numeric_limits<double>::infinity();
  ProjectionOptions opts_;
  // Row-major copy of A so each halfspace factor touches only its nonzeros.
  Eigen::SparseMatrix<double, Eigen::RowMajor> rows_;
  Vec row_norms_sq_;
};

/// Projection onto {y : a^T y >= b}.
Vec project_halfspace(const Vec& a, double b, const Vec& x);

}  // namespace misspec
