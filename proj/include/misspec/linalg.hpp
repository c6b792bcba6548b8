#pragma once

#include <Eigen/Dense>

namespace misspec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

struct PowerIterationOptions {
  double tolerance = 1e-10;
  int max_iterations = 10'000;
};

/// Largest eigenvalue of a symmetric matrix by power iteration on a
/// Gershgorin-shifted copy. Returns 0 for the zero matrix.
double largest_eigenvalue(const Mat& sym, const PowerIterationOptions& opts = {});

/// Smallest eigenvalue of a symmetric matrix.
double smallest_eigenvalue(const Mat& sym, const PowerIterationOptions& opts = {});

/// Spectral norm ||B||_2 = sqrt(lambda_max(B^T B)).
double spectral_norm(const Mat& m, const PowerIterationOptions& opts = {});

bool is_symmetric(const Mat& m, double tol = 1e-12);

}  // namespace misspec
