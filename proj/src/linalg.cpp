#include "misspec/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace misspec {

namespace {

Vec start_vector(Index n) {
  // Non-uniform start so it is unlikely to be orthogonal to the top eigenvector.
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = 1.0 + 0.1 * static_cast<double>(i + 1) / static_cast<double>(n);
  return v.normalized();
}

}  // namespace

namespace {

double dominant_eigenvalue(const Mat& psd, const PowerIterationOptions& opts) {
  const Index n = psd.rows();
  Vec v = start_vector(n);
  double lambda = 0.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    Vec w = psd * v;
    lambda = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    const double residual = (w - lambda * v).norm();
    if (residual <= opts.tolerance * std::max(1.0, std::abs(lambda))) break;
    v = w / wn;
  }
  return lambda;
}

// Gershgorin lower bound on the spectrum.
double gershgorin_lower(const Mat& sym) {
  double lo = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < sym.rows(); ++i) {
    const double off = sym.row(i).cwiseAbs().sum() - std::abs(sym(i, i));
    lo = std::min(lo, sym(i, i) - off);
  }
  return lo;
}

}  // namespace

double largest_eigenvalue(const Mat& sym, const PowerIterationOptions& opts) {
  if (sym.rows() != sym.cols()) throw std::invalid_argument("largest_eigenvalue: matrix is not square");
  if (sym.rows() == 0) return 0.0;
  // Shift just enough to make the matrix PSD so the dominant eigenvalue is the largest.
  const double shift = std::max(0.0, -gershgorin_lower(sym));
  if (shift == 0.0) return dominant_eigenvalue(sym, opts);
  const Mat shifted = sym + shift * Mat::Identity(sym.rows(), sym.cols());
  return dominant_eigenvalue(shifted, opts) - shift;
}

double smallest_eigenvalue(const Mat& sym, const PowerIterationOptions& opts) {
  return -largest_eigenvalue(-sym, opts);
}

double spectral_norm(const Mat& m, const PowerIterationOptions& opts) {
  if (m.size() == 0) return 0.0;
  const Mat gram = m.transpose() * m;
  return std::sqrt(std::max(0.0, largest_eigenvalue(gram, opts)));
}

bool is_symmetric(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

}  // namespace misspec
