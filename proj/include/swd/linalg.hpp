#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "swd/vector_ops.hpp"

namespace swd {

using Matrix = std::vector<ParamVector>;  // row-major, rows of equal length

inline void check_square(const Matrix& a) {
  const std::size_t n = a.size();
  if (n == 0) throw std::invalid_argument("matrix: empty");
  for (const auto& row : a)
    if (row.size() != n) throw std::invalid_argument("matrix: not square");
}

inline bool is_symmetric(const Matrix& a, double tol = 1e-12) {
  check_square(a);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double scale = std::max({std::fabs(a[i][j]), std::fabs(a[j][i]), 1.0});
      if (std::fabs(a[i][j] - a[j][i]) > tol * scale) return false;
    }
  return true;
}

// Lower-triangular Cholesky factor; returns false when A is not positive
// definite (non-positive pivot).
inline bool cholesky_factor(const Matrix& a, Matrix& lower) {
  check_square(a);
  const std::size_t n = a.size();
  lower.assign(n, ParamVector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= lower[i][k] * lower[j][k];
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) return false;
        lower[i][i] = std::sqrt(s);
      } else {
        lower[i][j] = s / lower[j][j];
      }
    }
  }
  return true;
}

// Solve L L^T x = b given the lower factor.
inline ParamVector cholesky_solve(const Matrix& lower, const ParamVector& b) {
  const std::size_t n = lower.size();
  if (b.size() != n) throw std::invalid_argument("cholesky_solve: size mismatch");
  ParamVector y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower[i][k] * y[k];
    y[i] = s / lower[i][i];
  }
  for (std::size_t ii = n; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    double s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= lower[k][i] * x[k];
    x[i] = s / lower[i][i];
  }
  return x;
}

// Solve A x = b for symmetric positive definite A.
inline ParamVector spd_solve(const Matrix& a, const ParamVector& b) {
  if (!is_symmetric(a)) throw std::invalid_argument("spd_solve: matrix is not symmetric");
  Matrix lower;
  if (!cholesky_factor(a, lower))
    throw std::invalid_argument("spd_solve: matrix is not positive definite");
  return cholesky_solve(lower, b);
}

// y = A x
inline ParamVector mat_vec(const Matrix& a, const ParamVector& x) {
  ParamVector y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != x.size()) throw std::invalid_argument("mat_vec: size mismatch");
    y[i] = dot(a[i], x);
  }
  return y;
}

}  // namespace swd
