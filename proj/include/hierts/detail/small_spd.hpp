#pragma once

#include "hierts/common.hpp"

#include <cmath>

namespace hierts::detail {

/// Dense kernels for the agents' per-round hot path. Eigen's decomposition
/// objects carry dispatch overhead comparable to the arithmetic itself at the
/// dimensions bandit agents touch every round (d <= 5, Ld <= a few dozen);
/// these raw loops are measurably faster there. Column-major storage, unit
/// inner stride throughout. Verified against Eigen in the test suite.

/// In-place lower Cholesky of the n x n matrix a; reads the lower triangle,
/// writes L into it. Returns false when a pivot is not strictly positive.
inline bool cholesky_in_place(double* a, Index n) {
  for (Index j = 0; j < n; ++j) {
    double* col_j = a + j * n;
    double diag = col_j[j];
    for (Index k = 0; k < j; ++k) {
      const double l_jk = a[k * n + j];
      diag -= l_jk * l_jk;
    }
    if (!(diag > 0.0)) return false;
    const double l_jj = std::sqrt(diag);
    col_j[j] = l_jj;
    const double inv = 1.0 / l_jj;
    for (Index i = j + 1; i < n; ++i) {
      double value = col_j[i];
      for (Index k = 0; k < j; ++k) value -= a[k * n + i] * a[k * n + j];
      col_j[i] = value * inv;
    }
  }
  return true;
}

/// Solve L x = b in place (L lower triangular from cholesky_in_place).
inline void forward_solve(const double* chol, Index n, double* x) {
  for (Index i = 0; i < n; ++i) {
    double value = x[i];
    for (Index k = 0; k < i; ++k) value -= chol[k * n + i] * x[k];
    x[i] = value / chol[i * n + i];
  }
}

/// Solve L^T x = b in place.
inline void backward_solve(const double* chol, Index n, double* x) {
  for (Index i = n; i-- > 0;) {
    double value = x[i];
    const double* col_i = chol + i * n;
    for (Index k = i + 1; k < n; ++k) value -= col_i[k] * x[k];
    x[i] = value / col_i[i];
  }
}

/// Solve (L L^T) x = b in place.
inline void spd_solve(const double* chol, Index n, double* x) {
  forward_solve(chol, n, x);
  backward_solve(chol, n, x);
}

/// y += A x with A rows x cols.
inline void matvec_add(const double* a, Index rows, Index cols, const double* x, double* y) {
  for (Index c = 0; c < cols; ++c) {
    const double xc = x[c];
    const double* col = a + c * rows;
    for (Index r = 0; r < rows; ++r) y[r] += xc * col[r];
  }
}

/// y = A x.
inline void matvec(const double* a, Index rows, Index cols, const double* x, double* y) {
  for (Index r = 0; r < rows; ++r) y[r] = 0.0;
  matvec_add(a, rows, cols, x, y);
}

}  // namespace hierts::detail
