#pragma once

// Cyclic coordinate descent for
//
//   minimize_b  0.5 * ||y - A b||^2 + lambda * ||b||_1
//
// With this scaling the all-zero solution is optimal exactly when
// lambda >= max_j |A_j^T y|.

#include "gae/core.hpp"

#include <algorithm>
#include <cmath>

namespace gae {

struct LassoResult {
  Vector coef;
  int sweeps = 0;
  bool converged = false;
};

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

inline double lasso_objective(const Matrix& A, const Vector& y, const Vector& b, double lambda) {
  return 0.5 * (y - A * b).squaredNorm() + lambda * b.lpNorm<1>();
}

/// Smallest lambda that yields the zero solution.
inline double lasso_lambda_max(const Matrix& A, const Vector& y) {
  return (A.transpose() * y).cwiseAbs().maxCoeff();
}

inline LassoResult solve_lasso(const Matrix& A, const Vector& y, double lambda, double tol = 1e-6,
                               int max_sweeps = 10000) {
  require(A.rows() == y.size(), "lasso: design rows must match target length");
  require(lambda >= 0.0, "lasso: penalty must be nonnegative");
  require(tol > 0.0 && max_sweeps > 0, "lasso: tol and max_sweeps must be positive");

  const Index p = A.cols();
  const Vector col_sq = A.colwise().squaredNorm().transpose();
  LassoResult res;
  res.coef = Vector::Zero(p);
  Vector resid = y;

  for (res.sweeps = 1; res.sweeps <= max_sweeps; ++res.sweeps) {
    double max_delta = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (col_sq(j) == 0.0) continue;
      const double old = res.coef(j);
      const double rho = A.col(j).dot(resid) + col_sq(j) * old;
      const double fresh = soft_threshold(rho, lambda) / col_sq(j);
      const double delta = fresh - old;
      if (delta != 0.0) {
        resid.noalias() -= delta * A.col(j);
        res.coef(j) = fresh;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (max_delta < tol) {
      res.converged = true;
      return res;
    }
  }
  res.sweeps = max_sweeps;
  return res;
}

}  // namespace gae
