#pragma once

#include "newton_iks/core_types.hpp"

namespace newton_iks {

/// Gradient and Hessian of L at a nominal, over the stacked (N+1)*d
/// decision vector. The Hessian is stored dense; only the three block
/// diagonals are ever written.
struct DenseSystem {
  Vector grad;
  Matrix hess;
  Index steps = 0;
  Index dim = 0;
};

/// Assembles grad L and hess L from per-term contributions: the prior, each
/// transition residual (including its curvature through the Hessian tensor
/// of f) and each observation residual (likewise through that of h).
DenseSystem assemble_dense(const NonlinearSSM& model, const Trajectory& nominal, const MeasurementSeq& ys);

/// x+ = xh - (hess + lambda I)^-1 grad via a dense Cholesky factorization.
/// Throws HessianNotPD when hess + lambda I is not SPD.
Trajectory batch_newton_step(const DenseSystem& system, const Trajectory& nominal, double lambda);

/// Same step solved with a block-tridiagonal Cholesky factorization.
/// Used to cross-check the dense solve; the benchmark never calls it.
Trajectory batch_newton_step_structured(const DenseSystem& system, const Trajectory& nominal, double lambda);

/// Decrease of the quadratic model grad^T s + 1/2 s^T (hess + lambda I) s
/// when moving by s = to - from, i.e. -(that quantity).
double dense_expected_reduction(const DenseSystem& system, const Trajectory& from, const Trajectory& to,
                                double lambda);

}  // namespace newton_iks
