#pragma once

#include "newton_iks/core_types.hpp"
#include "newton_iks/linearize.hpp"

namespace newton_iks {

/// The three halves-weighted sums of the negative log-posterior.
struct CostBreakdown {
  double prior_term = 0.0;
  double transition_term = 0.0;
  double observation_term = 0.0;
  double total = 0.0;
};

/// L(x) = 1/2 |x0 - m0|^2_{P0^-1} + 1/2 sum |x_k - f(x_{k-1})|^2_{Q^-1}
///      + 1/2 sum |y_k - h(x_k)|^2_{R^-1}
CostBreakdown eval_cost(const NonlinearSSM& model, const Trajectory& traj, const MeasurementSeq& ys);

/// The regularized quadratic model of L around aug.nominal(): affine
/// transition and observation terms plus the pseudo-measurement penalties
/// 1/2 (x_k - xh_k)^T Lambda_k (x_k - xh_k). Lambda_k may be indefinite.
double eval_quadratic_cost(const AffineAugmentedSSM& aug, const Trajectory& traj, const MeasurementSeq& ys);

/// Ltilde(from) - Ltilde(to), accumulated term by term as differences so
/// that small reductions do not drown in the magnitude of Ltilde itself.
double expected_reduction(const AffineAugmentedSSM& aug, const Trajectory& from, const Trajectory& to,
                          const MeasurementSeq& ys);

/// Gradient and Hessian of Ltilde at `traj`, by differentiating the
/// quadratic form term by term. Dense; meant for verification at small N.
struct QuadraticModelDerivatives {
  Vector grad;
  Matrix hess;
};

QuadraticModelDerivatives quadratic_model_derivatives(const AffineAugmentedSSM& aug, const Trajectory& traj,
                                                      const MeasurementSeq& ys);

}  // namespace newton_iks
