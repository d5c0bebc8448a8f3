#include "newton_iks/objective.hpp"

namespace newton_iks {

namespace {

void require_aug_compatible(const AffineAugmentedSSM& aug, const Trajectory& traj, const MeasurementSeq& ys,
                            const char* context) {
  require_compatible(aug.model(), traj, ys, context);
  require_same_shape(aug.nominal(), traj, context);
}

}  // namespace

CostBreakdown eval_cost(const NonlinearSSM& model, const Trajectory& traj, const MeasurementSeq& ys) {
  require_compatible(model, traj, ys, "eval_cost");
  CostBreakdown cost;
  cost.prior_term = 0.5 * mahalanobis_sq(model.P0_llt(), traj.state(0) - model.m0());
  for (Index k = 1; k <= traj.steps(); ++k) {
    const Vector prev = traj.state(k - 1);
    const Vector cur = traj.state(k);
    cost.transition_term += 0.5 * mahalanobis_sq(model.Q_llt(), cur - model.transition()(prev));
    cost.observation_term += 0.5 * mahalanobis_sq(model.R_llt(), ys.at(k) - model.observation()(cur));
  }
  cost.total = cost.prior_term + cost.transition_term + cost.observation_term;
  return cost;
}

double eval_quadratic_cost(const AffineAugmentedSSM& aug, const Trajectory& traj, const MeasurementSeq& ys) {
  require_aug_compatible(aug, traj, ys, "eval_quadratic_cost");
  const NonlinearSSM& model = aug.model();
  const Trajectory& nominal = aug.nominal();

  double total = 0.5 * mahalanobis_sq(model.P0_llt(), traj.state(0) - model.m0());
  for (Index k = 0; k <= traj.steps(); ++k) {
    if (!aug.pseudo_is_zero(k)) {
      const Vector dx = traj.state(k) - nominal.state(k);
      total += 0.5 * dx.dot(aug.pseudo_precision(k) * dx);
    }
  }
  for (Index k = 1; k <= traj.steps(); ++k) {
    const TransitionTerm& t = aug.transition(k);
    const ObservationTerm& o = aug.observation(k);
    total += 0.5 * mahalanobis_sq(model.R_llt(), ys.at(k) - o.H * traj.state(k) - o.c);
    total += 0.5 * mahalanobis_sq(model.Q_llt(), traj.state(k) - t.F * traj.state(k - 1) - t.b);
  }
  return total;
}

double expected_reduction(const AffineAugmentedSSM& aug, const Trajectory& from, const Trajectory& to,
                          const MeasurementSeq& ys) {
  require_aug_compatible(aug, from, ys, "expected_reduction");
  require_same_shape(from, to, "expected_reduction");
  const NonlinearSSM& model = aug.model();
  const Trajectory& nominal = aug.nominal();
  const Matrix step = to.matrix() - from.matrix();

  // For a term 1/2 r^T W r with r affine, going from r to r + dr changes
  // the value by r^T W dr + 1/2 dr^T W dr.
  double increase = 0.0;
  {
    const Vector r = from.state(0) - model.m0();
    const Vector dr = step.col(0);
    const Vector w_dr = model.P0_llt().solve(dr);
    increase += r.dot(w_dr) + 0.5 * dr.dot(w_dr);
  }
  for (Index k = 0; k <= from.steps(); ++k) {
    if (!aug.pseudo_is_zero(k)) {
      const Vector r = from.state(k) - nominal.state(k);
      const Vector dr = step.col(k);
      const Vector w_dr = aug.pseudo_precision(k) * dr;
      increase += r.dot(w_dr) + 0.5 * dr.dot(w_dr);
    }
  }
  for (Index k = 1; k <= from.steps(); ++k) {
    const TransitionTerm& t = aug.transition(k);
    const ObservationTerm& o = aug.observation(k);
    {
      const Vector r = ys.at(k) - o.H * from.state(k) - o.c;
      const Vector dr = -o.H * step.col(k);
      const Vector w_dr = model.R_llt().solve(dr);
      increase += r.dot(w_dr) + 0.5 * dr.dot(w_dr);
    }
    {
      const Vector r = from.state(k) - t.F * from.state(k - 1) - t.b;
      const Vector dr = step.col(k) - t.F * step.col(k - 1);
      const Vector w_dr = model.Q_llt().solve(dr);
      increase += r.dot(w_dr) + 0.5 * dr.dot(w_dr);
    }
  }
  return -increase;
}

QuadraticModelDerivatives quadratic_model_derivatives(const AffineAugmentedSSM& aug, const Trajectory& traj,
                                                      const MeasurementSeq& ys) {
  require_aug_compatible(aug, traj, ys, "quadratic_model_derivatives");
  const NonlinearSSM& model = aug.model();
  const Index d = traj.dim();
  const Index n = traj.steps();
  const Index total = (n + 1) * d;

  QuadraticModelDerivatives out{Vector::Zero(total), Matrix::Zero(total, total)};
  auto g = [&](Index k) { return out.grad.segment(k * d, d); };
  auto h = [&](Index i, Index j) { return out.hess.block(i * d, j * d, d, d); };

  g(0) += model.P0_inv() * (traj.state(0) - model.m0());
  h(0, 0) += model.P0_inv();
  for (Index k = 0; k <= n; ++k) {
    const Matrix& lam = aug.pseudo_precision(k);
    g(k) += lam * (traj.state(k) - aug.nominal().state(k));
    h(k, k) += lam;
  }
  for (Index k = 1; k <= n; ++k) {
    const TransitionTerm& t = aug.transition(k);
    const ObservationTerm& o = aug.observation(k);

    const Vector ro = model.R_inv() * (ys.at(k) - o.H * traj.state(k) - o.c);
    g(k) -= o.H.transpose() * ro;
    h(k, k) += o.H.transpose() * model.R_inv() * o.H;

    const Vector rt = model.Q_inv() * (traj.state(k) - t.F * traj.state(k - 1) - t.b);
    g(k) += rt;
    g(k - 1) -= t.F.transpose() * rt;
    h(k, k) += model.Q_inv();
    h(k - 1, k - 1) += t.F.transpose() * model.Q_inv() * t.F;
    h(k, k - 1) -= model.Q_inv() * t.F;
    h(k - 1, k) -= t.F.transpose() * model.Q_inv();
  }
  return out;
}

}  // namespace newton_iks
