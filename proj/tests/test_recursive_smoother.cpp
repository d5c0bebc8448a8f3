#include <doctest.h>

#include <optional>

#include "newton_iks/batch_smoother.hpp"
#include "newton_iks/linearize.hpp"
#include "newton_iks/models.hpp"
#include "newton_iks/objective.hpp"
#include "newton_iks/recursive_smoother.hpp"
#include "test_support.hpp"

using namespace newton_iks;
using testing_support::Rng;

namespace {

struct LinearParts {
  Matrix A;
  Vector a;
  Matrix H;
  Vector e;
  Matrix Q, R, P0;
  Vector m0;
};

LinearParts random_linear_parts(Rng& rng, Index d, Index m) {
  return {Matrix::Identity(d, d) + rng.mat(d, d, 0.2), rng.vec(d, 0.1), rng.mat(m, d), rng.vec(m, 0.1),
          rng.spd(d), rng.spd(m), rng.spd(d), rng.vec(d)};
}

/// MAP of a linear-Gaussian model from the normal equations, written out
/// block by block with explicit inverses.
Trajectory linear_map(const LinearParts& p, const MeasurementSeq& ys) {
  const Index d = p.A.rows();
  const Index N = ys.steps();
  const Index n = d * (N + 1);
  const Matrix qi = p.Q.inverse(), ri = p.R.inverse();
  Matrix J = Matrix::Zero(n, n);
  Vector rhs = Vector::Zero(n);
  J.block(0, 0, d, d) += p.P0.inverse();
  rhs.segment(0, d) += p.P0.inverse() * p.m0;
  for (Index k = 1; k <= N; ++k) {
    const Index i = k * d, j = (k - 1) * d;
    J.block(i, i, d, d) += qi;
    J.block(j, j, d, d) += p.A.transpose() * qi * p.A;
    J.block(i, j, d, d) -= qi * p.A;
    J.block(j, i, d, d) -= p.A.transpose() * qi;
    rhs.segment(i, d) += qi * p.a;
    rhs.segment(j, d) -= p.A.transpose() * qi * p.a;
    J.block(i, i, d, d) += p.H.transpose() * ri * p.H;
    rhs.segment(i, d) += p.H.transpose() * ri * (Vector(ys.at(k)) - p.e);
  }
  return Trajectory::from_stacked(J.fullPivLu().solve(rhs), d);
}

double scale_of(const Trajectory& x) { return 1.0 + x.matrix().cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("linear model, zero lambda: one pass gives the exact MAP from any nominal") {
  Rng rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const LinearParts p = random_linear_parts(rng, 3, 2);
    const NonlinearSSM model = make_linear_gaussian_model(p.A, p.a, p.H, p.e, p.Q, p.R, p.m0, p.P0);
    const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 15);
    const Trajectory map = linear_map(p, ys);
    const Trajectory nominal = testing_support::random_trajectory(rng, 3, 15, 5.0);
    const SmootherResult res = newton_iks_iteration(build_modified_model(model, nominal, ys, 0.0), ys);
    CHECK(traj_diff_norm(res.smoothed, map) <= 1e-9 * scale_of(map));
    // Pseudo updates are no-ops: filtered == updated.
    for (Index k = 1; k <= 15; ++k) {
      const auto i = static_cast<std::size_t>(k);
      CHECK(res.pass.filtered[i].mean == res.pass.updated[i].mean);
      CHECK(res.pass.filtered[i].cov == res.pass.updated[i].cov);
    }
  }
}

TEST_CASE("huge lambda leaves the nominal in place") {
  Rng rng(42);
  const NonlinearSSM ct = make_coordinated_turn_model();
  const SimOutput sim = simulate(ct, 60, 3);
  const Trajectory nominal = prior_rollout(ct, 60);
  const SmootherResult res = newton_iks_iteration(build_modified_model(ct, nominal, sim.measurements, 1e12),
                                                  sim.measurements);
  CHECK(traj_diff_norm(res.smoothed, nominal) <= 1e-6 * scale_of(nominal));
}

TEST_CASE("recursive pass equals the dense Newton step on random nonlinear models") {
  Rng rng(43);
  int compared = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 3, 2, 0.3);
    const auto [nominal, ys] = testing_support::consistent_problem(rng, model, 40, 0.3);
    const DenseSystem sys = assemble_dense(model, nominal, ys);
    const auto lin = linearize(model, nominal, ys);
    for (double lambda : {0.0, 0.1, 1.0, 10.0}) {
      Trajectory rec, bat;
      try {
        rec = newton_iks_iteration(build_modified_model(lin, lambda), ys).smoothed;
        bat = batch_newton_step(sys, nominal, lambda);
      } catch (const InsufficientRegularization&) {
        continue;
      }
      ++compared;
      CHECK(traj_diff_norm(rec, bat) <= 1e-8 * scale_of(bat));
    }
  }
  CHECK(compared >= 12);
}

TEST_CASE("joseph form gives the same step") {
  Rng rng(44);
  const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 2, 2);
  const auto [nominal, ys] = testing_support::consistent_problem(rng, model, 20);
  const AffineAugmentedSSM aug = build_modified_model(model, nominal, ys, 1.0);
  SmootherOptions joseph;
  joseph.joseph_form = true;
  const Trajectory a = newton_iks_iteration(aug, ys).smoothed;
  const Trajectory b = newton_iks_iteration(aug, ys, joseph).smoothed;
  CHECK(traj_diff_norm(a, b) <= 1e-10 * scale_of(a));
}

TEST_CASE("a stationary point is a fixed point") {
  Rng rng(45);
  const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 2, 2, 0.2);
  const SimOutput sim = simulate(model, 25, 9);
  Trajectory x = sim.true_states;
  for (int i = 0; i < 30; ++i) {
    x = newton_iks_iteration(build_modified_model(model, x, sim.measurements, 0.0), sim.measurements).smoothed;
  }
  const DenseSystem sys = assemble_dense(model, x, sim.measurements);
  REQUIRE(sys.grad.norm() <= 1e-9);
  REQUIRE(Eigen::LLT<Matrix>(sys.hess).info() == Eigen::Success);
  const Trajectory next =
      newton_iks_iteration(build_modified_model(model, x, sim.measurements, 0.0), sim.measurements).smoothed;
  CHECK(traj_diff_norm(next, x) <= 1e-9);
}

TEST_CASE("pass covariances are symmetric and PSD, innovation covariances SPD") {
  const NonlinearSSM ct = make_coordinated_turn_model();
  const SimOutput sim = simulate(ct, 80, 2);
  // Smallest lambda on a decade ladder whose pass goes through.
  std::optional<SmootherResult> found;
  for (double lambda = 1e-2; !found && lambda <= 1e8; lambda *= 10.0) {
    try {
      found = newton_iks_iteration(build_modified_model(ct, sim.true_states, sim.measurements, lambda),
                                   sim.measurements);
    } catch (const CovarianceNotPD&) {
    }
  }
  REQUIRE(found.has_value());
  const SmootherResult& res = *found;
  auto check_cov = [](const Matrix& P, bool strict) {
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
    const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues().minCoeff();
    CHECK(min_eig >= (strict ? 0.0 : -1e-9));
  };
  for (Index k = 0; k <= 80; ++k) {
    const auto i = static_cast<std::size_t>(k);
    check_cov(res.pass.filtered[i].cov, false);
    check_cov(res.pass.smoothed[i].cov, false);
    if (k > 0) {
      check_cov(res.pass.predicted[i].cov, false);
      check_cov(res.pass.updated[i].cov, false);
      check_cov(res.pass.innovation[i].cov, true);
      CHECK(res.pass.gain_K[i].rows() == 5);
      CHECK(res.pass.gain_K[i].cols() == 2);
    }
    CHECK(res.smoothed.state(k) == res.pass.smoothed[i].mean);
  }
}

TEST_CASE("pseudo gain is P^f Lambda") {
  Rng rng(46);
  const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 3, 2);
  const auto [nominal, ys] = testing_support::consistent_problem(rng, model, 10);
  const AffineAugmentedSSM aug = build_modified_model(model, nominal, ys, 4.0);
  const SmootherResult res = newton_iks_iteration(aug, ys);
  for (Index k = 1; k <= 10; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Matrix expected = res.pass.filtered[i].cov * aug.pseudo_precision(k);
    CHECK(testing_support::rel_err(res.pass.gain_U[i], expected) <= 1e-10);
    // Covariance form of the same update when Lambda_k is SPD.
    const Matrix Phi = aug.pseudo_precision(k).inverse();
    const Matrix& Py = res.pass.updated[i].cov;
    const Matrix U = Py * (Py + Phi).inverse();
    const Vector xf = res.pass.updated[i].mean + U * (Vector(nominal.state(k)) - res.pass.updated[i].mean);
    CHECK(testing_support::rel_err(res.pass.filtered[i].mean, xf) <= 1e-9);
    CHECK(testing_support::rel_err(res.pass.filtered[i].cov, Py - U * Py) <= 1e-9);
  }
}

TEST_CASE("indefinite pseudo precision raises CovarianceNotPD with the step") {
  const SmoothFunction sq(1, 1, [](const auto& x) {
    using T = typename std::decay_t<decltype(x)>::Scalar;
    return VecX<T>(x.cwiseProduct(x));
  });
  const Matrix one = Matrix::Identity(1, 1);
  const NonlinearSSM model = make_model(1, 1, sq, sq, one, one, Vector::Ones(1), one);
  const Trajectory nominal((Matrix(1, 3) << 1.0, 1.0, 3.0).finished());
  const MeasurementSeq ys((Matrix(1, 2) << 2.0, 9.0).finished());
  const AffineAugmentedSSM aug = build_modified_model(model, nominal, ys, 1.0);
  try {
    newton_iks_iteration(aug, ys);
    FAIL("expected CovarianceNotPD");
  } catch (const CovarianceNotPD& e) {
    CHECK(e.step() == 1);
    CHECK(e.stage() == "pseudo-update");
  }
}

TEST_CASE("measurement count must match") {
  Rng rng(47);
  const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 2, 2);
  const Trajectory nominal = testing_support::random_trajectory(rng, 2, 5);
  const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 5);
  const AffineAugmentedSSM aug = build_modified_model(model, nominal, ys, 10.0);
  CHECK_THROWS_AS(newton_iks_iteration(aug, testing_support::random_measurements(rng, 2, 6)), DimensionMismatch);
}
