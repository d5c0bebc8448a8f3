#include <doctest.h>

#include <optional>

#include "newton_iks/batch_smoother.hpp"
#include "newton_iks/linearize.hpp"
#include "newton_iks/models.hpp"
#include "newton_iks/objective.hpp"
#include "test_support.hpp"

using namespace newton_iks;
using testing_support::Rng;

TEST_CASE("cost of an exact-fit trajectory is zero") {
  const NonlinearSSM ct = make_coordinated_turn_model();
  const SimOutput sim = simulate(ct, 50, 1, true);
  const CostBreakdown c = eval_cost(ct, sim.true_states, sim.measurements);
  CHECK(c.total == 0.0);
}

TEST_CASE("scalar hand-computed cost") {
  const SmoothFunction id(1, 1, [](const auto& x) { return x; });
  const Matrix one = Matrix::Identity(1, 1);
  const NonlinearSSM model = make_model(1, 1, id, id, one, one, Vector::Zero(1), one);
  const Trajectory x((Matrix(1, 2) << 0.0, 1.0).finished());
  const MeasurementSeq ys((Matrix(1, 1) << 0.0).finished());
  const CostBreakdown c = eval_cost(model, x, ys);
  CHECK(c.total == 1.0);
  CHECK(c.prior_term == 0.0);
  CHECK(c.transition_term == 0.5);
  CHECK(c.observation_term == 0.5);
}

TEST_CASE("cost matches a brute-force summation") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 2, 2);
    const Trajectory x = testing_support::random_trajectory(rng, 2, 3);
    const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 3);
    const CostBreakdown c = eval_cost(model, x, ys);
    const double ref = testing_support::brute_force_cost(model, x, ys);
    CHECK(std::abs(c.total - ref) <= 1e-12 * std::abs(ref));
    CHECK(std::abs(c.total - (c.prior_term + c.transition_term + c.observation_term)) <= 1e-12 * std::abs(c.total));
    CHECK(c.prior_term >= 0.0);
    CHECK(c.transition_term >= 0.0);
    CHECK(c.observation_term >= 0.0);
  }
}

TEST_CASE("cost is invariant to the summation order") {
  Rng rng(22);
  const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 3, 2);
  const Trajectory x = testing_support::random_trajectory(rng, 3, 30);
  const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 30);
  const CostBreakdown c = eval_cost(model, x, ys);
  double reversed = 0.0;
  for (Index k = x.steps(); k >= 1; --k) {
    const Vector r = Vector(ys.at(k)) - model.observation()(Vector(x.state(k)));
    reversed += 0.5 * mahalanobis_sq(model.R_llt(), r);
  }
  for (Index k = x.steps(); k >= 1; --k) {
    const Vector q = Vector(x.state(k)) - model.transition()(Vector(x.state(k - 1)));
    reversed += 0.5 * mahalanobis_sq(model.Q_llt(), q);
  }
  reversed += 0.5 * mahalanobis_sq(model.P0_llt(), Vector(x.state(0)) - model.m0());
  CHECK(std::abs(c.total - reversed) <= 1e-12 * std::abs(c.total));
}

TEST_CASE("cost rejects mismatched shapes") {
  Rng rng(23);
  const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 2, 2);
  CHECK_THROWS_AS(eval_cost(model, testing_support::random_trajectory(rng, 2, 3),
                            testing_support::random_measurements(rng, 2, 4)),
                  DimensionMismatch);
  CHECK_THROWS_AS(eval_cost(model, testing_support::random_trajectory(rng, 3, 3),
                            testing_support::random_measurements(rng, 2, 3)),
                  DimensionMismatch);
}

TEST_CASE("quadratic model equals the cost at the nominal") {
  Rng rng(24);
  for (double lambda : {0.0, 0.5, 3.0}) {
    const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 2, 2);
    const Trajectory nominal = testing_support::random_trajectory(rng, 2, 5);
    const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 5);
    const AffineAugmentedSSM aug = build_modified_model(model, nominal, ys, lambda + 20.0);
    const double L = eval_cost(model, nominal, ys).total;
    CHECK(std::abs(eval_quadratic_cost(aug, nominal, ys) - L) <= 1e-12 * L);
  }
}

TEST_CASE("linear model with zero regularization: quadratic model equals the cost everywhere") {
  Rng rng(25);
  const NonlinearSSM model = testing_support::random_linear_model(rng, 3, 2);
  const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 6);
  const AffineAugmentedSSM aug = build_modified_model(model, testing_support::random_trajectory(rng, 3, 6), ys, 0.0);
  for (int i = 0; i < 5; ++i) {
    const Trajectory x = testing_support::random_trajectory(rng, 3, 6, 3.0);
    const double L = eval_cost(model, x, ys).total;
    CHECK(std::abs(eval_quadratic_cost(aug, x, ys) - L) <= 1e-11 * L);
  }
}

TEST_CASE("quadratic model is the second-order Taylor expansion plus lambda") {
  Rng rng(26);
  const double lambda = 0.5;
  for (int trial = 0; trial < 5; ++trial) {
    const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 2, 2);
    const Trajectory nominal = testing_support::random_trajectory(rng, 2, 3);
    const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 3);
    AffineAugmentedSSM aug = [&] {
      // P0^-1 + Lambda_0 may be indefinite for a random nominal; raise lambda
      // until the prior is valid and use the same value in the oracle.
      for (double l = lambda;; l *= 2.0) {
        try {
          return build_modified_model(model, nominal, ys, l);
        } catch (const PriorNotPD&) {
        }
      }
    }();
    const double l = aug.lambda();
    const DenseSystem sys = assemble_dense(model, nominal, ys);
    const double L = eval_cost(model, nominal, ys).total;
    const Vector delta = rng.vec(nominal.stacked().size(), 0.3);
    const Matrix Hl = sys.hess + l * Matrix::Identity(sys.hess.rows(), sys.hess.cols());
    const double taylor = L + sys.grad.dot(delta) + 0.5 * delta.dot(Hl * delta);
    const Trajectory moved = Trajectory::from_stacked(nominal.stacked() + delta, 2);
    CHECK(std::abs(eval_quadratic_cost(aug, moved, ys) - taylor) <= 1e-8 * std::abs(taylor));
  }
}

TEST_CASE("quadratic model derivatives at the nominal equal grad L and hess L + lambda I") {
  Rng rng(27);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 1 + trial % 3;
    const NonlinearSSM model = testing_support::random_nonlinear_model(rng, d, 2);
    const Trajectory nominal = testing_support::random_trajectory(rng, d, 4);
    const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 4);
    double lambda = 0.25 * (trial % 4);
    std::optional<AffineAugmentedSSM> aug;
    while (!aug) {
      try {
        aug.emplace(build_modified_model(model, nominal, ys, lambda));
      } catch (const PriorNotPD&) {
        lambda = 2.0 * lambda + 1.0;
      }
    }
    const DenseSystem sys = assemble_dense(model, nominal, ys);
    const QuadraticModelDerivatives q = quadratic_model_derivatives(*aug, nominal, ys);
    const Matrix Hl = sys.hess + lambda * Matrix::Identity(sys.hess.rows(), sys.hess.cols());
    CHECK(testing_support::rel_err(q.grad, sys.grad) <= 1e-8);
    CHECK(testing_support::rel_err(q.hess, Hl) <= 1e-8);
  }
}

TEST_CASE("expected reduction equals the difference of quadratic model values") {
  Rng rng(28);
  const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 3, 2);
  const Trajectory nominal = testing_support::random_trajectory(rng, 3, 8);
  const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 8);
  const AffineAugmentedSSM aug = build_modified_model(model, nominal, ys, 50.0);
  const Trajectory to = testing_support::random_trajectory(rng, 3, 8);
  const double diff = eval_quadratic_cost(aug, nominal, ys) - eval_quadratic_cost(aug, to, ys);
  CHECK(std::abs(expected_reduction(aug, nominal, to, ys) - diff) <= 1e-10 * std::abs(diff));
}
