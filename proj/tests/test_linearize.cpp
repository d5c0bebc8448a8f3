#include <doctest.h>

#include "newton_iks/linearize.hpp"
#include "newton_iks/models.hpp"
#include "newton_iks/objective.hpp"
#include "test_support.hpp"

using namespace newton_iks;
using testing_support::Rng;

namespace {

SmoothFunction square_fn() {
  return SmoothFunction(1, 1, [](const auto& x) {
    using T = typename std::decay_t<decltype(x)>::Scalar;
    return VecX<T>(x.cwiseProduct(x));
  });
}

NonlinearSSM scalar_square_model() {
  const Matrix one = Matrix::Identity(1, 1);
  return make_model(1, 1, square_fn(), square_fn(), one, one, Vector::Ones(1), one);
}

Trajectory row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) {
    m(0, i++) = x;
  }
  return Trajectory(m);
}

}  // namespace

TEST_CASE("scalar square transition: F=2, b=-1, Psi=-4") {
  const NonlinearSSM model = scalar_square_model();
  const auto terms = expand_transition(model, row({1.0, 3.0}));
  REQUIRE(terms.size() == 1);
  CHECK(terms[0].F(0, 0) == 2.0);
  CHECK(terms[0].b(0) == -1.0);
  CHECK(terms[0].Psi(0, 0) == -4.0);
}

TEST_CASE("scalar square observation: H=4, c=-4, Gamma=-2") {
  const NonlinearSSM model = scalar_square_model();
  const MeasurementSeq ys((Matrix(1, 1) << 5.0).finished());
  const auto terms = expand_observation(model, row({0.0, 2.0}), ys);
  REQUIRE(terms.size() == 1);
  CHECK(terms[0].H(0, 0) == 4.0);
  CHECK(terms[0].c(0) == -4.0);
  CHECK(terms[0].Gamma(0, 0) == -2.0);
}

TEST_CASE("scalar chain with lambda = 1 has an indefinite interior precision and still builds") {
  // xh = (1, 1, 3): xh_1 = f(xh_0) so Psi_0 = 0, Psi_1 = -4 from (1 -> 3),
  // and y_1 = 2 gives Gamma_1 = -2 (2 - 1) = -2.
  const NonlinearSSM model = scalar_square_model();
  const MeasurementSeq ys((Matrix(1, 2) << 2.0, 9.0).finished());
  const AffineAugmentedSSM aug = build_modified_model(model, row({1.0, 1.0, 3.0}), ys, 1.0);
  CHECK(aug.transition(2).Psi(0, 0) == -4.0);
  CHECK(aug.observation(1).Gamma(0, 0) == -2.0);
  CHECK(aug.pseudo_precision(1)(0, 0) == -5.0);
  CHECK(aug.pseudo_precision(0)(0, 0) == 1.0);
  CHECK(aug.pseudo_precision(2)(0, 0) == 1.0);  // y_2 = h(3) exactly
}

TEST_CASE("linear models have zero curvature and exact offsets") {
  Rng rng(31);
  const Matrix A = Matrix::Identity(3, 3) + rng.mat(3, 3, 0.2);
  const Vector a = rng.vec(3);
  const Matrix H = rng.mat(2, 3);
  const Vector e = rng.vec(2);
  const NonlinearSSM model =
      make_linear_gaussian_model(A, a, H, e, rng.spd(3), rng.spd(2), rng.vec(3), rng.spd(3));
  const Trajectory nominal = testing_support::random_trajectory(rng, 3, 5);
  const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 5);
  const auto tr = expand_transition(model, nominal);
  const auto ob = expand_observation(model, nominal, ys);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(tr[i].F == A);
    CHECK((tr[i].b - a).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(tr[i].Psi == Matrix::Zero(3, 3));
    CHECK(ob[i].H == H);
    CHECK((ob[i].c - e).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(ob[i].Gamma == Matrix::Zero(3, 3));
  }
}

TEST_CASE("offsets are f(xh) - F xh as computed") {
  const NonlinearSSM ct = make_coordinated_turn_model();
  Rng rng(32);
  const Trajectory nominal = testing_support::random_trajectory(rng, 5, 4, 2.0);
  const auto tr = expand_transition(ct, nominal);
  for (Index k = 1; k <= 4; ++k) {
    const Vector xp = nominal.state(k - 1);
    const Vector expected = ct.transition()(xp) - tr[static_cast<std::size_t>(k - 1)].F * xp;
    CHECK(tr[static_cast<std::size_t>(k - 1)].b == expected);
  }
}

TEST_CASE("zero residuals remove the curvature terms") {
  const NonlinearSSM ct = make_coordinated_turn_model();
  const SimOutput sim = simulate(ct, 30, 4, true);
  for (const auto& t : expand_transition(ct, sim.true_states)) {
    CHECK(t.Psi == Matrix::Zero(5, 5));
  }
  for (const auto& o : expand_observation(ct, sim.true_states, sim.measurements)) {
    CHECK(o.Gamma == Matrix::Zero(5, 5));
  }
}

TEST_CASE("linear model with zero lambda: no pseudo information, plain prior") {
  Rng rng(33);
  const NonlinearSSM model = testing_support::random_linear_model(rng, 3, 2);
  const AffineAugmentedSSM aug = build_modified_model(model, testing_support::random_trajectory(rng, 3, 6),
                                                      testing_support::random_measurements(rng, 2, 6), 0.0);
  for (Index k = 0; k <= 6; ++k) {
    CHECK(aug.pseudo_precision(k) == Matrix::Zero(3, 3));
    CHECK(aug.pseudo_is_zero(k));
  }
  CHECK(aug.Omega0() == model.P0());
  CHECK(aug.tau0() == model.m0());
}

TEST_CASE("exact fit at the last step: Lambda_N = lambda I") {
  const NonlinearSSM ct = make_coordinated_turn_model();
  const SimOutput sim = simulate(ct, 10, 5, true);
  const AffineAugmentedSSM aug = build_modified_model(ct, sim.true_states, sim.measurements, 0.1);
  CHECK(aug.pseudo_precision(10) == 0.1 * Matrix::Identity(5, 5));
}

TEST_CASE("modified prior matches its definition") {
  Rng rng(34);
  const NonlinearSSM model = testing_support::random_nonlinear_model(rng, 3, 2);
  const Trajectory nominal = testing_support::random_trajectory(rng, 3, 4);
  const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 4);
  const AffineAugmentedSSM aug = build_modified_model(model, nominal, ys, 30.0);
  const Matrix p0i = model.P0().inverse();
  const Matrix L0 = aug.pseudo_precision(0);
  const Matrix omega = (p0i + L0).inverse();
  const Vector tau = omega * (p0i * model.m0() + L0 * Vector(nominal.state(0)));
  CHECK(testing_support::rel_err(aug.Omega0(), omega) <= 1e-12);
  CHECK(testing_support::rel_err(aug.tau0(), tau) <= 1e-12);
  CHECK((aug.Omega0() - aug.Omega0().transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("indefinite modified prior raises PriorNotPD") {
  // Psi_0 = -4 with P0 = 1: P0^-1 + Lambda_0 = 1 - 4 + lambda.
  const NonlinearSSM model = scalar_square_model();
  const MeasurementSeq ys((Matrix(1, 1) << 9.0).finished());
  CHECK_THROWS_AS(build_modified_model(model, row({1.0, 3.0}), ys, 1.0), PriorNotPD);
  CHECK_NOTHROW(build_modified_model(model, row({1.0, 3.0}), ys, 3.5));
  CHECK_THROWS_AS(build_modified_model(model, row({1.0, 3.0}), ys, -1.0), std::invalid_argument);
}

TEST_CASE("pseudo precisions are symmetric and shift exactly with lambda") {
  Rng rng(35);
  const NonlinearSSM ct = make_coordinated_turn_model();
  const Trajectory nominal = testing_support::random_trajectory(rng, 5, 8, 2.0);
  const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 8);
  const auto lin = linearize(ct, nominal, ys);
  double prev_min = -std::numeric_limits<double>::infinity();
  for (double lambda : {100.0, 200.0, 400.0}) {
    const AffineAugmentedSSM aug = build_modified_model(lin, lambda);
    double min_eig = std::numeric_limits<double>::infinity();
    for (Index k = 0; k <= 8; ++k) {
      const Matrix& P = aug.pseudo_precision(k);
      CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues().minCoeff());
    }
    CHECK(min_eig >= prev_min);
    prev_min = min_eig;
  }
  // Large enough lambda makes every precision SPD.
  double worst = 0.0;
  const AffineAugmentedSSM base = build_modified_model(lin, 1000.0);
  for (Index k = 0; k <= 8; ++k) {
    const Matrix raw = base.pseudo_precision(k) - 1000.0 * Matrix::Identity(5, 5);
    worst = std::max(worst, -Eigen::SelfAdjointEigenSolver<Matrix>(raw).eigenvalues().minCoeff());
  }
  const AffineAugmentedSSM big = build_modified_model(lin, worst + 1e-6);
  for (Index k = 0; k <= 8; ++k) {
    CHECK(Eigen::LLT<Matrix>(big.pseudo_precision(k)).info() == Eigen::Success);
  }
}

TEST_CASE("rebuilding is deterministic and thread-count independent") {
  Rng rng(36);
  const NonlinearSSM ct = make_coordinated_turn_model();
  const Trajectory nominal = testing_support::random_trajectory(rng, 5, 40, 2.0);
  const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 40);
  const auto a = linearize(ct, nominal, ys, 1);
  const auto b = linearize(ct, nominal, ys, 1);
  const auto c = linearize(ct, nominal, ys, 4);
  for (std::size_t i = 0; i < a->transitions.size(); ++i) {
    for (const auto* other : {b.get(), c.get()}) {
      CHECK(a->transitions[i].F == other->transitions[i].F);
      CHECK(a->transitions[i].b == other->transitions[i].b);
      CHECK(a->transitions[i].Psi == other->transitions[i].Psi);
      CHECK(a->observations[i].H == other->observations[i].H);
      CHECK(a->observations[i].c == other->observations[i].c);
      CHECK(a->observations[i].Gamma == other->observations[i].Gamma);
    }
  }
}

namespace {

// S(x) = 1/2 sum |x_k - f(x_{k-1})|^2_{Q^-1} and its quadratic stand-in
// sum |x_k - F x_{k-1} - b|^2_{Q^-1}/2 + sum |x_{k-1} - xh_{k-1}|^2_{Psi}/2.
double transition_sum(const NonlinearSSM& model, const Trajectory& x) {
  double s = 0.0;
  for (Index k = 1; k <= x.steps(); ++k) {
    s += 0.5 * mahalanobis_sq(model.Q_llt(), Vector(x.state(k)) - model.transition()(Vector(x.state(k - 1))));
  }
  return s;
}

double transition_quadratic(const NonlinearSSM& model, const std::vector<TransitionTerm>& terms,
                            const Trajectory& nominal, const Trajectory& x) {
  double s = 0.0;
  for (Index k = 1; k <= x.steps(); ++k) {
    const auto& t = terms[static_cast<std::size_t>(k - 1)];
    const Vector r = Vector(x.state(k)) - t.F * x.state(k - 1) - t.b;
    const Vector dx = Vector(x.state(k - 1)) - Vector(nominal.state(k - 1));
    s += 0.5 * mahalanobis_sq(model.Q_llt(), r) + 0.5 * dx.dot(t.Psi * dx);
  }
  return s;
}

double observation_sum(const NonlinearSSM& model, const Trajectory& x, const MeasurementSeq& ys) {
  double s = 0.0;
  for (Index k = 1; k <= x.steps(); ++k) {
    s += 0.5 * mahalanobis_sq(model.R_llt(), Vector(ys.at(k)) - model.observation()(Vector(x.state(k))));
  }
  return s;
}

double observation_quadratic(const NonlinearSSM& model, const std::vector<ObservationTerm>& terms,
                             const Trajectory& nominal, const Trajectory& x, const MeasurementSeq& ys) {
  double s = 0.0;
  for (Index k = 1; k <= x.steps(); ++k) {
    const auto& o = terms[static_cast<std::size_t>(k - 1)];
    const Vector r = Vector(ys.at(k)) - o.H * x.state(k) - o.c;
    const Vector dx = Vector(x.state(k)) - Vector(nominal.state(k));
    s += 0.5 * mahalanobis_sq(model.R_llt(), r) + 0.5 * dx.dot(o.Gamma * dx);
  }
  return s;
}

// The decomposition reproduces value, gradient and Hessian at the nominal
// iff the mismatch along any ray vanishes to third order: halving the
// offset divides it by 8 (up to rounding).
template <class Exact, class Quad>
void check_third_order(const Exact& exact, const Quad& quad, const Trajectory& nominal, Rng& rng) {
  CHECK(std::abs(exact(nominal) - quad(nominal)) <= 1e-12 * std::max(1.0, std::abs(exact(nominal))));
  const Matrix dir = rng.mat(nominal.dim(), nominal.steps() + 1);
  auto mismatch = [&](double eps) {
    const Trajectory x(nominal.matrix() + eps * dir);
    return std::abs(exact(x) - quad(x));
  };
  const double e1 = mismatch(2e-2);
  const double e2 = mismatch(1e-2);
  CHECK(e1 > 0.0);
  CHECK(e1 / e2 > 6.0);
  CHECK(e1 / e2 < 10.0);
}

}  // namespace

TEST_CASE("transition and observation decompositions agree with the exact terms to second order") {
  Rng rng(37);
  for (Index d : {1, 2, 3}) {
    const NonlinearSSM model = testing_support::random_nonlinear_model(rng, d, 2, 1.0);
    const Trajectory nominal = testing_support::random_trajectory(rng, d, 4);
    const MeasurementSeq ys = testing_support::random_measurements(rng, 2, 4);
    const auto tr = expand_transition(model, nominal);
    const auto ob = expand_observation(model, nominal, ys);
    check_third_order([&](const Trajectory& x) { return transition_sum(model, x); },
                      [&](const Trajectory& x) { return transition_quadratic(model, tr, nominal, x); }, nominal, rng);
    check_third_order([&](const Trajectory& x) { return observation_sum(model, x, ys); },
                      [&](const Trajectory& x) { return observation_quadratic(model, ob, nominal, x, ys); },
                      nominal, rng);
  }
}
