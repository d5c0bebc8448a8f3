#include "newton_iks/models.hpp"

#include <stdexcept>
#include <string>

namespace newton_iks {

void CoordinatedTurnConfig::validate() const {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("coordinated turn: dt must be positive");
  }
  if (!(q_pos > 0.0) || !(q_omega > 0.0)) {
    throw std::invalid_argument("coordinated turn: q_pos and q_omega must be positive");
  }
  if (sensors.empty()) {
    throw std::invalid_argument("coordinated turn: at least one sensor is required");
  }
  if (!(bearing_var > 0.0)) {
    throw std::invalid_argument("coordinated turn: bearing variance must be positive");
  }
  if (m0.size() != 5 || p0_diag.size() != 5) {
    throw DimensionMismatch("coordinated turn: m0 and P0 diagonal need 5 entries");
  }
}

Matrix ct_process_noise(double dt, double q_pos, double q_omega) {
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;
  Matrix Q = Matrix::Zero(5, 5);
  Q(0, 0) = Q(1, 1) = q_pos * dt3 / 3.0;
  Q(2, 2) = Q(3, 3) = q_pos * dt;
  Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = q_pos * dt2 / 2.0;
  Q(4, 4) = q_omega * dt;
  return Q;
}

Matrix ct_observation_jacobian(const Vector& x, const std::vector<Eigen::Vector2d>& sensors) {
  Matrix jac = Matrix::Zero(static_cast<Index>(sensors.size()), x.size());
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const double dx = x(0) - sensors[i].x();
    const double dy = x(1) - sensors[i].y();
    const double r2 = dx * dx + dy * dy;
    if (r2 == 0.0) {
      throw IllPosedBearing("target coincides with sensor " + std::to_string(i));
    }
    jac(static_cast<Index>(i), 0) = -dy / r2;
    jac(static_cast<Index>(i), 1) = dx / r2;
  }
  return jac;
}

NonlinearSSM make_coordinated_turn_model(const CoordinatedTurnConfig& cfg) {
  cfg.validate();
  const double dt = cfg.dt;
  const auto sensors = cfg.sensors;
  const auto m = static_cast<Index>(sensors.size());

  SmoothFunction f(5, 5, [dt](const auto& x) { return ct_transition(x, dt); });
  SmoothFunction h(5, m, [sensors](const auto& x) { return ct_observation(x, sensors); });
  h.with_analytic_jacobian([sensors](const Vector& x) { return ct_observation_jacobian(x, sensors); });

  return make_model(5, m, std::move(f), std::move(h), ct_process_noise(dt, cfg.q_pos, cfg.q_omega),
                    cfg.bearing_var * Matrix::Identity(m, m), cfg.m0, Matrix(cfg.p0_diag.asDiagonal()));
}

NonlinearSSM make_linear_gaussian_model(Matrix A, Vector a, Matrix H, Vector e, Matrix Q, Matrix R, Vector m0,
                                        Matrix P0) {
  const Index d = A.rows();
  const Index m = H.rows();
  if (A.cols() != d || a.size() != d || H.cols() != d || e.size() != m) {
    throw DimensionMismatch("linear-Gaussian model: inconsistent A, a, H, e shapes");
  }
  SmoothFunction f(d, d, [A, a](const auto& x) {
    using T = typename std::decay_t<decltype(x)>::Scalar;
    return VecX<T>(A.template cast<T>() * x + a.template cast<T>());
  });
  f.with_analytic_jacobian([A](const Vector&) { return A; });
  SmoothFunction h(d, m, [H, e](const auto& x) {
    using T = typename std::decay_t<decltype(x)>::Scalar;
    return VecX<T>(H.template cast<T>() * x + e.template cast<T>());
  });
  h.with_analytic_jacobian([H](const Vector&) { return H; });
  return make_model(d, m, std::move(f), std::move(h), std::move(Q), std::move(R), std::move(m0), std::move(P0));
}

NonlinearSSM make_constant_velocity_model(double dt, double q, double r) {
  Matrix A = Matrix::Identity(4, 4);
  A(0, 2) = A(1, 3) = dt;
  Matrix Q = Matrix::Zero(4, 4);
  const double dt2 = dt * dt;
  Q(0, 0) = Q(1, 1) = q * dt2 * dt / 3.0;
  Q(2, 2) = Q(3, 3) = q * dt;
  Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = q * dt2 / 2.0;
  Matrix H = Matrix::Zero(2, 4);
  H(0, 0) = H(1, 1) = 1.0;
  const Vector m0 = (Vector(4) << 0.0, 0.0, 1.0, 0.5).finished();
  return make_linear_gaussian_model(std::move(A), Vector::Zero(4), std::move(H), Vector::Zero(2), std::move(Q),
                                    r * Matrix::Identity(2, 2), m0, 0.5 * Matrix::Identity(4, 4));
}

SimOutput simulate(const NonlinearSSM& model, Index steps, std::uint64_t seed, bool noiseless) {
  if (steps < 1) {
    throw std::invalid_argument("simulate: need at least one step");
  }
  const Index d = model.state_dim();
  const Index m = model.meas_dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](const Eigen::LLT<Matrix>& llt, Index dim) -> Vector {
    if (noiseless) {
      return Vector::Zero(dim);
    }
    Vector z(dim);
    for (Index i = 0; i < dim; ++i) {
      z(i) = normal(rng);
    }
    return llt.matrixL() * z;
  };

  Matrix xs(d, steps + 1);
  Matrix ys(m, steps);
  xs.col(0) = model.m0() + draw(model.P0_llt(), d);
  for (Index k = 1; k <= steps; ++k) {
    xs.col(k) = model.transition()(Vector(xs.col(k - 1))) + draw(model.Q_llt(), d);
    ys.col(k - 1) = model.observation()(Vector(xs.col(k))) + draw(model.R_llt(), m);
  }
  return {Trajectory(std::move(xs)), MeasurementSeq(std::move(ys)), seed, noiseless};
}

Trajectory prior_rollout(const NonlinearSSM& model, Index steps) {
  Matrix xs(model.state_dim(), steps + 1);
  xs.col(0) = model.m0();
  for (Index k = 1; k <= steps; ++k) {
    xs.col(k) = model.transition()(Vector(xs.col(k - 1)));
  }
  return Trajectory(std::move(xs));
}

double position_rmse(const Trajectory& estimate, const Trajectory& truth) {
  require_same_shape(estimate, truth, "position_rmse");
  if (estimate.dim() < 2) {
    throw DimensionMismatch("position_rmse needs at least two state components");
  }
  const Matrix diff = estimate.matrix().topRows(2) - truth.matrix().topRows(2);
  return std::sqrt(diff.colwise().squaredNorm().mean());
}

}  // namespace newton_iks
