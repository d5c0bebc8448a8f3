#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "newton_iks/core_types.hpp"

namespace newton_iks {

// ---------------------------------------------------------------------------
// Coordinated turn with bearings-only sensors.
// State [p_x, p_y, v_x, v_y, omega].

/// sin(a) / a, with a series branch near zero so that derivatives stay exact.
template <class T>
T sin_over(const T& a) {
  using std::sin;
  if (std::abs(value_of(a)) < 0.05) {
    const T a2 = a * a;
    return 1.0 - a2 / 6.0 * (1.0 - a2 / 20.0 * (1.0 - a2 / 42.0 * (1.0 - a2 / 72.0)));
  }
  return sin(a) / a;
}

/// (1 - cos(a)) / a, same treatment.
template <class T>
T one_minus_cos_over(const T& a) {
  using std::cos;
  if (std::abs(value_of(a)) < 0.05) {
    const T a2 = a * a;
    return a / 2.0 * (1.0 - a2 / 12.0 * (1.0 - a2 / 30.0 * (1.0 - a2 / 56.0 * (1.0 - a2 / 90.0))));
  }
  return (1.0 - cos(a)) / a;
}

/// Closed-form constant-turn-rate motion over dt. At omega = 0 this is
/// exactly constant-velocity motion.
template <class T>
VecX<T> ct_transition(const VecX<T>& x, double dt) {
  using std::cos;
  using std::sin;
  const T w = x(4);
  const T a = w * dt;
  const T s = dt * sin_over(a);
  const T c = dt * one_minus_cos_over(a);
  const T cw = cos(a);
  const T sw = sin(a);
  VecX<T> out(5);
  out(0) = x(0) + s * x(2) - c * x(3);
  out(1) = x(1) + c * x(2) + s * x(3);
  out(2) = cw * x(2) - sw * x(3);
  out(3) = sw * x(2) + cw * x(3);
  out(4) = w;
  return out;
}

/// Bearing from each sensor to the target position. Throws IllPosedBearing
/// when the target coincides with a sensor.
template <class T>
VecX<T> ct_observation(const VecX<T>& x, const std::vector<Eigen::Vector2d>& sensors) {
  using std::atan2;
  VecX<T> out(static_cast<Index>(sensors.size()));
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const T dx = x(0) - sensors[i].x();
    const T dy = x(1) - sensors[i].y();
    if (value_of(dx) == 0.0 && value_of(dy) == 0.0) {
      throw IllPosedBearing("target coincides with sensor " + std::to_string(i));
    }
    out(static_cast<Index>(i)) = atan2(dy, dx);
  }
  return out;
}

struct CoordinatedTurnConfig {
  double dt = 0.1;
  double q_pos = 0.1;
  double q_omega = 0.01;
  std::vector<Eigen::Vector2d> sensors{Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(-1.5, 0.5)};
  double bearing_var = 0.5 * 0.5;
  Vector m0 = (Vector(5) << 0.0, 0.0, 1.0, 0.0, 0.1).finished();
  Vector p0_diag = (Vector(5) << 0.5, 0.5, 0.5, 0.5, 0.05).finished();

  void validate() const;
};

/// Q for white-noise acceleration on the velocities and a random walk on
/// the turn rate.
Matrix ct_process_noise(double dt, double q_pos, double q_omega);

/// Analytic Jacobian of the bearings, attached to the observation function.
Matrix ct_observation_jacobian(const Vector& x, const std::vector<Eigen::Vector2d>& sensors);

NonlinearSSM make_coordinated_turn_model(const CoordinatedTurnConfig& cfg = {});

// ---------------------------------------------------------------------------
// Linear-Gaussian models: f(x) = A x + a, h(x) = H x + e.

NonlinearSSM make_linear_gaussian_model(Matrix A, Vector a, Matrix H, Vector e, Matrix Q, Matrix R, Vector m0,
                                        Matrix P0);

/// 2D constant velocity with noisy position measurements (d = 4, m = 2).
NonlinearSSM make_constant_velocity_model(double dt = 0.1, double q = 0.1, double r = 0.05);

// ---------------------------------------------------------------------------

struct SimOutput {
  Trajectory true_states;
  MeasurementSeq measurements;
  std::uint64_t seed = 0;
  bool noiseless = false;
};

/// Rolls the model forward. Gaussian draws come from std::mt19937_64 seeded
/// with `seed`, transformed by std::normal_distribution<double>, and scaled
/// by the Cholesky factors of P0, Q and R in that order per step. With
/// `noiseless`, x_0 = m0 and all noise is zero.
SimOutput simulate(const NonlinearSSM& model, Index steps, std::uint64_t seed, bool noiseless = false);

/// x_0 = m0, x_k = f(x_{k-1}).
Trajectory prior_rollout(const NonlinearSSM& model, Index steps);

/// Root-mean-square Euclidean error of the first two state components.
double position_rmse(const Trajectory& estimate, const Trajectory& truth);

}  // namespace newton_iks
