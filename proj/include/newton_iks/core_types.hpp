#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "newton_iks/autodiff.hpp"
#include "newton_iks/errors.hpp"

namespace newton_iks {

using Index = Eigen::Index;

/// (P + P^T) / 2. Applied after every covariance update in the library.
inline Matrix symmetrize(const Matrix& p) { return 0.5 * (p + p.transpose()); }

/// States x_0 ... x_N stored column-wise in a d x (N+1) matrix.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(Matrix states);
  Trajectory(Index dim, Index steps);  // zero-filled

  Index dim() const noexcept { return states_.rows(); }
  /// N, the number of transitions; there are N+1 states.
  Index steps() const noexcept { return states_.cols() - 1; }

  auto state(Index k) { return states_.col(k); }
  auto state(Index k) const { return states_.col(k); }

  const Matrix& matrix() const noexcept { return states_; }

  /// The (N+1)*d decision vector [x_0; x_1; ...; x_N].
  Vector stacked() const;
  static Trajectory from_stacked(const Vector& stacked, Index dim);

  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.states_.rows() == b.states_.rows() && a.states_.cols() == b.states_.cols() &&
           a.states_ == b.states_;
  }

 private:
  Matrix states_;
};

/// Measurements y_1 ... y_N; `at(k)` is 1-based to match the state index.
class MeasurementSeq {
 public:
  MeasurementSeq() = default;
  explicit MeasurementSeq(Matrix measurements);

  Index dim() const noexcept { return data_.rows(); }
  Index steps() const noexcept { return data_.cols(); }

  auto at(Index k) const { return data_.col(k - 1); }
  auto at(Index k) { return data_.col(k - 1); }

  const Matrix& matrix() const noexcept { return data_; }

  friend bool operator==(const MeasurementSeq& a, const MeasurementSeq& b) {
    return a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() && a.data_ == b.data_;
  }

 private:
  Matrix data_;
};

struct GaussianBelief {
  Vector mean;
  Matrix cov;

  /// Symmetrizes `cov` and clamps eigenvalues below zero to zero.
  static GaussianBelief hygienic(Vector mean, const Matrix& cov);
};

/// Nonlinear state-space model with additive Gaussian noise:
///   x_k = f(x_{k-1}) + q,  q ~ N(0, Q)
///   y_k = h(x_k) + r,      r ~ N(0, R)
///   x_0 ~ N(m0, P0)
/// Construction validates dimensions and factorizes Q, R and P0; the
/// factorizations are kept for Mahalanobis norms and solves.
class NonlinearSSM {
 public:
  NonlinearSSM(SmoothFunction f, SmoothFunction h, Matrix Q, Matrix R, Vector m0, Matrix P0);

  Index state_dim() const noexcept { return m0_.size(); }
  Index meas_dim() const noexcept { return R_.rows(); }

  const SmoothFunction& transition() const noexcept { return f_; }
  const SmoothFunction& observation() const noexcept { return h_; }

  const Matrix& Q() const noexcept { return Q_; }
  const Matrix& R() const noexcept { return R_; }
  const Vector& m0() const noexcept { return m0_; }
  const Matrix& P0() const noexcept { return P0_; }

  const Eigen::LLT<Matrix>& Q_llt() const noexcept { return Q_llt_; }
  const Eigen::LLT<Matrix>& R_llt() const noexcept { return R_llt_; }
  const Eigen::LLT<Matrix>& P0_llt() const noexcept { return P0_llt_; }

  /// Cached inverses; d and m are small.
  const Matrix& Q_inv() const noexcept { return Q_inv_; }
  const Matrix& R_inv() const noexcept { return R_inv_; }
  const Matrix& P0_inv() const noexcept { return P0_inv_; }

 private:
  SmoothFunction f_;
  SmoothFunction h_;
  Matrix Q_, R_;
  Vector m0_;
  Matrix P0_;
  Eigen::LLT<Matrix> Q_llt_, R_llt_, P0_llt_;
  Matrix Q_inv_, R_inv_, P0_inv_;
};

NonlinearSSM make_model(Index d, Index m, SmoothFunction f, SmoothFunction h, Matrix Q, Matrix R,
                        Vector m0, Matrix P0);

/// x^T A^{-1} x using the Cholesky factor of A.
double mahalanobis_sq(const Eigen::LLT<Matrix>& a_llt, const Vector& x);

/// max_k ||a_k - b_k||_inf.
double traj_diff_norm(const Trajectory& a, const Trajectory& b);

void require_same_shape(const Trajectory& a, const Trajectory& b, const char* context);
void require_compatible(const NonlinearSSM& model, const Trajectory& traj, const MeasurementSeq& ys,
                        const char* context);

}  // namespace newton_iks
