#include "newton_iks/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "newton_iks/parallel.hpp"

namespace newton_iks {

namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

Eigen::LLT<Matrix> factorize_spd(const Matrix& a, const std::string& name, Index expected_dim) {
  if (a.rows() != expected_dim || a.cols() != expected_dim) {
    throw DimensionMismatch(name + " has shape " + shape(a) + ", expected " + std::to_string(expected_dim) + "x" +
                            std::to_string(expected_dim));
  }
  if (!a.allFinite()) {
    throw NotPositiveDefinite(name, "non-finite entries");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NotPositiveDefinite(name, "matrix is not symmetric");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite(name, "Cholesky factorization failed");
  }
  return llt;
}

}  // namespace

Trajectory::Trajectory(Matrix states) : states_(std::move(states)) {
  if (states_.cols() < 2) {
    throw DimensionMismatch("trajectory needs at least two states (N >= 1)");
  }
  if (states_.rows() < 1) {
    throw DimensionMismatch("trajectory state dimension must be positive");
  }
}

Trajectory::Trajectory(Index dim, Index steps) : Trajectory(Matrix::Zero(dim, steps + 1)) {}

Vector Trajectory::stacked() const { return Eigen::Map<const Vector>(states_.data(), states_.size()); }

Trajectory Trajectory::from_stacked(const Vector& stacked, Index dim) {
  if (dim <= 0 || stacked.size() % dim != 0) {
    throw DimensionMismatch("stacked vector size " + std::to_string(stacked.size()) +
                            " is not a multiple of the state dimension " + std::to_string(dim));
  }
  return Trajectory(Eigen::Map<const Matrix>(stacked.data(), dim, stacked.size() / dim));
}

MeasurementSeq::MeasurementSeq(Matrix measurements) : data_(std::move(measurements)) {
  if (data_.cols() < 1 || data_.rows() < 1) {
    throw DimensionMismatch("measurement sequence must be non-empty");
  }
}

GaussianBelief GaussianBelief::hygienic(Vector mean, const Matrix& cov) {
  Matrix sym = symmetrize(cov);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() < 0.0) {
    const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
    sym = symmetrize(eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose());
  }
  return {std::move(mean), std::move(sym)};
}

NonlinearSSM::NonlinearSSM(SmoothFunction f, SmoothFunction h, Matrix Q, Matrix R, Vector m0, Matrix P0)
    : f_(std::move(f)), h_(std::move(h)), Q_(std::move(Q)), R_(std::move(R)), m0_(std::move(m0)), P0_(std::move(P0)) {
  const Index d = m0_.size();
  const Index m = R_.rows();
  if (d < 1 || m < 1) {
    throw DimensionMismatch("state and measurement dimensions must be positive");
  }
  if (f_.input_dim() != d || f_.output_dim() != d) {
    throw DimensionMismatch("transition function must map R^" + std::to_string(d) + " to itself");
  }
  if (h_.input_dim() != d || h_.output_dim() != m) {
    throw DimensionMismatch("observation function must map R^" + std::to_string(d) + " to R^" + std::to_string(m));
  }
  Q_llt_ = factorize_spd(Q_, "Q", d);
  R_llt_ = factorize_spd(R_, "R", m);
  P0_llt_ = factorize_spd(P0_, "P0", d);
  Q_inv_ = symmetrize(Q_llt_.solve(Matrix::Identity(d, d)));
  R_inv_ = symmetrize(R_llt_.solve(Matrix::Identity(m, m)));
  P0_inv_ = symmetrize(P0_llt_.solve(Matrix::Identity(d, d)));
}

NonlinearSSM make_model(Index d, Index m, SmoothFunction f, SmoothFunction h, Matrix Q, Matrix R, Vector m0,
                        Matrix P0) {
  if (m0.size() != d) {
    throw DimensionMismatch("m0 has size " + std::to_string(m0.size()) + ", expected " + std::to_string(d));
  }
  if (R.rows() != m || R.cols() != m) {
    throw DimensionMismatch("R has shape " + shape(R) + ", expected " + std::to_string(m) + "x" + std::to_string(m));
  }
  return NonlinearSSM(std::move(f), std::move(h), std::move(Q), std::move(R), std::move(m0), std::move(P0));
}

double mahalanobis_sq(const Eigen::LLT<Matrix>& a_llt, const Vector& x) {
  return a_llt.matrixL().solve(x).squaredNorm();
}

void require_same_shape(const Trajectory& a, const Trajectory& b, const char* context) {
  if (a.dim() != b.dim() || a.steps() != b.steps()) {
    throw DimensionMismatch(std::string(context) + ": trajectories differ in shape (" + shape(a.matrix()) + " vs " +
                            shape(b.matrix()) + ")");
  }
}

void require_compatible(const NonlinearSSM& model, const Trajectory& traj, const MeasurementSeq& ys,
                        const char* context) {
  if (traj.dim() != model.state_dim()) {
    throw DimensionMismatch(std::string(context) + ": trajectory dimension " + std::to_string(traj.dim()) +
                            " does not match model state dimension " + std::to_string(model.state_dim()));
  }
  if (ys.dim() != model.meas_dim()) {
    throw DimensionMismatch(std::string(context) + ": measurement dimension " + std::to_string(ys.dim()) +
                            " does not match model measurement dimension " + std::to_string(model.meas_dim()));
  }
  if (ys.steps() != traj.steps()) {
    throw DimensionMismatch(std::string(context) + ": " + std::to_string(ys.steps()) + " measurements for " +
                            std::to_string(traj.steps()) + " transitions");
  }
}

double traj_diff_norm(const Trajectory& a, const Trajectory& b) {
  require_same_shape(a, b, "traj_diff_norm");
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

std::size_t configured_threads() {
  const char* env = std::getenv("NEWTON_IKS_THREADS");
  if (env == nullptr) {
    return 1;
  }
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) {
    return 1;
  }
  return static_cast<std::size_t>(n);
}

}  // namespace newton_iks
