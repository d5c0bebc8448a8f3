#pragma once

#include <memory>
#include <vector>

#include "newton_iks/core_types.hpp"
#include "newton_iks/parallel.hpp"

namespace newton_iks {

/// Second-order expansion of the transition x_{k-1} -> x_k around the nominal.
///   F   = df/dx(xh_{k-1})
///   b   = f(xh_{k-1}) - F xh_{k-1}
///   Psi = -d2f/dx2(xh_{k-1}) . Q^{-1} (xh_k - f(xh_{k-1}))
struct TransitionTerm {
  Matrix F;
  Vector b;
  Matrix Psi;
};

/// Second-order expansion of the observation at step k.
///   H     = dh/dx(xh_k)
///   c     = h(xh_k) - H xh_k
///   Gamma = -d2h/dx2(xh_k) . R^{-1} (y_k - h(xh_k))
struct ObservationTerm {
  Matrix H;
  Vector c;
  Matrix Gamma;
};

/// Lambda-independent part of the modified affine model.
///
/// `transitions[k-1]` and `observations[k-1]` belong to step k = 1..N.
struct Linearization {
  NonlinearSSM model;
  Trajectory nominal;
  std::vector<TransitionTerm> transitions;
  std::vector<ObservationTerm> observations;
};

/// Affine model with pseudo measurements of the nominal, for one lambda.
///
/// Pseudo precisions are stored directly (never their inverses):
///   Lambda_0 = Psi_0 + lambda I
///   Lambda_k = Psi_k + Gamma_k + lambda I,  0 < k < N
///   Lambda_N = Gamma_N + lambda I
/// and the modified prior is Omega0 = (P0^-1 + Lambda_0)^-1,
/// tau0 = Omega0 (P0^-1 m0 + Lambda_0 xh_0).
class AffineAugmentedSSM {
 public:
  AffineAugmentedSSM(std::shared_ptr<const Linearization> base, double lambda);

  const NonlinearSSM& model() const noexcept { return base_->model; }
  const Trajectory& nominal() const noexcept { return base_->nominal; }
  const Linearization& linearization() const noexcept { return *base_; }
  Index steps() const noexcept { return nominal().steps(); }
  Index dim() const noexcept { return nominal().dim(); }
  double lambda() const noexcept { return lambda_; }

  /// Transition into step k (k = 1..N).
  const TransitionTerm& transition(Index k) const { return base_->transitions[static_cast<std::size_t>(k - 1)]; }
  /// Observation at step k (k = 1..N).
  const ObservationTerm& observation(Index k) const { return base_->observations[static_cast<std::size_t>(k - 1)]; }
  /// Pseudo precision Lambda_k, k = 0..N.
  const Matrix& pseudo_precision(Index k) const { return precisions_[static_cast<std::size_t>(k)]; }
  /// True when Lambda_k is exactly zero (no pseudo information at step k).
  bool pseudo_is_zero(Index k) const { return zero_[static_cast<std::size_t>(k)]; }

  const Vector& tau0() const noexcept { return tau0_; }
  const Matrix& Omega0() const noexcept { return Omega0_; }

 private:
  std::shared_ptr<const Linearization> base_;
  double lambda_;
  std::vector<Matrix> precisions_;
  std::vector<bool> zero_;
  Vector tau0_;
  Matrix Omega0_;
};

std::vector<TransitionTerm> expand_transition(const NonlinearSSM& model, const Trajectory& nominal,
                                              std::size_t threads = configured_threads());

std::vector<ObservationTerm> expand_observation(const NonlinearSSM& model, const Trajectory& nominal,
                                                const MeasurementSeq& ys, std::size_t threads = configured_threads());

std::shared_ptr<const Linearization> linearize(const NonlinearSSM& model, const Trajectory& nominal,
                                               const MeasurementSeq& ys, std::size_t threads = configured_threads());

/// Throws PriorNotPD when P0^-1 + Lambda_0 is not SPD.
AffineAugmentedSSM build_modified_model(std::shared_ptr<const Linearization> base, double lambda);

AffineAugmentedSSM build_modified_model(const NonlinearSSM& model, const Trajectory& nominal,
                                        const MeasurementSeq& ys, double lambda);

}  // namespace newton_iks
