#pragma once

#include <memory>
#include <string>
#include <vector>

#include "newton_iks/batch_smoother.hpp"
#include "newton_iks/core_types.hpp"
#include "newton_iks/linearize.hpp"
#include "newton_iks/recursive_smoother.hpp"

namespace newton_iks {

struct LineSearchConfig {
  double beta = 0.5;
  int max_backtracks = 20;
  int outer_iters = 30;
  double lambda_init = 1e-6;
  double lambda_mult = 10.0;
  double lambda_cap = 1e16;
  /// Stop once an accepted step lowers the cost by less than
  /// convergence_rtol relative, or a step is rejected. Off in benchmarks.
  bool stop_on_convergence = true;
  double convergence_rtol = 1e-10;

  void validate() const;
};

struct TrustRegionConfig {
  double lambda0 = 1e-2;
  double nu_init = 2.0;
  int outer_iters = 30;
  bool stop_on_convergence = true;
  double convergence_rtol = 1e-10;

  void validate() const;
};

enum class Termination { MaxIterations, Converged, Stalled, RegularizationExhausted };

std::string to_string(Termination t);

struct IterationRecord {
  int iter = 0;
  /// L at the iterate after this iteration.
  double cost = 0.0;
  /// Regularization of the pass that produced the direction (LS) or that
  /// was tried in this iteration (TR).
  double lambda = 0.0;
  /// Step size alpha (LS) or gain ratio rho (TR; NaN when the pass failed).
  double alpha_or_rho = 0.0;
  bool accepted = false;
  double expected_reduction = 0.0;
  double wall_ms = 0.0;
  /// Every lambda handed to the inner step in this iteration, in order.
  std::vector<double> lambdas_tried;
};

struct RunReport {
  double initial_cost = 0.0;
  std::vector<IterationRecord> iterations;
  Trajectory final_trajectory;
  double final_lambda = 0.0;
  Termination termination = Termination::MaxIterations;

  std::vector<double> costs() const;
};

struct StepProposal {
  Trajectory candidate;
  /// Ltilde(nominal) - Ltilde(candidate) for the model at this lambda.
  double expected_reduction = 0.0;
};

/// Inner Newton step used by the globalization loops. Implementations
/// throw InsufficientRegularization from propose() when lambda is too small
/// for the step to exist.
class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual double cost(const Trajectory& traj) = 0;
  virtual void relinearize(const Trajectory& nominal) = 0;
  virtual StepProposal propose(double lambda) = 0;
};

/// Newton-IKS: the step is one recursive smoother pass over the modified
/// affine model.
class RecursiveStepModel final : public StepModel {
 public:
  RecursiveStepModel(NonlinearSSM model, MeasurementSeq ys, SmootherOptions options = {});
  double cost(const Trajectory& traj) override;
  void relinearize(const Trajectory& nominal) override;
  StepProposal propose(double lambda) override;

 private:
  NonlinearSSM model_;
  MeasurementSeq ys_;
  SmootherOptions options_;
  std::shared_ptr<const Linearization> lin_;
};

/// Batch Newton: the step solves the dense regularized Newton system.
class BatchStepModel final : public StepModel {
 public:
  BatchStepModel(NonlinearSSM model, MeasurementSeq ys);
  double cost(const Trajectory& traj) override;
  void relinearize(const Trajectory& nominal) override;
  StepProposal propose(double lambda) override;

 private:
  NonlinearSSM model_;
  MeasurementSeq ys_;
  Trajectory nominal_;
  DenseSystem system_;
};

/// Backtracking line search with lambda escalation on a non-descent or
/// failed step.
RunReport run_line_search(StepModel& stepper, const Trajectory& x0, const LineSearchConfig& cfg);

/// Levenberg-Marquardt style trust region driven by the gain ratio rho.
RunReport run_trust_region(StepModel& stepper, const Trajectory& x0, const TrustRegionConfig& cfg);

/// max{1/3, 1 - (2 rho - 1)^3}: lambda multiplier after an accepted step.
double trust_region_multiplier(double rho);

RunReport ls_newton_iks(const NonlinearSSM& model, const Trajectory& x0, const MeasurementSeq& ys,
                        const LineSearchConfig& cfg = {});
RunReport tr_newton_iks(const NonlinearSSM& model, const Trajectory& x0, const MeasurementSeq& ys,
                        const TrustRegionConfig& cfg = {});
RunReport ls_batch(const NonlinearSSM& model, const Trajectory& x0, const MeasurementSeq& ys,
                   const LineSearchConfig& cfg = {});
RunReport tr_batch(const NonlinearSSM& model, const Trajectory& x0, const MeasurementSeq& ys,
                   const TrustRegionConfig& cfg = {});

}  // namespace newton_iks
