#include "newton_iks/strategies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "newton_iks/objective.hpp"

namespace newton_iks {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::optional<StepProposal> try_propose(StepModel& stepper, double lambda) {
  try {
    return stepper.propose(lambda);
  } catch (const InsufficientRegularization&) {
    return std::nullopt;
  }
}

bool is_descent(const std::optional<StepProposal>& p) { return p && p->expected_reduction > 0.0; }

bool converged(double before, double after, double rtol) {
  return before - after < rtol * std::max(std::abs(before), std::numeric_limits<double>::min());
}

}  // namespace

void LineSearchConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("line search: beta must lie in (0, 1)");
  }
  if (max_backtracks < 1) {
    throw std::invalid_argument("line search: max_backtracks must be positive");
  }
  if (outer_iters < 1) {
    throw std::invalid_argument("line search: outer_iters must be positive");
  }
  if (!(lambda_init > 0.0) || !(lambda_init <= lambda_cap) || !(lambda_mult > 1.0)) {
    throw std::invalid_argument("line search: need 0 < lambda_init <= lambda_cap and lambda_mult > 1");
  }
}

void TrustRegionConfig::validate() const {
  if (!(lambda0 > 0.0)) {
    throw std::invalid_argument("trust region: lambda0 must be positive");
  }
  if (!(nu_init > 1.0)) {
    throw std::invalid_argument("trust region: nu must exceed 1");
  }
  if (outer_iters < 1) {
    throw std::invalid_argument("trust region: outer_iters must be positive");
  }
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::MaxIterations:
      return "max-iterations";
    case Termination::Converged:
      return "converged";
    case Termination::Stalled:
      return "stalled";
    case Termination::RegularizationExhausted:
      return "regularization-exhausted";
  }
  return "unknown";
}

std::vector<double> RunReport::costs() const {
  std::vector<double> out;
  out.reserve(iterations.size());
  for (const auto& it : iterations) {
    out.push_back(it.cost);
  }
  return out;
}

double trust_region_multiplier(double rho) {
  const double t = 2.0 * rho - 1.0;
  return std::max(1.0 / 3.0, 1.0 - t * t * t);
}

// ---------------------------------------------------------------------------

RecursiveStepModel::RecursiveStepModel(NonlinearSSM model, MeasurementSeq ys, SmootherOptions options)
    : model_(std::move(model)), ys_(std::move(ys)), options_(options) {}

double RecursiveStepModel::cost(const Trajectory& traj) { return eval_cost(model_, traj, ys_).total; }

void RecursiveStepModel::relinearize(const Trajectory& nominal) { lin_ = linearize(model_, nominal, ys_); }

StepProposal RecursiveStepModel::propose(double lambda) {
  if (!lin_) {
    throw std::logic_error("RecursiveStepModel::propose before relinearize");
  }
  const AffineAugmentedSSM aug = build_modified_model(lin_, lambda);
  SmootherResult res = newton_iks_iteration(aug, ys_, options_);
  const double expected = expected_reduction(aug, aug.nominal(), res.smoothed, ys_);
  return {std::move(res.smoothed), expected};
}

BatchStepModel::BatchStepModel(NonlinearSSM model, MeasurementSeq ys) : model_(std::move(model)), ys_(std::move(ys)) {}

double BatchStepModel::cost(const Trajectory& traj) { return eval_cost(model_, traj, ys_).total; }

void BatchStepModel::relinearize(const Trajectory& nominal) {
  nominal_ = nominal;
  system_ = assemble_dense(model_, nominal, ys_);
}

StepProposal BatchStepModel::propose(double lambda) {
  if (system_.grad.size() == 0) {
    throw std::logic_error("BatchStepModel::propose before relinearize");
  }
  Trajectory cand = batch_newton_step(system_, nominal_, lambda);
  const double expected = dense_expected_reduction(system_, nominal_, cand, lambda);
  return {std::move(cand), expected};
}

// ---------------------------------------------------------------------------

RunReport run_line_search(StepModel& stepper, const Trajectory& x0, const LineSearchConfig& cfg) {
  cfg.validate();
  RunReport report;
  Trajectory x = x0;
  double cost_x = stepper.cost(x);
  report.initial_cost = cost_x;
  bool linearized = false;

  for (int i = 0; i < cfg.outer_iters; ++i) {
    const auto start = Clock::now();
    IterationRecord rec;
    rec.iter = i + 1;
    if (!linearized) {
      stepper.relinearize(x);
      linearized = true;
    }

    double lambda = 0.0;
    rec.lambdas_tried.push_back(lambda);
    auto proposal = try_propose(stepper, lambda);
    if (!is_descent(proposal)) {
      // lambda_j = lambda_init * mult^j; the ladder keeps going while the
      // current lambda is within the cap, so the last value tried is the
      // first one past it.
      const double cap = cfg.lambda_cap * (1.0 + 1e-12);
      int j = 0;
      lambda = cfg.lambda_init;
      rec.lambdas_tried.push_back(lambda);
      proposal = try_propose(stepper, lambda);
      while (!is_descent(proposal) && lambda <= cap) {
        ++j;
        lambda = cfg.lambda_init * std::pow(cfg.lambda_mult, j);
        rec.lambdas_tried.push_back(lambda);
        proposal = try_propose(stepper, lambda);
      }
    }
    rec.lambda = lambda;

    if (!is_descent(proposal)) {
      rec.cost = cost_x;
      rec.alpha_or_rho = 0.0;
      rec.accepted = false;
      rec.expected_reduction = proposal ? proposal->expected_reduction : std::numeric_limits<double>::quiet_NaN();
      rec.wall_ms = elapsed_ms(start);
      report.iterations.push_back(std::move(rec));
      report.termination = Termination::RegularizationExhausted;
      break;
    }
    rec.expected_reduction = proposal->expected_reduction;

    const Matrix direction = proposal->candidate.matrix() - x.matrix();
    double alpha = 1.0;
    Trajectory trial = proposal->candidate;
    double cost_trial = stepper.cost(trial);
    for (int m = 0; cost_trial >= cost_x && m <= cfg.max_backtracks; ++m) {
      alpha *= cfg.beta;
      trial = Trajectory(x.matrix() + alpha * direction);
      cost_trial = stepper.cost(trial);
    }

    rec.alpha_or_rho = alpha;
    rec.accepted = cost_trial < cost_x;
    const double before = cost_x;
    if (rec.accepted) {
      x = std::move(trial);
      cost_x = cost_trial;
      linearized = false;
    }
    rec.cost = cost_x;
    rec.wall_ms = elapsed_ms(start);
    report.iterations.push_back(std::move(rec));
    report.final_lambda = lambda;

    if (cfg.stop_on_convergence) {
      if (!report.iterations.back().accepted) {
        report.termination = Termination::Stalled;
        break;
      }
      if (converged(before, cost_x, cfg.convergence_rtol)) {
        report.termination = Termination::Converged;
        break;
      }
    }
  }
  report.final_trajectory = std::move(x);
  return report;
}

RunReport run_trust_region(StepModel& stepper, const Trajectory& x0, const TrustRegionConfig& cfg) {
  cfg.validate();
  RunReport report;
  Trajectory x = x0;
  double cost_x = stepper.cost(x);
  report.initial_cost = cost_x;
  double lambda = cfg.lambda0;
  double nu = cfg.nu_init;
  bool linearized = false;

  for (int i = 0; i < cfg.outer_iters; ++i) {
    const auto start = Clock::now();
    IterationRecord rec;
    rec.iter = i + 1;
    rec.lambda = lambda;
    rec.lambdas_tried.push_back(lambda);
    if (!linearized) {
      stepper.relinearize(x);
      linearized = true;
    }

    const auto proposal = try_propose(stepper, lambda);
    double rho = std::numeric_limits<double>::quiet_NaN();
    double cost_cand = std::numeric_limits<double>::quiet_NaN();
    bool accept = false;
    if (proposal) {
      rec.expected_reduction = proposal->expected_reduction;
      cost_cand = stepper.cost(proposal->candidate);
      const double actual = cost_x - cost_cand;
      if (std::abs(proposal->expected_reduction) >= 1e-300) {
        rho = actual / proposal->expected_reduction;
        accept = rho > 0.0 && proposal->expected_reduction > 0.0;
      }
    } else {
      rec.expected_reduction = std::numeric_limits<double>::quiet_NaN();
    }

    const double before = cost_x;
    if (accept) {
      lambda *= trust_region_multiplier(rho);
      nu = cfg.nu_init;
      x = proposal->candidate;
      cost_x = cost_cand;
      linearized = false;
    } else {
      lambda *= nu;
      nu *= 2.0;
    }
    rec.alpha_or_rho = rho;
    rec.accepted = accept;
    rec.cost = cost_x;
    rec.wall_ms = elapsed_ms(start);
    report.iterations.push_back(std::move(rec));

    if (cfg.stop_on_convergence && accept && converged(before, cost_x, cfg.convergence_rtol)) {
      report.termination = Termination::Converged;
      break;
    }
  }
  report.final_lambda = lambda;
  report.final_trajectory = std::move(x);
  return report;
}

RunReport ls_newton_iks(const NonlinearSSM& model, const Trajectory& x0, const MeasurementSeq& ys,
                        const LineSearchConfig& cfg) {
  RecursiveStepModel stepper(model, ys);
  return run_line_search(stepper, x0, cfg);
}

RunReport tr_newton_iks(const NonlinearSSM& model, const Trajectory& x0, const MeasurementSeq& ys,
                        const TrustRegionConfig& cfg) {
  RecursiveStepModel stepper(model, ys);
  return run_trust_region(stepper, x0, cfg);
}

RunReport ls_batch(const NonlinearSSM& model, const Trajectory& x0, const MeasurementSeq& ys,
                   const LineSearchConfig& cfg) {
  BatchStepModel stepper(model, ys);
  return run_line_search(stepper, x0, cfg);
}

RunReport tr_batch(const NonlinearSSM& model, const Trajectory& x0, const MeasurementSeq& ys,
                   const TrustRegionConfig& cfg) {
  BatchStepModel stepper(model, ys);
  return run_trust_region(stepper, x0, cfg);
}

}  // namespace newton_iks
