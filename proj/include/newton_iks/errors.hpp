#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace newton_iks {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A model covariance (Q, R or P0) failed the symmetric factorization check.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::string which, const std::string& detail)
      : Error(which + " is not symmetric positive-definite: " + detail), which_(std::move(which)) {}

  const std::string& which() const noexcept { return which_; }

 private:
  std::string which_;
};

/// A function used a non-smooth primitive on a differentiable scalar.
class UnsupportedPrimitive : public Error {
 public:
  using Error::Error;
};

class NonFiniteDerivative : public Error {
 public:
  using Error::Error;
};

/// Bearing requested for a target that sits exactly on a sensor.
class IllPosedBearing : public Error {
 public:
  using Error::Error;
};

/// Common base of the failures that mean "lambda was too small".
///
/// The globalization loops catch this type and escalate the regularization.
class InsufficientRegularization : public Error {
 public:
  using Error::Error;
};

/// P0^-1 + Lambda_0 is not SPD, so the modified prior does not exist.
class PriorNotPD : public InsufficientRegularization {
 public:
  using InsufficientRegularization::InsufficientRegularization;
};

/// A factorization inside the recursive pass failed at step `step()`.
class CovarianceNotPD : public InsufficientRegularization {
 public:
  CovarianceNotPD(std::size_t step, std::string stage)
      : InsufficientRegularization("covariance not positive-definite at step " +
                                   std::to_string(step) + " (" + stage + ")"),
        step_(step),
        stage_(std::move(stage)) {}

  std::size_t step() const noexcept { return step_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::size_t step_;
  std::string stage_;
};

class HessianNotPD : public InsufficientRegularization {
 public:
  using InsufficientRegularization::InsufficientRegularization;
};

}  // namespace newton_iks
