#include "newton_iks/linearize.hpp"

#include <stdexcept>
#include <string>

namespace newton_iks {

std::vector<TransitionTerm> expand_transition(const NonlinearSSM& model, const Trajectory& nominal,
                                              std::size_t threads) {
  if (nominal.dim() != model.state_dim()) {
    throw DimensionMismatch("expand_transition: nominal dimension does not match the model");
  }
  const auto n = static_cast<std::size_t>(nominal.steps());
  std::vector<TransitionTerm> terms(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto k = static_cast<Index>(i) + 1;
    const Vector prev = nominal.state(k - 1);
    const DerivativeBundle fd = derivatives(model.transition(), prev);
    const Vector fx = model.transition()(prev);
    const Vector weighted = model.Q_llt().solve(Vector(nominal.state(k) - fx));
    TransitionTerm& t = terms[i];
    t.F = fd.jacobian;
    t.b = fx - fd.jacobian * prev;
    t.Psi = symmetrize(-tensor_dot(fd.hessian, weighted));
  });
  return terms;
}

std::vector<ObservationTerm> expand_observation(const NonlinearSSM& model, const Trajectory& nominal,
                                                const MeasurementSeq& ys, std::size_t threads) {
  require_compatible(model, nominal, ys, "expand_observation");
  const auto n = static_cast<std::size_t>(nominal.steps());
  std::vector<ObservationTerm> terms(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto k = static_cast<Index>(i) + 1;
    const Vector x = nominal.state(k);
    const DerivativeBundle hd = derivatives(model.observation(), x);
    const Vector hx = model.observation()(x);
    const Vector weighted = model.R_llt().solve(Vector(ys.at(k) - hx));
    ObservationTerm& o = terms[i];
    o.H = hd.jacobian;
    o.c = hx - hd.jacobian * x;
    o.Gamma = symmetrize(-tensor_dot(hd.hessian, weighted));
  });
  return terms;
}

std::shared_ptr<const Linearization> linearize(const NonlinearSSM& model, const Trajectory& nominal,
                                               const MeasurementSeq& ys, std::size_t threads) {
  require_compatible(model, nominal, ys, "linearize");
  return std::make_shared<const Linearization>(Linearization{
      model, nominal, expand_transition(model, nominal, threads), expand_observation(model, nominal, ys, threads)});
}

AffineAugmentedSSM::AffineAugmentedSSM(std::shared_ptr<const Linearization> base, double lambda)
    : base_(std::move(base)), lambda_(lambda) {
  if (!base_) {
    throw std::invalid_argument("AffineAugmentedSSM: null linearization");
  }
  if (!(lambda >= 0.0)) {
    throw std::invalid_argument("AffineAugmentedSSM: lambda must be nonnegative");
  }
  const Index n = steps();
  const Index d = dim();
  const Matrix reg = lambda * Matrix::Identity(d, d);

  precisions_.resize(static_cast<std::size_t>(n + 1));
  zero_.resize(static_cast<std::size_t>(n + 1));
  for (Index k = 0; k <= n; ++k) {
    Matrix p = reg;
    if (k < n) {
      p += base_->transitions[static_cast<std::size_t>(k)].Psi;
    }
    if (k > 0) {
      p += observation(k).Gamma;
    }
    zero_[static_cast<std::size_t>(k)] = (p.array() == 0.0).all();
    precisions_[static_cast<std::size_t>(k)] = std::move(p);
  }

  const NonlinearSSM& m = model();
  const Matrix& lambda0 = precisions_.front();
  if (zero_.front()) {
    Omega0_ = m.P0();
    tau0_ = m.m0();
    return;
  }
  Eigen::LLT<Matrix> llt(m.P0_inv() + lambda0);
  if (llt.info() != Eigen::Success) {
    throw PriorNotPD("P0^-1 + Lambda_0 is not positive-definite at lambda = " + std::to_string(lambda));
  }
  Omega0_ = symmetrize(llt.solve(Matrix::Identity(d, d)));
  tau0_ = llt.solve(Vector(m.P0_inv() * m.m0() + lambda0 * nominal().state(0)));
}

AffineAugmentedSSM build_modified_model(std::shared_ptr<const Linearization> base, double lambda) {
  return AffineAugmentedSSM(std::move(base), lambda);
}

AffineAugmentedSSM build_modified_model(const NonlinearSSM& model, const Trajectory& nominal,
                                        const MeasurementSeq& ys, double lambda) {
  return AffineAugmentedSSM(linearize(model, nominal, ys), lambda);
}

}  // namespace newton_iks
