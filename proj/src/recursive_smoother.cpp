#include "newton_iks/recursive_smoother.hpp"

namespace newton_iks {

namespace {

Eigen::LLT<Matrix> factor_or_throw(const Matrix& m, Index step, const char* stage) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success || !m.allFinite()) {
    throw CovarianceNotPD(static_cast<std::size_t>(step), stage);
  }
  return llt;
}

}  // namespace

SmootherResult newton_iks_iteration(const AffineAugmentedSSM& aug, const MeasurementSeq& ys,
                                    const SmootherOptions& options) {
  const NonlinearSSM& model = aug.model();
  require_compatible(model, aug.nominal(), ys, "newton_iks_iteration");
  const Index n = aug.steps();
  const Index d = aug.dim();
  const auto slots = static_cast<std::size_t>(n + 1);
  const Trajectory& nominal = aug.nominal();

  SmootherPass pass;
  pass.predicted.resize(slots);
  pass.innovation.resize(slots);
  pass.updated.resize(slots);
  pass.filtered.resize(slots);
  pass.smoothed.resize(slots);
  pass.gain_K.resize(slots);
  pass.gain_U.resize(slots);
  pass.gain_G.resize(slots);

  pass.filtered[0] = {aug.tau0(), aug.Omega0()};

  for (Index k = 1; k <= n; ++k) {
    const auto s = static_cast<std::size_t>(k);
    const TransitionTerm& t = aug.transition(k);
    const ObservationTerm& o = aug.observation(k);
    const GaussianBelief& prev = pass.filtered[s - 1];

    // Prediction.
    Vector xp = t.F * prev.mean + t.b;
    Matrix Pp = symmetrize(t.F * prev.cov * t.F.transpose() + model.Q());

    // Measurement update.
    Vector mu = o.H * xp + o.c;
    Matrix S = symmetrize(o.H * Pp * o.H.transpose() + model.R());
    const auto S_llt = factor_or_throw(S, k, "innovation");
    Matrix K = S_llt.solve(o.H * Pp).transpose();
    Vector xy = xp + K * (ys.at(k) - mu);
    Matrix Py;
    if (options.joseph_form) {
      const Matrix IKH = Matrix::Identity(d, d) - K * o.H;
      Py = symmetrize(IKH * Pp * IKH.transpose() + K * model.R() * K.transpose());
    } else {
      Py = symmetrize(Pp - K * S * K.transpose());
    }

    // Pseudo-measurement update of the nominal state.
    Vector xf;
    Matrix Pf;
    Matrix U;
    if (aug.pseudo_is_zero(k)) {
      xf = xy;
      Pf = Py;
      U = Matrix::Zero(d, d);
    } else {
      const Matrix& lam = aug.pseudo_precision(k);
      const auto Py_llt = factor_or_throw(Py, k, "measurement-update");
      const Matrix info = symmetrize(Py_llt.solve(Matrix::Identity(d, d)) + lam);
      const auto info_llt = factor_or_throw(info, k, "pseudo-update");
      Pf = symmetrize(info_llt.solve(Matrix::Identity(d, d)));
      U = Pf * lam;
      xf = xy + U * (nominal.state(k) - xy);
    }

    pass.predicted[s] = {std::move(xp), std::move(Pp)};
    pass.innovation[s] = {std::move(mu), std::move(S)};
    pass.updated[s] = {std::move(xy), std::move(Py)};
    pass.filtered[s] = {std::move(xf), std::move(Pf)};
    pass.gain_K[s] = std::move(K);
    pass.gain_U[s] = std::move(U);
  }

  Matrix smoothed(d, n + 1);
  pass.smoothed[static_cast<std::size_t>(n)] = pass.filtered[static_cast<std::size_t>(n)];
  smoothed.col(n) = pass.filtered[static_cast<std::size_t>(n)].mean;
  for (Index k = n - 1; k >= 0; --k) {
    const auto s = static_cast<std::size_t>(k);
    const GaussianBelief& filt = pass.filtered[s];
    const GaussianBelief& pred = pass.predicted[s + 1];
    const GaussianBelief& next = pass.smoothed[s + 1];
    const Matrix& F = aug.transition(k + 1).F;

    const auto Pp_llt = factor_or_throw(pred.cov, k + 1, "smoothing");
    Matrix G = Pp_llt.solve(F * filt.cov).transpose();
    Vector xs = filt.mean + G * (next.mean - pred.mean);
    Matrix Ps = symmetrize(filt.cov + G * (next.cov - pred.cov) * G.transpose());

    smoothed.col(k) = xs;
    pass.smoothed[s] = {std::move(xs), std::move(Ps)};
    pass.gain_G[s] = std::move(G);
  }

  return {Trajectory(std::move(smoothed)), std::move(pass)};
}

}  // namespace newton_iks
