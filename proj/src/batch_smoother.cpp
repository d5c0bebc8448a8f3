#include "newton_iks/batch_smoother.hpp"

#include <string>
#include <vector>

namespace newton_iks {

namespace {

void require_system_shape(const DenseSystem& system, const Trajectory& nominal, const char* context) {
  if (nominal.dim() != system.dim || nominal.steps() != system.steps) {
    throw DimensionMismatch(std::string(context) + ": trajectory does not match the assembled system");
  }
}

void require_lambda(double lambda) {
  if (!(lambda >= 0.0)) {
    throw std::invalid_argument("lambda must be nonnegative");
  }
}

}  // namespace

DenseSystem assemble_dense(const NonlinearSSM& model, const Trajectory& nominal, const MeasurementSeq& ys) {
  require_compatible(model, nominal, ys, "assemble_dense");
  const Index d = nominal.dim();
  const Index n = nominal.steps();
  const Index total = (n + 1) * d;

  DenseSystem sys{Vector::Zero(total), Matrix::Zero(total, total), n, d};
  auto g = [&](Index k) { return sys.grad.segment(k * d, d); };
  auto h = [&](Index i, Index j) { return sys.hess.block(i * d, j * d, d, d); };

  g(0) += model.P0_inv() * (nominal.state(0) - model.m0());
  h(0, 0) += model.P0_inv();

  const Matrix& Qi = model.Q_inv();
  const Matrix& Ri = model.R_inv();
  for (Index k = 1; k <= n; ++k) {
    // 1/2 |x_k - f(x_{k-1})|^2_{Q^-1}
    const DerivativeBundle fd = derivatives(model.transition(), nominal.state(k - 1));
    const Vector w = Qi * (nominal.state(k) - fd.value);
    const Matrix QiF = Qi * fd.jacobian;
    g(k) += w;
    g(k - 1) -= fd.jacobian.transpose() * w;
    h(k, k) += Qi;
    h(k, k - 1) -= QiF;
    h(k - 1, k) -= QiF.transpose();
    h(k - 1, k - 1) += fd.jacobian.transpose() * QiF - tensor_dot(fd.hessian, w);

    // 1/2 |y_k - h(x_k)|^2_{R^-1}
    const DerivativeBundle hd = derivatives(model.observation(), nominal.state(k));
    const Vector u = Ri * (ys.at(k) - hd.value);
    g(k) -= hd.jacobian.transpose() * u;
    h(k, k) += hd.jacobian.transpose() * Ri * hd.jacobian - tensor_dot(hd.hessian, u);
  }
  // Curvature contractions are symmetric only up to rounding.
  for (Index k = 0; k <= n; ++k) {
    h(k, k) = symmetrize(h(k, k));
  }
  return sys;
}

Trajectory batch_newton_step(const DenseSystem& system, const Trajectory& nominal, double lambda) {
  require_system_shape(system, nominal, "batch_newton_step");
  require_lambda(lambda);
  Matrix work = system.hess;
  work.diagonal().array() += lambda;
  Eigen::LLT<Eigen::Ref<Matrix>> llt(work);
  if (llt.info() != Eigen::Success) {
    throw HessianNotPD("hess L + lambda I is not positive-definite at lambda = " + std::to_string(lambda));
  }
  const Vector step = llt.solve(system.grad);
  return Trajectory::from_stacked(nominal.stacked() - step, nominal.dim());
}

Trajectory batch_newton_step_structured(const DenseSystem& system, const Trajectory& nominal, double lambda) {
  require_system_shape(system, nominal, "batch_newton_step_structured");
  require_lambda(lambda);
  const Index d = system.dim;
  const Index n = system.steps;
  auto block = [&](Index i, Index j) { return system.hess.block(i * d, j * d, d, d); };

  // H = L L^T with L block lower-bidiagonal: diagonal blocks Ld_k (lower
  // triangular) and sub-diagonal blocks Ls_k = H_{k,k-1} Ld_{k-1}^-T.
  std::vector<Matrix> Ld(static_cast<std::size_t>(n + 1));
  std::vector<Matrix> Ls(static_cast<std::size_t>(n + 1));
  for (Index k = 0; k <= n; ++k) {
    Matrix D = block(k, k);
    D.diagonal().array() += lambda;
    if (k > 0) {
      const Matrix& prev = Ld[static_cast<std::size_t>(k - 1)];
      Matrix sub = prev.triangularView<Eigen::Lower>().solve(Matrix(block(k, k - 1)).transpose()).transpose();
      D -= sub * sub.transpose();
      Ls[static_cast<std::size_t>(k)] = std::move(sub);
    }
    Eigen::LLT<Matrix> llt(symmetrize(D));
    if (llt.info() != Eigen::Success) {
      throw HessianNotPD("block Cholesky failed at block " + std::to_string(k));
    }
    Ld[static_cast<std::size_t>(k)] = llt.matrixL();
  }

  Matrix z(d, n + 1);
  for (Index k = 0; k <= n; ++k) {
    Vector rhs = system.grad.segment(k * d, d);
    if (k > 0) {
      rhs -= Ls[static_cast<std::size_t>(k)] * z.col(k - 1);
    }
    z.col(k) = Ld[static_cast<std::size_t>(k)].triangularView<Eigen::Lower>().solve(rhs);
  }
  Matrix step(d, n + 1);
  for (Index k = n; k >= 0; --k) {
    Vector rhs = z.col(k);
    if (k < n) {
      rhs -= Ls[static_cast<std::size_t>(k + 1)].transpose() * step.col(k + 1);
    }
    step.col(k) = Ld[static_cast<std::size_t>(k)].transpose().triangularView<Eigen::Upper>().solve(rhs);
  }
  return Trajectory(nominal.matrix() - step);
}

double dense_expected_reduction(const DenseSystem& system, const Trajectory& from, const Trajectory& to,
                                double lambda) {
  require_system_shape(system, from, "dense_expected_reduction");
  require_same_shape(from, to, "dense_expected_reduction");
  const Vector s = to.stacked() - from.stacked();
  const Vector hs = system.hess * s + lambda * s;
  return -(system.grad.dot(s) + 0.5 * s.dot(hs));
}

}  // namespace newton_iks
