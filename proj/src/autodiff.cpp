#include "newton_iks/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace newton_iks {

namespace {

struct Atan2Partials {
  double value, dy, dx, dyy, dxx, dxy;
};

Atan2Partials atan2_partials(double y, double x) {
  const double r2 = x * x + y * y;
  if (r2 == 0.0) {
    throw NonFiniteDerivative("atan2 has no derivative at the origin");
  }
  const double r4 = r2 * r2;
  return {std::atan2(y, x), x / r2, -y / r2, -2.0 * x * y / r4, 2.0 * x * y / r4, (y * y - x * x) / r4};
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw NonFiniteDerivative(std::string("non-finite ") + what);
  }
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw NonFiniteDerivative(std::string("non-finite ") + what);
  }
}

VecX<HyperDual> seed_pair(const Vector& x, Eigen::Index j, Eigen::Index k) {
  VecX<HyperDual> xs(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xs(i) = HyperDual(x(i), i == j ? 1.0 : 0.0, i == k ? 1.0 : 0.0, 0.0);
  }
  return xs;
}

bool entries_within(double err, double ref, double abs_tol, double rel_tol) {
  return err <= std::max(abs_tol, rel_tol * std::abs(ref));
}

}  // namespace

Dual atan2(const Dual& y, const Dual& x) {
  const auto p = atan2_partials(y.val, x.val);
  return {p.value, p.dy * y.der + p.dx * x.der};
}

HyperDual atan2(const HyperDual& y, const HyperDual& x) {
  const auto p = atan2_partials(y.val, x.val);
  return {p.value, p.dy * y.e1 + p.dx * x.e1, p.dy * y.e2 + p.dx * x.e2,
          p.dy * y.e12 + p.dx * x.e12 + p.dyy * y.e1 * y.e2 + p.dxx * x.e1 * x.e2 +
              p.dxy * (y.e1 * x.e2 + y.e2 * x.e1)};
}

Matrix SmoothFunction::analytic_jacobian(const Vector& x) const {
  if (!analytic_jacobian_) {
    throw Error("function has no analytic Jacobian");
  }
  Matrix jac = analytic_jacobian_(x);
  if (jac.rows() != output_dim_ || jac.cols() != input_dim_) {
    throw DimensionMismatch("analytic Jacobian has wrong shape");
  }
  return jac;
}

Matrix jacobian(const SmoothFunction& fn, const Vector& x) {
  const Eigen::Index d = x.size();
  Matrix jac(fn.output_dim(), d);
  VecX<Dual> xs = x.cast<Dual>();
  for (Eigen::Index j = 0; j < d; ++j) {
    xs(j).der = 1.0;
    const VecX<Dual> ys = fn(xs);
    for (Eigen::Index i = 0; i < ys.size(); ++i) {
      jac(i, j) = ys(i).der;
    }
    xs(j).der = 0.0;
  }
  require_finite(jac, "Jacobian");
  return jac;
}

DerivativeBundle derivatives(const SmoothFunction& fn, const Vector& x) {
  const Eigen::Index d = x.size();
  const Eigen::Index n = fn.output_dim();
  DerivativeBundle out;
  out.jacobian.resize(n, d);
  out.hessian.assign(static_cast<std::size_t>(n), Matrix::Zero(d, d));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j; k < d; ++k) {
      const VecX<HyperDual> ys = fn(seed_pair(x, j, k));
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        out.hessian[idx](j, k) = ys(i).e12;
        out.hessian[idx](k, j) = ys(i).e12;
        if (j == k) {
          out.jacobian(i, j) = ys(i).e1;
        }
      }
      if (j == 0 && k == 0) {
        out.value.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          out.value(i) = ys(i).val;
        }
      }
    }
  }
  if (d == 0) {
    out.value = fn(x);
  }
  require_finite(out.value, "function value");
  require_finite(out.jacobian, "Jacobian");
  for (const auto& slice : out.hessian) {
    require_finite(slice, "Hessian");
  }
  return out;
}

HessianTensor hessian_tensor(const SmoothFunction& fn, const Vector& x) {
  return derivatives(fn, x).hessian;
}

Matrix tensor_dot(const HessianTensor& tensor, const Vector& v) {
  if (static_cast<Eigen::Index>(tensor.size()) != v.size()) {
    throw DimensionMismatch("tensor_dot: tensor has " + std::to_string(tensor.size()) +
                            " slices but vector has size " + std::to_string(v.size()));
  }
  if (tensor.empty()) {
    return Matrix();
  }
  Matrix out = Matrix::Zero(tensor.front().rows(), tensor.front().cols());
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    if (tensor[i].rows() != out.rows() || tensor[i].cols() != out.cols()) {
      throw DimensionMismatch("tensor_dot: ragged tensor slices");
    }
    out += v(static_cast<Eigen::Index>(i)) * tensor[i];
  }
  return out;
}

bool FdReport::jacobian_within(double abs_tol, double rel_tol) const {
  for (Eigen::Index i = 0; i < jac_err.rows(); ++i) {
    for (Eigen::Index j = 0; j < jac_err.cols(); ++j) {
      if (!entries_within(jac_err(i, j), jac_ref(i, j), abs_tol, rel_tol)) {
        return false;
      }
    }
  }
  return true;
}

bool FdReport::hessian_within(double abs_tol, double rel_tol) const {
  for (std::size_t s = 0; s < hess_err.size(); ++s) {
    for (Eigen::Index i = 0; i < hess_err[s].rows(); ++i) {
      for (Eigen::Index j = 0; j < hess_err[s].cols(); ++j) {
        if (!entries_within(hess_err[s](i, j), hess_ref[s](i, j), abs_tol, rel_tol)) {
          return false;
        }
      }
    }
  }
  return true;
}

FdReport fd_check(const SmoothFunction& fn, const Vector& x, double step) {
  if (!(step > 0.0)) {
    throw Error("fd_check: step must be positive");
  }
  const Eigen::Index d = x.size();
  const Eigen::Index n = fn.output_dim();

  FdReport report;
  const Matrix jac = jacobian(fn, x);
  const HessianTensor hess = hessian_tensor(fn, x);

  report.jac_ref.resize(n, d);
  report.hess_ref.assign(static_cast<std::size_t>(n), Matrix(d, d));
  for (Eigen::Index j = 0; j < d; ++j) {
    Vector xp = x, xm = x;
    xp(j) += step;
    xm(j) -= step;
    report.jac_ref.col(j) = (fn(xp) - fn(xm)) / (2.0 * step);
    const Matrix dj = (jacobian(fn, xp) - jacobian(fn, xm)) / (2.0 * step);
    for (Eigen::Index i = 0; i < n; ++i) {
      report.hess_ref[static_cast<std::size_t>(i)].col(j) = dj.row(i).transpose();
    }
  }
  require_finite(report.jac_ref, "finite-difference Jacobian");
  for (const auto& slice : report.hess_ref) {
    require_finite(slice, "finite-difference Hessian");
  }

  auto rel = [](double err, double ref) { return ref == 0.0 ? (err == 0.0 ? 0.0 : err) : err / std::abs(ref); };

  report.jac_err = (jac - report.jac_ref).cwiseAbs();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      report.max_jac_err = std::max(report.max_jac_err, report.jac_err(i, j));
      report.max_jac_rel_err = std::max(report.max_jac_rel_err, rel(report.jac_err(i, j), report.jac_ref(i, j)));
    }
  }
  report.hess_err.resize(static_cast<std::size_t>(n));
  for (std::size_t s = 0; s < report.hess_err.size(); ++s) {
    report.hess_err[s] = (hess[s] - report.hess_ref[s]).cwiseAbs();
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        report.max_hess_err = std::max(report.max_hess_err, report.hess_err[s](i, j));
        report.max_hess_rel_err =
            std::max(report.max_hess_rel_err, rel(report.hess_err[s](i, j), report.hess_ref[s](i, j)));
      }
    }
  }
  return report;
}

}  // namespace newton_iks
