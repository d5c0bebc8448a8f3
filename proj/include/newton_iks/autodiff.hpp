#pragma once

// Forward-mode differentiation of vector functions.
//
// Two scalar algebras are provided: Dual carries one tangent and yields a
// Jacobian column per pass; HyperDual carries two independent tangents plus
// their cross term and yields one mixed second derivative d2f/dxj dxk per
// pass. Model functions are written once as generic callables over the
// scalar type and wrapped in a SmoothFunction.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "newton_iks/errors.hpp"

namespace newton_iks {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

template <class T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// n slices of d x d; slice i is the Hessian of output component i.
using HessianTensor = std::vector<Matrix>;

struct Dual {
  double val = 0.0;
  double der = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : val(v) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(double v, double d) : val(v), der(d) {}

  Dual& operator+=(const Dual& o) {
    val += o.val;
    der += o.der;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    val -= o.val;
    der -= o.der;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    der = der * o.val + val * o.der;
    val *= o.val;
    return *this;
  }
  Dual& operator/=(const Dual& o);
};

/// Second-order scalar: value, tangents e1 and e2, and the e1*e2 coefficient.
struct HyperDual {
  double val = 0.0;
  double e1 = 0.0;
  double e2 = 0.0;
  double e12 = 0.0;

  constexpr HyperDual() = default;
  constexpr HyperDual(double v) : val(v) {}  // NOLINT(google-explicit-constructor)
  constexpr HyperDual(double v, double a, double b, double ab) : val(v), e1(a), e2(b), e12(ab) {}

  HyperDual& operator+=(const HyperDual& o) {
    val += o.val;
    e1 += o.e1;
    e2 += o.e2;
    e12 += o.e12;
    return *this;
  }
  HyperDual& operator-=(const HyperDual& o) {
    val -= o.val;
    e1 -= o.e1;
    e2 -= o.e2;
    e12 -= o.e12;
    return *this;
  }
  HyperDual& operator*=(const HyperDual& o) {
    e12 = val * o.e12 + e12 * o.val + e1 * o.e2 + e2 * o.e1;
    e1 = e1 * o.val + val * o.e1;
    e2 = e2 * o.val + val * o.e2;
    val *= o.val;
    return *this;
  }
  HyperDual& operator/=(const HyperDual& o);
};

}  // namespace newton_iks

namespace Eigen {

template <>
struct NumTraits<newton_iks::Dual> : GenericNumTraits<newton_iks::Dual> {
  using Real = newton_iks::Dual;
  using NonInteger = newton_iks::Dual;
  using Nested = newton_iks::Dual;
  using Literal = newton_iks::Dual;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 2,
    MulCost = 3
  };
  static inline Real epsilon() { return Real(std::numeric_limits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(1e-12); }
  static inline Real highest() { return Real(std::numeric_limits<double>::max()); }
  static inline Real lowest() { return Real(std::numeric_limits<double>::lowest()); }
  static inline int digits10() { return std::numeric_limits<double>::digits10; }
};

template <>
struct NumTraits<newton_iks::HyperDual> : GenericNumTraits<newton_iks::HyperDual> {
  using Real = newton_iks::HyperDual;
  using NonInteger = newton_iks::HyperDual;
  using Nested = newton_iks::HyperDual;
  using Literal = newton_iks::HyperDual;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 4,
    AddCost = 4,
    MulCost = 8
  };
  static inline Real epsilon() { return Real(std::numeric_limits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(1e-12); }
  static inline Real highest() { return Real(std::numeric_limits<double>::max()); }
  static inline Real lowest() { return Real(std::numeric_limits<double>::lowest()); }
  static inline int digits10() { return std::numeric_limits<double>::digits10; }
};

}  // namespace Eigen

namespace newton_iks {

// ---------------------------------------------------------------------------
// Chain rule helpers: g evaluated at a.val with first and second derivative.

inline Dual chain(const Dual& a, double g, double g1, double /*g2*/) { return {g, g1 * a.der}; }

inline HyperDual chain(const HyperDual& a, double g, double g1, double g2) {
  return {g, g1 * a.e1, g1 * a.e2, g1 * a.e12 + g2 * a.e1 * a.e2};
}

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.val, -a.der}; }
inline Dual operator+(const Dual& a) { return a; }

inline HyperDual operator+(HyperDual a, const HyperDual& b) { return a += b; }
inline HyperDual operator-(HyperDual a, const HyperDual& b) { return a -= b; }
inline HyperDual operator*(HyperDual a, const HyperDual& b) { return a *= b; }
inline HyperDual operator/(HyperDual a, const HyperDual& b) { return a /= b; }
inline HyperDual operator-(const HyperDual& a) { return {-a.val, -a.e1, -a.e2, -a.e12}; }
inline HyperDual operator+(const HyperDual& a) { return a; }

inline Dual& Dual::operator/=(const Dual& o) {
  const double inv = 1.0 / o.val;
  return *this *= chain(o, inv, -inv * inv, 0.0);
}

inline HyperDual& HyperDual::operator/=(const HyperDual& o) {
  const double inv = 1.0 / o.val;
  return *this *= chain(o, inv, -inv * inv, 2.0 * inv * inv * inv);
}

// Comparisons look at the value only; they exist so that models can branch.
#define NEWTON_IKS_DUAL_COMPARE(T, op)                                          \
  inline bool operator op(const T& a, const T& b) { return a.val op b.val; }    \
  inline bool operator op(const T& a, double b) { return a.val op b; }          \
  inline bool operator op(double a, const T& b) { return a op b.val; }
#define NEWTON_IKS_DUAL_COMPARE_ALL(T) \
  NEWTON_IKS_DUAL_COMPARE(T, <)        \
  NEWTON_IKS_DUAL_COMPARE(T, >)        \
  NEWTON_IKS_DUAL_COMPARE(T, <=)       \
  NEWTON_IKS_DUAL_COMPARE(T, >=)       \
  NEWTON_IKS_DUAL_COMPARE(T, ==)       \
  NEWTON_IKS_DUAL_COMPARE(T, !=)
NEWTON_IKS_DUAL_COMPARE_ALL(Dual)
NEWTON_IKS_DUAL_COMPARE_ALL(HyperDual)
#undef NEWTON_IKS_DUAL_COMPARE_ALL
#undef NEWTON_IKS_DUAL_COMPARE

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.val; }
inline double value_of(const HyperDual& x) { return x.val; }

// ---------------------------------------------------------------------------
// Elementary functions. Each is defined for both algebras through `chain`.

namespace detail {

template <class T>
T sin_impl(const T& a) {
  const double s = std::sin(a.val), c = std::cos(a.val);
  return chain(a, s, c, -s);
}
template <class T>
T cos_impl(const T& a) {
  const double s = std::sin(a.val), c = std::cos(a.val);
  return chain(a, c, -s, -c);
}
template <class T>
T tan_impl(const T& a) {
  const double t = std::tan(a.val);
  const double sec2 = 1.0 + t * t;
  return chain(a, t, sec2, 2.0 * t * sec2);
}
template <class T>
T exp_impl(const T& a) {
  const double e = std::exp(a.val);
  return chain(a, e, e, e);
}
template <class T>
T log_impl(const T& a) {
  const double inv = 1.0 / a.val;
  return chain(a, std::log(a.val), inv, -inv * inv);
}
template <class T>
T sqrt_impl(const T& a) {
  const double s = std::sqrt(a.val);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.val));
}
template <class T>
T pow_impl(const T& a, double p) {
  // d/dx x^p = p x^(p-1), written so that integer p at x = 0 stays finite.
  const double g = std::pow(a.val, p);
  const double g1 = p == 0.0 ? 0.0 : p * std::pow(a.val, p - 1.0);
  const double g2 = (p == 0.0 || p == 1.0) ? 0.0 : p * (p - 1.0) * std::pow(a.val, p - 2.0);
  return chain(a, g, g1, g2);
}
template <class T>
T atan_impl(const T& a) {
  const double den = 1.0 + a.val * a.val;
  return chain(a, std::atan(a.val), 1.0 / den, -2.0 * a.val / (den * den));
}
template <class T>
T tanh_impl(const T& a) {
  const double t = std::tanh(a.val);
  const double s = 1.0 - t * t;
  return chain(a, t, s, -2.0 * t * s);
}
template <class T>
T abs_impl(const T& a) {
  if (a.val == 0.0) {
    throw UnsupportedPrimitive("abs is not differentiable at 0");
  }
  return a.val > 0.0 ? a : -a;
}

}  // namespace detail

#define NEWTON_IKS_DUAL_UNARY(name)                                     \
  inline Dual name(const Dual& a) { return detail::name##_impl(a); }    \
  inline HyperDual name(const HyperDual& a) { return detail::name##_impl(a); }
NEWTON_IKS_DUAL_UNARY(sin)
NEWTON_IKS_DUAL_UNARY(cos)
NEWTON_IKS_DUAL_UNARY(tan)
NEWTON_IKS_DUAL_UNARY(exp)
NEWTON_IKS_DUAL_UNARY(log)
NEWTON_IKS_DUAL_UNARY(sqrt)
NEWTON_IKS_DUAL_UNARY(atan)
NEWTON_IKS_DUAL_UNARY(tanh)
NEWTON_IKS_DUAL_UNARY(abs)
#undef NEWTON_IKS_DUAL_UNARY

inline Dual pow(const Dual& a, double p) { return detail::pow_impl(a, p); }
inline HyperDual pow(const HyperDual& a, double p) { return detail::pow_impl(a, p); }

/// atan2 with both arguments differentiable. Raises NonFiniteDerivative at
/// the origin, where the angle has no derivative.
Dual atan2(const Dual& y, const Dual& x);
HyperDual atan2(const HyperDual& y, const HyperDual& x);

// Non-smooth primitives are outside the dual algebra.
#define NEWTON_IKS_DUAL_UNSUPPORTED(name)                                               \
  [[noreturn]] inline Dual name(const Dual&) {                                          \
    throw UnsupportedPrimitive(#name " is not supported by the dual algebra");          \
  }                                                                                     \
  [[noreturn]] inline HyperDual name(const HyperDual&) {                                \
    throw UnsupportedPrimitive(#name " is not supported by the dual algebra");          \
  }
NEWTON_IKS_DUAL_UNSUPPORTED(floor)
NEWTON_IKS_DUAL_UNSUPPORTED(ceil)
NEWTON_IKS_DUAL_UNSUPPORTED(round)
NEWTON_IKS_DUAL_UNSUPPORTED(trunc)
#undef NEWTON_IKS_DUAL_UNSUPPORTED

// ---------------------------------------------------------------------------

/// A smooth map R^d -> R^n evaluable in double, Dual and HyperDual.
///
/// Construct from a generic callable taking `const VecX<T>&` and returning
/// `VecX<T>`. An analytic Jacobian can be attached; it is never used by the
/// differentiation routines and exists to be cross-checked against them.
class SmoothFunction {
 public:
  template <class Fn>
  SmoothFunction(Eigen::Index input_dim, Eigen::Index output_dim, Fn fn)
      : input_dim_(input_dim),
        output_dim_(output_dim),
        eval_(make_eval<double>(fn)),
        eval_dual_(make_eval<Dual>(fn)),
        eval_hyper_(make_eval<HyperDual>(fn)) {}

  Eigen::Index input_dim() const noexcept { return input_dim_; }
  Eigen::Index output_dim() const noexcept { return output_dim_; }

  Vector operator()(const Vector& x) const { return checked(eval_, x); }
  VecX<Dual> operator()(const VecX<Dual>& x) const { return checked(eval_dual_, x); }
  VecX<HyperDual> operator()(const VecX<HyperDual>& x) const { return checked(eval_hyper_, x); }

  SmoothFunction& with_analytic_jacobian(std::function<Matrix(const Vector&)> jac) {
    analytic_jacobian_ = std::move(jac);
    return *this;
  }
  bool has_analytic_jacobian() const noexcept { return static_cast<bool>(analytic_jacobian_); }
  Matrix analytic_jacobian(const Vector& x) const;

 private:
  template <class T>
  using Eval = std::function<VecX<T>(const VecX<T>&)>;

  template <class T, class Fn>
  static Eval<T> make_eval(const Fn& fn) {
    return [fn](const VecX<T>& x) -> VecX<T> { return fn(x); };
  }

  template <class T>
  VecX<T> checked(const Eval<T>& eval, const VecX<T>& x) const {
    if (x.size() != input_dim_) {
      throw DimensionMismatch("function input has size " + std::to_string(x.size()) +
                              ", expected " + std::to_string(input_dim_));
    }
    VecX<T> y = eval(x);
    if (y.size() != output_dim_) {
      throw DimensionMismatch("function output has size " + std::to_string(y.size()) +
                              ", expected " + std::to_string(output_dim_));
    }
    return y;
  }

  Eigen::Index input_dim_;
  Eigen::Index output_dim_;
  Eval<double> eval_;
  Eval<Dual> eval_dual_;
  Eval<HyperDual> eval_hyper_;
  std::function<Matrix(const Vector&)> analytic_jacobian_;
};

struct DerivativeBundle {
  Vector value;
  Matrix jacobian;
  HessianTensor hessian;
};

/// Jacobian by one Dual pass per input coordinate.
Matrix jacobian(const SmoothFunction& fn, const Vector& x);

/// T[i](j, k) = d2 fn_i / dxj dxk, one HyperDual pass per pair j <= k.
/// Both (j, k) and (k, j) are written from the same pass, so the result is
/// exactly symmetric.
HessianTensor hessian_tensor(const SmoothFunction& fn, const Vector& x);

/// Value, Jacobian and Hessian tensor from the HyperDual passes alone.
DerivativeBundle derivatives(const SmoothFunction& fn, const Vector& x);

/// Contraction over the output index: sum_i v_i * T[i].
Matrix tensor_dot(const HessianTensor& tensor, const Vector& v);

/// Finite-difference comparison of the autodiff derivatives.
///
/// The Jacobian reference is the central difference of fn itself; the
/// Hessian reference is the central difference of the Dual-mode Jacobian,
/// which shares no code with the HyperDual path it is compared against.
struct FdReport {
  double max_jac_err = 0.0;
  double max_jac_rel_err = 0.0;
  double max_hess_err = 0.0;
  double max_hess_rel_err = 0.0;

  Matrix jac_err;
  Matrix jac_ref;
  HessianTensor hess_err;
  HessianTensor hess_ref;

  /// True when every entry satisfies err <= max(abs_tol, rel_tol * |ref|).
  bool jacobian_within(double abs_tol, double rel_tol) const;
  bool hessian_within(double abs_tol, double rel_tol) const;
};

FdReport fd_check(const SmoothFunction& fn, const Vector& x, double step);

}  // namespace newton_iks
