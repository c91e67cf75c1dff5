#pragma once

#include <array>

#include "kanreg/tape.hpp"
#include "kanreg/types.hpp"

// Free-function surface shared by three value backends:
//   DenseMatrix<S>        plain forward evaluation
//   VarT<S>               parameter-differentiable tape values
//   Dual3<T>              forward-mode spatial tangents stacked on either
// Generic network code is written once against these names; the backend is
// picked by the argument types.

namespace kanreg {

// ---- plain matrices ----

template <class S>
DenseMatrix<S> add(const DenseMatrix<S>& a, const DenseMatrix<S>& b) { return a + b; }
template <class S>
DenseMatrix<S> sub(const DenseMatrix<S>& a, const DenseMatrix<S>& b) { return a - b; }
template <class S>
DenseMatrix<S> ewmul(const DenseMatrix<S>& a, const DenseMatrix<S>& b) { return a.cwiseProduct(b); }
template <class S>
DenseMatrix<S> ewdiv(const DenseMatrix<S>& a, const DenseMatrix<S>& b) { return a.cwiseQuotient(b); }
template <class S>
DenseMatrix<S> matmul(const DenseMatrix<S>& a, const DenseMatrix<S>& b) { return a * b; }
template <class S>
DenseMatrix<S> scale(const DenseMatrix<S>& a, double c) { return a * S(c); }
template <class S>
DenseMatrix<S> add_scalar(const DenseMatrix<S>& a, double c) { return (a.array() + S(c)).matrix(); }
template <class S>
DenseMatrix<S> tanh_ew(const DenseMatrix<S>& a) { return a.array().tanh().matrix(); }
template <class S>
DenseMatrix<S> sin_ew(const DenseMatrix<S>& a) { return a.array().sin().matrix(); }
template <class S>
DenseMatrix<S> cos_ew(const DenseMatrix<S>& a) { return a.array().cos().matrix(); }
template <class S>
DenseMatrix<S> acos_ew(const DenseMatrix<S>& a) { return a.array().acos().matrix(); }
template <class S>
DenseMatrix<S> clamp_unit(const DenseMatrix<S>& a) {
  const S lo = S(-1) + S(kUnitClamp), hi = S(1) - S(kUnitClamp);
  return a.array().max(lo).min(hi).matrix();
}
template <class S>
DenseMatrix<S> silu_ew(const DenseMatrix<S>& a) {
  return (a.array() / (S(1) + (-a.array()).exp())).matrix();
}
template <class S>
DenseMatrix<S> relu_ew(const DenseMatrix<S>& a) { return a.array().max(S(0)).matrix(); }
template <class S>
DenseMatrix<S> abs_ew(const DenseMatrix<S>& a) { return a.array().abs().matrix(); }
template <class S>
DenseMatrix<S> sqrt_ew(const DenseMatrix<S>& a) { return a.array().sqrt().matrix(); }
template <class S>
DenseMatrix<S> sigmoid_ew(const DenseMatrix<S>& a) {
  return (S(1) / (S(1) + (-a.array()).exp())).matrix();
}
template <class S>
DenseMatrix<S> col_of(const DenseMatrix<S>& a, int j) { return a.col(j); }

// ---- tape variables ----

template <class S>
VarT<S> add(VarT<S> a, VarT<S> b) { return a.tape->add(a, b); }
template <class S>
VarT<S> sub(VarT<S> a, VarT<S> b) { return a.tape->sub(a, b); }
template <class S>
VarT<S> ewmul(VarT<S> a, VarT<S> b) { return a.tape->mul(a, b); }
template <class S>
VarT<S> ewdiv(VarT<S> a, VarT<S> b) { return a.tape->div(a, b); }
template <class S>
VarT<S> matmul(VarT<S> a, VarT<S> b) { return a.tape->matmul(a, b); }
template <class S>
VarT<S> scale(VarT<S> a, double c) { return a.tape->scale(a, S(c)); }
template <class S>
VarT<S> add_scalar(VarT<S> a, double c) { return a.tape->add_scalar(a, S(c)); }
template <class S>
VarT<S> tanh_ew(VarT<S> a) { return a.tape->tanh(a); }
template <class S>
VarT<S> sin_ew(VarT<S> a) { return a.tape->sin(a); }
template <class S>
VarT<S> cos_ew(VarT<S> a) { return a.tape->cos(a); }
template <class S>
VarT<S> acos_ew(VarT<S> a) { return a.tape->acos(a); }
template <class S>
VarT<S> clamp_unit(VarT<S> a) { return a.tape->clamp_unit(a); }
template <class S>
VarT<S> silu_ew(VarT<S> a) { return a.tape->silu(a); }
template <class S>
VarT<S> relu_ew(VarT<S> a) { return a.tape->relu(a); }
template <class S>
VarT<S> abs_ew(VarT<S> a) { return a.tape->abs(a); }
template <class S>
VarT<S> sqrt_ew(VarT<S> a) { return a.tape->sqrt(a); }
template <class S>
VarT<S> sigmoid_ew(VarT<S> a) { return a.tape->sigmoid(a); }
template <class S>
VarT<S> sum_all(VarT<S> a) { return a.tape->sum(a); }
template <class S>
VarT<S> mean_all(VarT<S> a) { return a.tape->mean(a); }
template <class S>
VarT<S> sub_bc(VarT<S> a, VarT<S> b) { return a.tape->sub_bc(a, b); }
template <class S>
VarT<S> mul_bc(VarT<S> a, VarT<S> b) { return a.tape->mul_bc(a, b); }
template <class S>
VarT<S> col_of(VarT<S> a, int j) { return a.tape->col(a, j); }
template <class S>
VarT<S> elem_of(VarT<S> a, int r, int c) { return a.tape->elem(a, r, c); }

// ---- dual numbers: primal plus one tangent per spatial axis ----

template <class T>
struct Dual3 {
  T v;
  std::array<T, 3> d;
};

template <class T>
Dual3<T> add(const Dual3<T>& a, const Dual3<T>& b) {
  return {add(a.v, b.v), {add(a.d[0], b.d[0]), add(a.d[1], b.d[1]), add(a.d[2], b.d[2])}};
}
template <class T>
Dual3<T> sub(const Dual3<T>& a, const Dual3<T>& b) {
  return {sub(a.v, b.v), {sub(a.d[0], b.d[0]), sub(a.d[1], b.d[1]), sub(a.d[2], b.d[2])}};
}
template <class T>
Dual3<T> ewmul(const Dual3<T>& a, const Dual3<T>& b) {
  Dual3<T> out;
  out.v = ewmul(a.v, b.v);
  for (int k = 0; k < 3; ++k)
    out.d[k] = add(ewmul(a.d[k], b.v), ewmul(a.v, b.d[k]));
  return out;
}
// Right operand carries no spatial dependence (network parameters).
template <class T, class P>
Dual3<T> matmul(const Dual3<T>& a, const P& b) {
  return {matmul(a.v, b), {matmul(a.d[0], b), matmul(a.d[1], b), matmul(a.d[2], b)}};
}
template <class T>
Dual3<T> scale(const Dual3<T>& a, double c) {
  return {scale(a.v, c), {scale(a.d[0], c), scale(a.d[1], c), scale(a.d[2], c)}};
}
template <class T>
Dual3<T> add_scalar(const Dual3<T>& a, double c) {
  return {add_scalar(a.v, c), a.d};
}
template <class T>
Dual3<T> chain(const T& value, const T& dvalue, const Dual3<T>& a) {
  return {value, {ewmul(a.d[0], dvalue), ewmul(a.d[1], dvalue), ewmul(a.d[2], dvalue)}};
}
template <class T>
Dual3<T> tanh_ew(const Dual3<T>& a) {
  T t = tanh_ew(a.v);
  T dt = add_scalar(scale(ewmul(t, t), -1.0), 1.0);
  return chain(t, dt, a);
}
template <class T>
Dual3<T> silu_ew(const Dual3<T>& a) {
  T sg = sigmoid_ew(a.v);
  // d/dx silu = sg * (1 + x * (1 - sg))
  T one_m = add_scalar(scale(sg, -1.0), 1.0);
  T ds = ewmul(sg, add_scalar(ewmul(a.v, one_m), 1.0));
  return chain(silu_ew(a.v), ds, a);
}
template <class T>
Dual3<T> clamp_unit(const Dual3<T>& a) {
  // Pass-through tangents; the clamp is active on a measure-zero boundary.
  return {clamp_unit(a.v), a.d};
}
template <class T>
Dual3<T> acos_ew(const Dual3<T>& a) {
  // a.v assumed already clamped strictly inside (-1, 1).
  T uu = ewmul(a.v, a.v);
  T rt = sqrt_ew(add_scalar(scale(uu, -1.0), 1.0));
  Dual3<T> out;
  out.v = acos_ew(a.v);
  for (int k = 0; k < 3; ++k) out.d[k] = scale(ewdiv(a.d[k], rt), -1.0);
  return out;
}
// Broadcast multiply by a spatially constant 1x1 value (no tangent term).
template <class S>
Dual3<VarT<S>> mul_bc(const Dual3<VarT<S>>& a, VarT<S> s) {
  return {mul_bc(a.v, s), {mul_bc(a.d[0], s), mul_bc(a.d[1], s), mul_bc(a.d[2], s)}};
}

template <class T>
Dual3<T> cos_ew(const Dual3<T>& a) {
  T sv = sin_ew(a.v);
  T dv = scale(sv, -1.0);
  return chain(cos_ew(a.v), dv, a);
}

}  // namespace kanreg
