#pragma once

#include <array>

#include "kanreg/ops.hpp"
#include "kanreg/tape.hpp"

namespace kanreg {

struct LossWeights {
  double lambda = 0.4;    // TV weight
  double gamma = 15.0;    // folding weight
  double epsilon = 0.1;   // overcorrection margin
};

// Batch of 3x3 spatial Jacobians held column-wise as tape values:
// e[i][k] is a batch x 1 value of d(f_i)/d(x_k).
template <class S>
struct JacobianBatchT {
  std::array<std::array<VarT<S>, 3>, 3> e;
};

// Split dual tangents (d[k] = batch x 3, column i = dU_i/dx_k) into per-entry
// columns; with add_identity the result is J_Phi = I + dU/dx.
template <class S>
JacobianBatchT<S> jacobian_from_tangents(const std::array<VarT<S>, 3>& tangents,
                                         bool add_identity) {
  JacobianBatchT<S> jac;
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i) {
      VarT<S> entry = col_of(tangents[k], i);
      if (add_identity && i == k) entry = add_scalar(entry, 1.0);
      jac.e[i][k] = entry;
    }
  return jac;
}

template <class S>
VarT<S> det3(const JacobianBatchT<S>& j) {
  auto minor = [&](int a, int b, int c, int d) {
    return sub(ewmul(j.e[1][a], j.e[2][b]), ewmul(j.e[1][c], j.e[2][d]));
  };
  VarT<S> m0 = ewmul(j.e[0][0], minor(1, 2, 2, 1));
  VarT<S> m1 = ewmul(j.e[0][1], minor(0, 2, 2, 0));
  VarT<S> m2 = ewmul(j.e[0][2], minor(0, 1, 1, 0));
  return add(sub(m0, m1), m2);
}

template <class S>
struct NccResult {
  VarT<S> value;
  bool degenerate = false;
};

// Negative normalized cross-correlation over the batch, means over the batch.
// A constant batch on either side yields a 0 loss with the degenerate flag set.
template <class S>
NccResult<S> ncc_loss(TapeT<S>& tape, VarT<S> i_vals, VarT<S> j_vals) {
  if (tape.val(i_vals).rows() != tape.val(j_vals).rows() || tape.val(i_vals).rows() == 0)
    throw std::invalid_argument("ncc_loss: batches must have equal nonzero length");
  VarT<S> ic = sub_bc(i_vals, mean_all(i_vals));
  VarT<S> jc = sub_bc(j_vals, mean_all(j_vals));
  VarT<S> vi = sum_all(ewmul(ic, ic));
  VarT<S> vj = sum_all(ewmul(jc, jc));
  const double tiny = 1e-30;
  if (tape.val(vi)(0, 0) < tiny || tape.val(vj)(0, 0) < tiny) {
    DenseMatrix<S> zero(1, 1);
    zero.setZero();
    return {tape.constant(std::move(zero)), true};
  }
  VarT<S> num = sum_all(ewmul(ic, jc));
  VarT<S> den = sqrt_ew(add_scalar(ewmul(vi, vj), 1e-10));
  return {scale(ewdiv(num, den), -1.0), false};
}

// Mean entrywise L1 norm of the displacement Jacobian over the batch.
template <class S>
VarT<S> tv_loss(const JacobianBatchT<S>& grad_u) {
  VarT<S> acc = sum_all(abs_ew(grad_u.e[0][0]));
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      if (i == 0 && k == 0) continue;
      acc = add(acc, sum_all(abs_ew(grad_u.e[i][k])));
    }
  const auto batch = grad_u.e[0][0].tape->val(grad_u.e[0][0]).rows();
  if (batch == 0) throw std::invalid_argument("tv_loss: empty batch");
  return scale(acc, 1.0 / double(batch));
}

// Mean relu(-det(J_Phi) + epsilon) over the batch.
template <class S>
VarT<S> jdet_loss(const JacobianBatchT<S>& j_phi, double epsilon) {
  VarT<S> det = det3(j_phi);
  return mean_all(relu_ew(add_scalar(scale(det, -1.0), epsilon)));
}

template <class S>
VarT<S> total_loss(VarT<S> data, VarT<S> smooth, VarT<S> fold, const LossWeights& w) {
  return add(data, add(scale(smooth, w.lambda), scale(fold, w.gamma)));
}

}  // namespace kanreg
