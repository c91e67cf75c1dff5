#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "kanreg/types.hpp"

namespace kanreg {

// Reverse-mode tape over dense matrix values. Every node holds the forward
// result of one primitive; backward() walks nodes in strict reverse creation
// order and accumulates adjoints. Batched values keep the node count small
// (one node per batched primitive, not per scalar), so training iterations
// stay GEMM-bound.
template <class S>
class TapeT;

template <class S>
struct VarT {
  TapeT<S>* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

template <class S>
class TapeT {
 public:
  using M = DenseMatrix<S>;

  enum class Op : std::uint8_t {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,      // elementwise
    Div,      // elementwise
    Neg,
    Scale,      // a * c
    AddScalar,  // a + c
    Tanh,
    Sin,
    Cos,
    Acos,       // input assumed strictly inside (-1, 1); see ClampUnit
    ClampUnit,  // clamp to [-1 + kUnitClamp, 1 - kUnitClamp]
    Silu,
    Relu,
    Abs,
    Sqrt,
    Sigmoid,
    MatMul,
    Sum,    // -> 1x1
    Mean,   // -> 1x1
    SubBc,  // a - b, b is 1x1
    MulBc,  // a .* b, b is 1x1
    Elem,   // a(r, c) -> 1x1
    Col,    // a.col(j)
    Interp, // trilinear sample; aux holds d(sample)/d(coord) per axis
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    S c = S(0);
    int r = 0;  // row / column index for Elem / Col
    int cc = 0;
    M val;
    M adj;
    M aux;
  };

  VarT<S> leaf(M v) { return push(Op::Leaf, -1, -1, std::move(v)); }
  VarT<S> constant(M v) { return push(Op::Const, -1, -1, std::move(v)); }

  VarT<S> add(VarT<S> a, VarT<S> b) {
    check_same_shape(a, b);
    return push(Op::Add, a.id, b.id, val(a) + val(b));
  }
  VarT<S> sub(VarT<S> a, VarT<S> b) {
    check_same_shape(a, b);
    return push(Op::Sub, a.id, b.id, val(a) - val(b));
  }
  VarT<S> mul(VarT<S> a, VarT<S> b) {
    check_same_shape(a, b);
    return push(Op::Mul, a.id, b.id, val(a).cwiseProduct(val(b)));
  }
  VarT<S> div(VarT<S> a, VarT<S> b) {
    check_same_shape(a, b);
    return push(Op::Div, a.id, b.id, val(a).cwiseQuotient(val(b)));
  }
  VarT<S> neg(VarT<S> a) { return push(Op::Neg, a.id, -1, -val(a)); }
  VarT<S> scale(VarT<S> a, S c) {
    VarT<S> out = push(Op::Scale, a.id, -1, val(a) * c);
    nodes_[out.id].c = c;
    return out;
  }
  VarT<S> add_scalar(VarT<S> a, S c) {
    VarT<S> out = push(Op::AddScalar, a.id, -1, val(a).array() + c);
    nodes_[out.id].c = c;
    return out;
  }
  VarT<S> tanh(VarT<S> a) { return push(Op::Tanh, a.id, -1, val(a).array().tanh()); }
  VarT<S> sin(VarT<S> a) { return push(Op::Sin, a.id, -1, val(a).array().sin()); }
  VarT<S> cos(VarT<S> a) { return push(Op::Cos, a.id, -1, val(a).array().cos()); }
  VarT<S> acos(VarT<S> a) { return push(Op::Acos, a.id, -1, val(a).array().acos()); }
  VarT<S> clamp_unit(VarT<S> a) {
    const S lo = S(-1) + S(kUnitClamp), hi = S(1) - S(kUnitClamp);
    return push(Op::ClampUnit, a.id, -1, val(a).array().max(lo).min(hi));
  }
  VarT<S> silu(VarT<S> a) {
    M sg = sigmoid_of(val(a));
    return push(Op::Silu, a.id, -1, val(a).cwiseProduct(sg));
  }
  VarT<S> relu(VarT<S> a) { return push(Op::Relu, a.id, -1, val(a).array().max(S(0))); }
  VarT<S> abs(VarT<S> a) { return push(Op::Abs, a.id, -1, val(a).array().abs()); }
  VarT<S> sqrt(VarT<S> a) { return push(Op::Sqrt, a.id, -1, val(a).array().sqrt()); }
  VarT<S> sigmoid(VarT<S> a) { return push(Op::Sigmoid, a.id, -1, sigmoid_of(val(a))); }

  VarT<S> matmul(VarT<S> a, VarT<S> b) {
    if (val(a).cols() != val(b).rows())
      throw std::invalid_argument("tape: matmul inner dimension mismatch");
    return push(Op::MatMul, a.id, b.id, val(a) * val(b));
  }
  VarT<S> sum(VarT<S> a) {
    M s(1, 1);
    s(0, 0) = val(a).sum();
    return push(Op::Sum, a.id, -1, std::move(s));
  }
  VarT<S> mean(VarT<S> a) {
    M s(1, 1);
    s(0, 0) = val(a).sum() / S(val(a).size());
    return push(Op::Mean, a.id, -1, std::move(s));
  }
  VarT<S> sub_bc(VarT<S> a, VarT<S> b) {
    check_scalar(b);
    return push(Op::SubBc, a.id, b.id, val(a).array() - val(b)(0, 0));
  }
  VarT<S> mul_bc(VarT<S> a, VarT<S> b) {
    check_scalar(b);
    return push(Op::MulBc, a.id, b.id, val(a) * val(b)(0, 0));
  }
  VarT<S> elem(VarT<S> a, int r, int c) {
    M s(1, 1);
    s(0, 0) = val(a)(r, c);
    VarT<S> out = push(Op::Elem, a.id, -1, std::move(s));
    nodes_[out.id].r = r;
    nodes_[out.id].cc = c;
    return out;
  }
  VarT<S> col(VarT<S> a, int j) {
    VarT<S> out = push(Op::Col, a.id, -1, val(a).col(j));
    nodes_[out.id].cc = j;
    return out;
  }

  // Custom sampling node: values and per-axis derivatives are computed by the
  // caller (field sampler); backward routes adjoints into the coordinate node.
  VarT<S> interp(VarT<S> coords, M values, M grad) {
    if (grad.rows() != values.rows() || grad.cols() != val(coords).cols())
      throw std::invalid_argument("tape: interp gradient shape mismatch");
    VarT<S> out = push(Op::Interp, coords.id, -1, std::move(values));
    nodes_[out.id].aux = std::move(grad);
    return out;
  }

  const M& val(VarT<S> v) const { return nodes_.at(v.id).val; }
  const M& adjoint(VarT<S> v) const { return nodes_.at(v.id).adj; }

  void backward(VarT<S> root) {
    if (nodes_.empty()) throw std::invalid_argument("tape: backward on empty tape");
    if (val(root).rows() != 1 || val(root).cols() != 1)
      throw std::invalid_argument("tape: backward root must be scalar (1x1)");
    for (auto& n : nodes_) n.adj.setZero(n.val.rows(), n.val.cols());
    nodes_[root.id].adj(0, 0) = S(1);
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) backprop_node(i);
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;

  static M sigmoid_of(const M& x) {
    return (S(1) / (S(1) + (-x.array()).exp())).matrix();
  }

  VarT<S> push(Op op, int a, int b, M v) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.val = std::move(v);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  void check_same_shape(VarT<S> a, VarT<S> b) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw std::invalid_argument("tape: elementwise shape mismatch");
  }
  void check_scalar(VarT<S> b) const {
    if (val(b).rows() != 1 || val(b).cols() != 1)
      throw std::invalid_argument("tape: broadcast operand must be 1x1");
  }

  void backprop_node(int i) {
    Node& n = nodes_[i];
    if (n.adj.size() == 0) return;
    const M& g = n.adj;
    auto A = [&]() -> Node& { return nodes_[n.a]; };
    auto B = [&]() -> Node& { return nodes_[n.b]; };
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
        break;
      case Op::Add:
        A().adj += g;
        B().adj += g;
        break;
      case Op::Sub:
        A().adj += g;
        B().adj -= g;
        break;
      case Op::Mul:
        A().adj += g.cwiseProduct(B().val);
        B().adj += g.cwiseProduct(A().val);
        break;
      case Op::Div:
        A().adj += g.cwiseQuotient(B().val);
        B().adj -= g.cwiseProduct(n.val).cwiseQuotient(B().val);
        break;
      case Op::Neg:
        A().adj -= g;
        break;
      case Op::Scale:
        A().adj += g * n.c;
        break;
      case Op::AddScalar:
        A().adj += g;
        break;
      case Op::Tanh:
        A().adj.array() += g.array() * (S(1) - n.val.array().square());
        break;
      case Op::Sin:
        A().adj.array() += g.array() * A().val.array().cos();
        break;
      case Op::Cos:
        A().adj.array() -= g.array() * A().val.array().sin();
        break;
      case Op::Acos:
        A().adj.array() -= g.array() / (S(1) - A().val.array().square()).sqrt();
        break;
      case Op::ClampUnit: {
        const S hi = S(1) - S(kUnitClamp);
        A().adj.array() +=
            g.array() * (A().val.array().abs() <= hi).template cast<S>();
        break;
      }
      case Op::Silu: {
        auto sg = (S(1) / (S(1) + (-A().val.array()).exp()));
        A().adj.array() += g.array() * sg * (S(1) + A().val.array() * (S(1) - sg));
        break;
      }
      case Op::Relu:
        A().adj.array() += g.array() * (A().val.array() > S(0)).template cast<S>();
        break;
      case Op::Abs:
        A().adj.array() += g.array() * A().val.array().sign();
        break;
      case Op::Sqrt:
        A().adj.array() += g.array() * (S(0.5) / n.val.array());
        break;
      case Op::Sigmoid:
        A().adj.array() += g.array() * n.val.array() * (S(1) - n.val.array());
        break;
      case Op::MatMul:
        A().adj.noalias() += g * B().val.transpose();
        B().adj.noalias() += A().val.transpose() * g;
        break;
      case Op::Sum:
        A().adj.array() += g(0, 0);
        break;
      case Op::Mean:
        A().adj.array() += g(0, 0) / S(A().val.size());
        break;
      case Op::SubBc:
        A().adj += g;
        B().adj(0, 0) -= g.sum();
        break;
      case Op::MulBc:
        A().adj += g * B().val(0, 0);
        B().adj(0, 0) += g.cwiseProduct(A().val).sum();
        break;
      case Op::Elem:
        A().adj(n.r, n.cc) += g(0, 0);
        break;
      case Op::Col:
        A().adj.col(n.cc) += g;
        break;
      case Op::Interp:
        for (int k = 0; k < n.aux.cols(); ++k)
          A().adj.col(k).array() += g.col(0).array() * n.aux.col(k).array();
        break;
    }
  }
};

using Tape = TapeT<double>;
using Var = VarT<double>;

}  // namespace kanreg
