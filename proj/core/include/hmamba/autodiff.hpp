#pragma once

#include <cstdint>
#include <vector>

#include "hmamba/tensor.hpp"

namespace hmamba::ad {

enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  MatMul,
  Transpose,
  Exp,
  Expm1,
  Log,
  Sqrt,
  Cosh,
  Sinh,
  Acosh,
  Softplus,
  Sigmoid,
  Silu,
  Abs,
  Neg,
  Scale,
  AddConst,
  Clamp,
  SumAll,
  RowSum,
  MeanAll,
  GatherRows,
  ConcatCols,
  StackRows,
  SliceCols,
  SliceRows,
  ShiftRows,
};

struct Node {
  Op op{Op::Leaf};
  int a{-1};
  int b{-1};
  std::vector<int> many;        // StackRows inputs
  std::vector<long> idx;        // GatherRows indices
  double p0{0.0}, p1{0.0};      // scalar params (scale factor, clamp window)
  int i0{0}, i1{0};             // slice bounds / shift amount
  Tensor val;
  Tensor adj;                   // allocated lazily in backward
  bool requires_grad{true};
};

/// Define-by-run reverse-mode tape. Nodes are appended in forward order,
/// which is a topological order, so backward is a single reverse sweep.
/// Binary elementwise ops broadcast a 1xC row, an Rx1 column or a 1x1
/// scalar against an RxC operand.
class Tape {
 public:
  int leaf(Tensor v);      // differentiable input (parameter)
  int constant(Tensor v);  // non-differentiable input

  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int div(int a, int b);
  int matmul(int a, int b);
  int transpose(int a);

  int exp(int a);
  int expm1(int a);
  int log(int a);
  int sqrt(int a);
  int cosh(int a);
  int sinh(int a);
  int acosh(int a);  // throws std::domain_error if any entry < 1
  int softplus(int a);
  int sigmoid(int a);
  int silu(int a);
  int abs(int a);
  int neg(int a);
  int scale(int a, double c);
  int add_const(int a, double c);
  /// Pass-through gradient inside [lo, hi] (inclusive), exactly zero outside.
  int clamp(int a, double lo, double hi);

  int sum_all(int a);
  int row_sum(int a);  // (R,C) -> (R,1)
  int mean_all(int a);

  int gather_rows(int table, std::vector<long> ids);
  int concat_cols(int a, int b);
  int stack_rows(const std::vector<int>& rows);  // n inputs of (1,C) -> (n,C)
  int slice_cols(int a, int c0, int c1);
  int slice_rows(int a, int r0, int r1);
  int shift_rows(int a, int down);  // row i reads row i-down, zero fill

  const Tensor& val(int id) const { return nodes_[id].val; }
  /// Adjoint after backward(); empty tensor if the node was not reached.
  const Tensor& grad(int id) const { return nodes_[id].adj; }
  bool has_grad(int id) const { return !nodes_[id].adj.empty(); }

  /// Reverse accumulation from a scalar (1x1) root.
  void backward(int root);

  std::size_t size() const { return nodes_.size(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  int push(Node n);
  int unary(Op op, int a, double p0 = 0.0, double p1 = 0.0);
  int binary(Op op, int a, int b);
  Tensor& ensure_adj(int id);

  std::vector<Node> nodes_;
};

}  // namespace hmamba::ad
