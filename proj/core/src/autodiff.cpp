#include "hmamba/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hmamba::ad {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

bool broadcastable(const Tensor& a, const Tensor& b, std::size_t& R, std::size_t& C) {
  R = std::max(a.rows(), b.rows());
  C = std::max(a.cols(), b.cols());
  auto ok = [&](const Tensor& t) {
    return (t.rows() == R || t.rows() == 1) && (t.cols() == C || t.cols() == 1);
  };
  return ok(a) && ok(b);
}

inline double pick(const Tensor& t, std::size_t r, std::size_t c) {
  return t(t.rows() == 1 ? 0 : r, t.cols() == 1 ? 0 : c);
}

// Accumulates g (shape RxC) into the adjoint of an operand that may have
// been broadcast from shape (tr x tc).
void reduce_into(Tensor& acc, const Tensor& g) {
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      acc(acc.rows() == 1 ? 0 : r, acc.cols() == 1 ? 0 : c) += g(r, c);
    }
  }
}

}  // namespace

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor v) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(v);
  n.requires_grad = true;
  return push(std::move(n));
}

int Tape::constant(Tensor v) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(v);
  n.requires_grad = false;
  return push(std::move(n));
}

Tensor& Tape::ensure_adj(int id) {
  Node& n = nodes_[id];
  if (n.adj.empty()) n.adj = Tensor(n.val.rows(), n.val.cols(), 0.0);
  return n.adj;
}

int Tape::unary(Op op, int a, double p0, double p1) {
  const Tensor& x = nodes_[a].val;
  Node n;
  n.op = op;
  n.a = a;
  n.p0 = p0;
  n.p1 = p1;
  n.requires_grad = nodes_[a].requires_grad;
  n.val = Tensor(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x[i];
    double y = 0.0;
    switch (op) {
      case Op::Exp: y = std::exp(v); break;
      case Op::Expm1: y = std::expm1(v); break;
      case Op::Log: y = std::log(v); break;
      case Op::Sqrt: y = std::sqrt(v); break;
      case Op::Cosh: y = std::cosh(v); break;
      case Op::Sinh: y = std::sinh(v); break;
      case Op::Acosh:
        if (v < 1.0) {
          throw std::domain_error("acosh: argument " + std::to_string(v) + " below 1");
        }
        y = std::acosh(v);
        break;
      case Op::Softplus: y = stable_softplus(v); break;
      case Op::Sigmoid: y = stable_sigmoid(v); break;
      case Op::Silu: y = v * stable_sigmoid(v); break;
      case Op::Abs: y = std::fabs(v); break;
      case Op::Neg: y = -v; break;
      case Op::Scale: y = p0 * v; break;
      case Op::AddConst: y = v + p0; break;
      case Op::Clamp: y = v < p0 ? p0 : (v > p1 ? p1 : v); break;
      default: assert(false);
    }
    n.val[i] = y;
  }
  return push(std::move(n));
}

int Tape::binary(Op op, int a, int b) {
  const Tensor& x = nodes_[a].val;
  const Tensor& y = nodes_[b].val;
  std::size_t R, C;
  if (!broadcastable(x, y, R, C)) {
    throw std::invalid_argument("tape binary op: incompatible shapes " + x.shape_str() +
                                " vs " + y.shape_str());
  }
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  n.val = Tensor(R, C);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      double u = pick(x, r, c), v = pick(y, r, c);
      double out = 0.0;
      switch (op) {
        case Op::Add: out = u + v; break;
        case Op::Sub: out = u - v; break;
        case Op::Mul: out = u * v; break;
        case Op::Div: out = u / v; break;
        default: assert(false);
      }
      n.val(r, c) = out;
    }
  }
  return push(std::move(n));
}

int Tape::add(int a, int b) { return binary(Op::Add, a, b); }
int Tape::sub(int a, int b) { return binary(Op::Sub, a, b); }
int Tape::mul(int a, int b) { return binary(Op::Mul, a, b); }
int Tape::div(int a, int b) { return binary(Op::Div, a, b); }

int Tape::matmul(int a, int b) {
  const Tensor& x = nodes_[a].val;
  const Tensor& y = nodes_[b].val;
  if (x.cols() != y.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + x.shape_str() + " * " +
                                y.shape_str());
  }
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  n.val = Tensor(x.rows(), y.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t kk = 0; kk < x.cols(); ++kk) {
      double xv = x(i, kk);
      if (xv == 0.0) continue;
      for (std::size_t j = 0; j < y.cols(); ++j) {
        n.val(i, j) += xv * y(kk, j);
      }
    }
  }
  return push(std::move(n));
}

int Tape::transpose(int a) {
  const Tensor& x = nodes_[a].val;
  Node n;
  n.op = Op::Transpose;
  n.a = a;
  n.requires_grad = nodes_[a].requires_grad;
  n.val = Tensor(x.cols(), x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) n.val(c, r) = x(r, c);
  }
  return push(std::move(n));
}

int Tape::exp(int a) { return unary(Op::Exp, a); }
int Tape::expm1(int a) { return unary(Op::Expm1, a); }
int Tape::log(int a) { return unary(Op::Log, a); }
int Tape::sqrt(int a) { return unary(Op::Sqrt, a); }
int Tape::cosh(int a) { return unary(Op::Cosh, a); }
int Tape::sinh(int a) { return unary(Op::Sinh, a); }
int Tape::acosh(int a) { return unary(Op::Acosh, a); }
int Tape::softplus(int a) { return unary(Op::Softplus, a); }
int Tape::sigmoid(int a) { return unary(Op::Sigmoid, a); }
int Tape::silu(int a) { return unary(Op::Silu, a); }
int Tape::abs(int a) { return unary(Op::Abs, a); }
int Tape::neg(int a) { return unary(Op::Neg, a); }
int Tape::scale(int a, double c) { return unary(Op::Scale, a, c); }
int Tape::add_const(int a, double c) { return unary(Op::AddConst, a, c); }

int Tape::clamp(int a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  return unary(Op::Clamp, a, lo, hi);
}

int Tape::sum_all(int a) {
  Node n;
  n.op = Op::SumAll;
  n.a = a;
  n.requires_grad = nodes_[a].requires_grad;
  double s = 0.0;
  for (std::size_t i = 0; i < nodes_[a].val.size(); ++i) s += nodes_[a].val[i];
  n.val = Tensor::scalar(s);
  return push(std::move(n));
}

int Tape::row_sum(int a) {
  const Tensor& x = nodes_[a].val;
  Node n;
  n.op = Op::RowSum;
  n.a = a;
  n.requires_grad = nodes_[a].requires_grad;
  n.val = Tensor(x.rows(), 1, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) s += x(r, c);
    n.val(r, 0) = s;
  }
  return push(std::move(n));
}

int Tape::mean_all(int a) {
  Node n;
  n.op = Op::MeanAll;
  n.a = a;
  n.requires_grad = nodes_[a].requires_grad;
  double s = 0.0;
  for (std::size_t i = 0; i < nodes_[a].val.size(); ++i) s += nodes_[a].val[i];
  n.val = Tensor::scalar(s / static_cast<double>(nodes_[a].val.size()));
  return push(std::move(n));
}

int Tape::gather_rows(int table, std::vector<long> ids) {
  const Tensor& t = nodes_[table].val;
  Node n;
  n.op = Op::GatherRows;
  n.a = table;
  n.requires_grad = nodes_[table].requires_grad;
  n.val = Tensor(ids.size(), t.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    long id = ids[r];
    if (id < 0 || static_cast<std::size_t>(id) >= t.rows()) {
      throw std::out_of_range("gather_rows: index " + std::to_string(id) +
                              " out of range for " + t.shape_str());
    }
    for (std::size_t c = 0; c < t.cols(); ++c) n.val(r, c) = t(id, c);
  }
  n.idx = std::move(ids);
  return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
  const Tensor& x = nodes_[a].val;
  const Tensor& y = nodes_[b].val;
  if (x.rows() != y.rows()) {
    throw std::invalid_argument("concat_cols: row mismatch");
  }
  Node n;
  n.op = Op::ConcatCols;
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  n.val = Tensor(x.rows(), x.cols() + y.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) n.val(r, c) = x(r, c);
    for (std::size_t c = 0; c < y.cols(); ++c) n.val(r, x.cols() + c) = y(r, c);
  }
  return push(std::move(n));
}

int Tape::stack_rows(const std::vector<int>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
  std::size_t C = nodes_[rows[0]].val.cols();
  Node n;
  n.op = Op::StackRows;
  n.many = rows;
  n.requires_grad = false;
  n.val = Tensor(rows.size(), C);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Tensor& x = nodes_[rows[r]].val;
    if (x.rows() != 1 || x.cols() != C) {
      throw std::invalid_argument("stack_rows: inputs must all be 1x" + std::to_string(C));
    }
    n.requires_grad = n.requires_grad || nodes_[rows[r]].requires_grad;
    for (std::size_t c = 0; c < C; ++c) n.val(r, c) = x(0, c);
  }
  return push(std::move(n));
}

int Tape::slice_cols(int a, int c0, int c1) {
  const Tensor& x = nodes_[a].val;
  if (c0 < 0 || c1 > static_cast<int>(x.cols()) || c0 >= c1) {
    throw std::invalid_argument("slice_cols: bad range");
  }
  Node n;
  n.op = Op::SliceCols;
  n.a = a;
  n.i0 = c0;
  n.i1 = c1;
  n.requires_grad = nodes_[a].requires_grad;
  n.val = Tensor(x.rows(), c1 - c0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (int c = c0; c < c1; ++c) n.val(r, c - c0) = x(r, c);
  }
  return push(std::move(n));
}

int Tape::slice_rows(int a, int r0, int r1) {
  const Tensor& x = nodes_[a].val;
  if (r0 < 0 || r1 > static_cast<int>(x.rows()) || r0 >= r1) {
    throw std::invalid_argument("slice_rows: bad range");
  }
  Node n;
  n.op = Op::SliceRows;
  n.a = a;
  n.i0 = r0;
  n.i1 = r1;
  n.requires_grad = nodes_[a].requires_grad;
  n.val = Tensor(r1 - r0, x.cols());
  for (int r = r0; r < r1; ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) n.val(r - r0, c) = x(r, c);
  }
  return push(std::move(n));
}

int Tape::shift_rows(int a, int down) {
  const Tensor& x = nodes_[a].val;
  if (down < 0) throw std::invalid_argument("shift_rows: negative shift");
  Node n;
  n.op = Op::ShiftRows;
  n.a = a;
  n.i0 = down;
  n.requires_grad = nodes_[a].requires_grad;
  n.val = Tensor(x.rows(), x.cols(), 0.0);
  for (std::size_t r = static_cast<std::size_t>(down); r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) n.val(r, c) = x(r - down, c);
  }
  return push(std::move(n));
}

void Tape::backward(int root) {
  if (root < 0 || root >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("backward: bad root");
  }
  if (nodes_[root].val.size() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got " +
                                nodes_[root].val.shape_str());
  }
  ensure_adj(root)[0] = 1.0;

  for (int id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.adj.empty() || !n.requires_grad || n.op == Op::Leaf) continue;
    const Tensor& g = n.adj;
    const Tensor& x = n.a >= 0 ? nodes_[n.a].val : n.val;

    auto want_a = [&] { return n.a >= 0 && nodes_[n.a].requires_grad; };
    auto want_b = [&] { return n.b >= 0 && nodes_[n.b].requires_grad; };

    switch (n.op) {
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div: {
        const Tensor& y = nodes_[n.b].val;
        if (want_a()) {
          Tensor ga(g.rows(), g.cols());
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) {
              double gv = g(r, c);
              switch (n.op) {
                case Op::Add:
                case Op::Sub: break;
                case Op::Mul: gv *= pick(y, r, c); break;
                case Op::Div: gv /= pick(y, r, c); break;
                default: break;
              }
              ga(r, c) = gv;
            }
          reduce_into(ensure_adj(n.a), ga);
        }
        if (want_b()) {
          Tensor gb(g.rows(), g.cols());
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) {
              double gv = g(r, c);
              double u = pick(x, r, c), v = pick(y, r, c);
              switch (n.op) {
                case Op::Add: break;
                case Op::Sub: gv = -gv; break;
                case Op::Mul: gv *= u; break;
                case Op::Div: gv *= -u / (v * v); break;
                default: break;
              }
              gb(r, c) = gv;
            }
          reduce_into(ensure_adj(n.b), gb);
        }
        break;
      }
      case Op::MatMul: {
        const Tensor& y = nodes_[n.b].val;
        if (want_a()) {
          Tensor& ga = ensure_adj(n.a);
          for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t kk = 0; kk < x.cols(); ++kk) {
              double s = 0.0;
              for (std::size_t j = 0; j < y.cols(); ++j) s += g(i, j) * y(kk, j);
              ga(i, kk) += s;
            }
        }
        if (want_b()) {
          Tensor& gb = ensure_adj(n.b);
          for (std::size_t kk = 0; kk < y.rows(); ++kk)
            for (std::size_t j = 0; j < y.cols(); ++j) {
              double s = 0.0;
              for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, kk) * g(i, j);
              gb(kk, j) += s;
            }
        }
        break;
      }
      case Op::Transpose: {
        if (want_a()) {
          Tensor& ga = ensure_adj(n.a);
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
        }
        break;
      }
      case Op::Exp:
      case Op::Expm1:
      case Op::Log:
      case Op::Sqrt:
      case Op::Cosh:
      case Op::Sinh:
      case Op::Acosh:
      case Op::Softplus:
      case Op::Sigmoid:
      case Op::Silu:
      case Op::Abs:
      case Op::Neg:
      case Op::Scale:
      case Op::AddConst:
      case Op::Clamp: {
        if (!want_a()) break;
        Tensor& ga = ensure_adj(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          double v = x[i];
          double d = 0.0;
          switch (n.op) {
            case Op::Exp: d = n.val[i]; break;
            case Op::Expm1: d = n.val[i] + 1.0; break;
            case Op::Log: d = 1.0 / v; break;
            case Op::Sqrt: d = 0.5 / n.val[i]; break;
            case Op::Cosh: d = std::sinh(v); break;
            case Op::Sinh: d = std::cosh(v); break;
            case Op::Acosh: d = 1.0 / std::sqrt(v * v - 1.0); break;
            case Op::Softplus: d = stable_sigmoid(v); break;
            case Op::Sigmoid: {
              double s = n.val[i];
              d = s * (1.0 - s);
              break;
            }
            case Op::Silu: {
              double s = stable_sigmoid(v);
              d = s * (1.0 + v * (1.0 - s));
              break;
            }
            case Op::Abs: d = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); break;
            case Op::Neg: d = -1.0; break;
            case Op::Scale: d = n.p0; break;
            case Op::AddConst: d = 1.0; break;
            case Op::Clamp: d = (v >= n.p0 && v <= n.p1) ? 1.0 : 0.0; break;
            default: break;
          }
          ga[i] += g[i] * d;
        }
        break;
      }
      case Op::SumAll: {
        if (!want_a()) break;
        Tensor& ga = ensure_adj(n.a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      }
      case Op::MeanAll: {
        if (!want_a()) break;
        Tensor& ga = ensure_adj(n.a);
        double w = g[0] / static_cast<double>(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += w;
        break;
      }
      case Op::RowSum: {
        if (!want_a()) break;
        Tensor& ga = ensure_adj(n.a);
        for (std::size_t r = 0; r < ga.rows(); ++r)
          for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(r, 0);
        break;
      }
      case Op::GatherRows: {
        if (!want_a()) break;
        Tensor& ga = ensure_adj(n.a);
        for (std::size_t r = 0; r < n.idx.size(); ++r) {
          long id = n.idx[r];
          for (std::size_t c = 0; c < ga.cols(); ++c) ga(id, c) += g(r, c);
        }
        break;
      }
      case Op::ConcatCols: {
        const Tensor& y = nodes_[n.b].val;
        if (want_a()) {
          Tensor& ga = ensure_adj(n.a);
          for (std::size_t r = 0; r < ga.rows(); ++r)
            for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(r, c);
        }
        if (want_b()) {
          Tensor& gb = ensure_adj(n.b);
          std::size_t off = nodes_[n.a].val.cols();
          for (std::size_t r = 0; r < y.rows(); ++r)
            for (std::size_t c = 0; c < y.cols(); ++c) gb(r, c) += g(r, off + c);
        }
        break;
      }
      case Op::StackRows: {
        for (std::size_t r = 0; r < n.many.size(); ++r) {
          int src = n.many[r];
          if (!nodes_[src].requires_grad) continue;
          Tensor& gs = ensure_adj(src);
          for (std::size_t c = 0; c < gs.cols(); ++c) gs(0, c) += g(r, c);
        }
        break;
      }
      case Op::SliceCols: {
        if (!want_a()) break;
        Tensor& ga = ensure_adj(n.a);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga(r, n.i0 + c) += g(r, c);
        break;
      }
      case Op::SliceRows: {
        if (!want_a()) break;
        Tensor& ga = ensure_adj(n.a);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga(n.i0 + r, c) += g(r, c);
        break;
      }
      case Op::ShiftRows: {
        if (!want_a()) break;
        Tensor& ga = ensure_adj(n.a);
        for (std::size_t r = static_cast<std::size_t>(n.i0); r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga(r - n.i0, c) += g(r, c);
        break;
      }
      case Op::Leaf:
        break;
    }
  }
}

}  // namespace hmamba::ad
