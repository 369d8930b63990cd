#include "marl/tape.hpp"

#include <stdexcept>
#include <string>

#include "marl/kernels.hpp"

namespace marl {

namespace k = kernels;

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::MatMul: return "matmul";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Softmax: return "softmax";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Square: return "square";
    case Op::Min2: return "min2";
    case Op::Clip: return "clip";
    case Op::AddConst: return "add_const";
    case Op::MulConst: return "mul_const";
    case Op::AddBcast: return "add_bcast";
    case Op::MulBcast: return "mul_bcast";
    case Op::SliceCols: return "slice_cols";
    case Op::SliceRows: return "slice_rows";
    case Op::ConcatCols: return "concat_cols";
    case Op::ConcatRows: return "concat_rows";
  }
  return "?";
}

int Tape::push(Node n) {
  if (check_finite_ && !k::all_finite(n.val))
    throw std::runtime_error(std::string("tape: non-finite value out of ") + op_name(n.op));
  nodes_.push_back(std::move(n));
  return int(nodes_.size()) - 1;
}

int Tape::leaf(Array v) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(v);
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  const Array &va = nodes_[a].val, &vb = nodes_[b].val;
  if (!va.same_shape(vb)) {
    if (vb.is_scalar()) {
      Node n{Op::AddBcast, a, b};
      n.val = k::add_scalar(va, vb.data[0]);
      return push(std::move(n));
    }
    if (va.is_scalar()) return add(b, a);
  }
  Node n{Op::Add, a, b};
  n.val = k::add(va, vb);
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  const Array &va = nodes_[a].val, &vb = nodes_[b].val;
  if (!va.same_shape(vb) && (va.is_scalar() || vb.is_scalar())) {
    if (vb.is_scalar()) return add(a, mul_const(b, -1.0));
    return add(mul_const(b, -1.0), a);
  }
  Node n{Op::Sub, a, b};
  n.val = k::sub(va, vb);
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  const Array &va = nodes_[a].val, &vb = nodes_[b].val;
  if (!va.same_shape(vb)) {
    if (vb.is_scalar()) {
      Node n{Op::MulBcast, a, b};
      n.val = k::mul_scalar(va, vb.data[0]);
      return push(std::move(n));
    }
    if (va.is_scalar()) return mul(b, a);
  }
  Node n{Op::Mul, a, b};
  n.val = k::mul(va, vb);
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  Node n{Op::MatMul, a, b};
  n.val = k::matmul(nodes_[a].val, nodes_[b].val);
  return push(std::move(n));
}

int Tape::tanh_(int a) {
  Node n{Op::Tanh, a};
  n.val = k::tanh_fwd(nodes_[a].val);
  return push(std::move(n));
}

int Tape::exp_(int a) {
  Node n{Op::Exp, a};
  n.val = k::exp_fwd(nodes_[a].val);
  return push(std::move(n));
}

int Tape::log_(int a) {
  Node n{Op::Log, a};
  n.val = k::log_fwd(nodes_[a].val);
  return push(std::move(n));
}

int Tape::softmax_rows(int a) {
  Node n{Op::Softmax, a};
  n.val = k::softmax_rows(nodes_[a].val);
  return push(std::move(n));
}

int Tape::sum(int a) {
  Node n{Op::Sum, a};
  n.val = Array::scalar(k::sum_all(nodes_[a].val));
  return push(std::move(n));
}

int Tape::mean(int a) {
  Node n{Op::Mean, a};
  const Array& v = nodes_[a].val;
  if (v.size() == 0) throw std::invalid_argument("mean: empty array");
  n.val = Array::scalar(k::sum_all(v) / double(v.size()));
  return push(std::move(n));
}

int Tape::square(int a) {
  Node n{Op::Square, a};
  n.val = k::square_fwd(nodes_[a].val);
  return push(std::move(n));
}

int Tape::min2(int a, int b) {
  Node n{Op::Min2, a, b};
  n.val = k::min2(nodes_[a].val, nodes_[b].val);
  return push(std::move(n));
}

int Tape::clip(int a, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clip: lo > hi");
  Node n{Op::Clip, a};
  n.p0 = lo;
  n.p1 = hi;
  n.val = k::clip_fwd(nodes_[a].val, lo, hi);
  return push(std::move(n));
}

int Tape::add_const(int a, double c) {
  Node n{Op::AddConst, a};
  n.p0 = c;
  n.val = k::add_scalar(nodes_[a].val, c);
  return push(std::move(n));
}

int Tape::mul_const(int a, double c) {
  Node n{Op::MulConst, a};
  n.p0 = c;
  n.val = k::mul_scalar(nodes_[a].val, c);
  return push(std::move(n));
}

int Tape::slice_cols(int a, int c0, int c1) {
  Node n{Op::SliceCols, a};
  n.i0 = c0;
  n.i1 = c1;
  n.val = k::slice_cols(nodes_[a].val, c0, c1);
  return push(std::move(n));
}

int Tape::slice_rows(int a, int r0, int r1) {
  Node n{Op::SliceRows, a};
  n.i0 = r0;
  n.i1 = r1;
  n.val = k::slice_rows(nodes_[a].val, r0, r1);
  return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
  Node n{Op::ConcatCols, a, b};
  n.val = k::concat_cols(nodes_[a].val, nodes_[b].val);
  return push(std::move(n));
}

int Tape::concat_rows(int a, int b) {
  Node n{Op::ConcatRows, a, b};
  n.val = k::concat_rows(nodes_[a].val, nodes_[b].val);
  return push(std::move(n));
}

double Tape::scalar(int id) const {
  const Array& v = nodes_[id].val;
  if (!v.is_scalar()) throw std::invalid_argument("scalar: node is " + v.shape_str());
  return v.data[0];
}

const Array& Tape::grad(int id) const {
  const Array& g = nodes_[id].grad;
  if (g.size() == 0)
    throw std::logic_error("grad: backward has not populated this node");
  return g;
}

Array& Tape::grad_slot(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Array(n.val.rows, n.val.cols);
  return n.grad;
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad = Array();
}

void Tape::backward(int root) {
  if (root < 0 || root >= int(nodes_.size()))
    throw std::invalid_argument("backward: bad root id");
  if (!nodes_[root].val.is_scalar())
    throw std::invalid_argument("backward: root must be 1x1, got " +
                                nodes_[root].val.shape_str());

  std::vector<char> reached(nodes_.size(), 0);
  reached[root] = 1;
  for (int i = root; i >= 0; --i) {
    if (!reached[i]) continue;
    const Node& n = nodes_[i];
    if (n.a >= 0) reached[n.a] = 1;
    if (n.b >= 0) reached[n.b] = 1;
  }

  grad_slot(root).data[0] = 1.0;

  for (int i = root; i >= 0; --i) {
    if (!reached[i]) continue;
    Node& n = nodes_[i];
    if (n.op == Op::Leaf) continue;
    const Array& g = n.grad;
    if (g.size() == 0) continue;  // reachable but no gradient flowed here
    const Array& va = nodes_[n.a].val;
    switch (n.op) {
      case Op::Add:
        k::acc(grad_slot(n.a), g);
        k::acc(grad_slot(n.b), g);
        break;
      case Op::Sub:
        k::acc(grad_slot(n.a), g);
        k::acc_neg(grad_slot(n.b), g);
        break;
      case Op::Mul:
        k::acc_mul(grad_slot(n.a), g, nodes_[n.b].val);
        k::acc_mul(grad_slot(n.b), g, va);
        break;
      case Op::MatMul:
        k::matmul_acc_nt(grad_slot(n.a), g, nodes_[n.b].val);
        k::matmul_acc_tn(grad_slot(n.b), va, g);
        break;
      case Op::Tanh:
        k::tanh_bwd(grad_slot(n.a), g, n.val);
        break;
      case Op::Exp:
        k::exp_bwd(grad_slot(n.a), g, n.val);
        break;
      case Op::Log:
        k::log_bwd(grad_slot(n.a), g, va);
        break;
      case Op::Softmax:
        k::softmax_bwd(grad_slot(n.a), g, n.val);
        break;
      case Op::Sum: {
        Array& da = grad_slot(n.a);
        const double gv = g.data[0];
        for (double& x : da.data) x += gv;
        break;
      }
      case Op::Mean: {
        Array& da = grad_slot(n.a);
        const double gv = g.data[0] / double(va.size());
        for (double& x : da.data) x += gv;
        break;
      }
      case Op::Square:
        k::square_bwd(grad_slot(n.a), g, va);
        break;
      case Op::Min2:
        k::min2_bwd(grad_slot(n.a), grad_slot(n.b), g, va, nodes_[n.b].val);
        break;
      case Op::Clip:
        k::clip_bwd(grad_slot(n.a), g, va, n.p0, n.p1);
        break;
      case Op::AddConst:
        k::acc(grad_slot(n.a), g);
        break;
      case Op::MulConst:
        k::acc_scaled(grad_slot(n.a), g, n.p0);
        break;
      case Op::AddBcast:
        k::acc(grad_slot(n.a), g);
        grad_slot(n.b).data[0] += k::sum_all(g);
        break;
      case Op::MulBcast:
        k::acc_scaled(grad_slot(n.a), g, nodes_[n.b].val.data[0]);
        grad_slot(n.b).data[0] += k::dot_all(g, va);
        break;
      case Op::SliceCols:
        k::scatter_add_cols(grad_slot(n.a), g, n.i0);
        break;
      case Op::SliceRows:
        k::scatter_add_rows(grad_slot(n.a), g, n.i0);
        break;
      case Op::ConcatCols: {
        const Array& vb = nodes_[n.b].val;
        k::acc(grad_slot(n.a), k::slice_cols(g, 0, va.cols));
        k::acc(grad_slot(n.b), k::slice_cols(g, va.cols, va.cols + vb.cols));
        break;
      }
      case Op::ConcatRows: {
        const Array& vb = nodes_[n.b].val;
        k::acc(grad_slot(n.a), k::slice_rows(g, 0, va.rows));
        k::acc(grad_slot(n.b), k::slice_rows(g, va.rows, va.rows + vb.rows));
        break;
      }
      case Op::Leaf:
        break;
    }
  }

  // Every leaf exposes a gradient afterwards, zero when disconnected.
  for (Node& n : nodes_)
    if (n.op == Op::Leaf && n.grad.size() == 0) n.grad = Array(n.val.rows, n.val.cols);
}

}  // namespace marl
