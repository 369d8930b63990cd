#pragma once

#include <cstdint>
#include <vector>

#include "marl/array.hpp"

namespace marl {

enum class Op : uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  MatMul,
  Tanh,
  Exp,
  Log,
  Softmax,
  Sum,
  Mean,
  Square,
  Min2,
  Clip,
  AddConst,
  MulConst,
  AddBcast,  // array + 1x1 node
  MulBcast,  // array * 1x1 node
  SliceCols,
  SliceRows,
  ConcatCols,
  ConcatRows,
};

const char* op_name(Op op);

// Reverse-mode tape. Values are computed eagerly when a node is recorded;
// backward() walks the tape once in reverse. Graphs are rebuilt every update,
// so a Tape is cheap to construct and throw away.
class Tape {
 public:
  struct Node {
    Op op = Op::Leaf;
    int a = -1, b = -1;
    double p0 = 0.0, p1 = 0.0;
    int i0 = 0, i1 = 0;
    Array val;
    Array grad;  // empty until backward touches it
  };

  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  int leaf(Array v);
  int constant(double v) { return leaf(Array::scalar(v)); }
  int full(int rows, int cols, double v) { return leaf(Array::full(rows, cols, v)); }

  // add/sub/mul dispatch to the broadcast form when one side is 1x1 and the
  // shapes differ; same-shape 1x1 pairs stay elementwise (equivalent anyway).
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int matmul(int a, int b);
  int tanh_(int a);
  int exp_(int a);
  int log_(int a);
  int softmax_rows(int a);
  int sum(int a);
  int mean(int a);
  int square(int a);
  int min2(int a, int b);
  int clip(int a, double lo, double hi);
  int add_const(int a, double c);
  int mul_const(int a, double c);
  int slice_cols(int a, int c0, int c1);
  int slice_rows(int a, int r0, int r1);
  int concat_cols(int a, int b);
  int concat_rows(int a, int b);

  // Root must be 1x1. Allocates a zero gradient for every unreached leaf so
  // callers can read all leaf grads unconditionally.
  void backward(int root);
  void zero_grad();

  const Array& val(int id) const { return nodes_[id].val; }
  double scalar(int id) const;
  const Array& grad(int id) const;
  size_t size() const { return nodes_.size(); }
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  int push(Node n);
  Array& grad_slot(int id);

  std::vector<Node> nodes_;
  bool check_finite_;
};

// Thin handle so loss code reads like the math.
struct Val {
  Tape* t = nullptr;
  int id = -1;
  const Array& array() const { return t->val(id); }
  double scalar() const { return t->scalar(id); }
  const Array& grad() const { return t->grad(id); }
};

inline Val wrap(Tape& t, int id) { return {&t, id}; }
inline Val leaf(Tape& t, Array v) { return {&t, t.leaf(std::move(v))}; }
inline Val constant(Tape& t, double v) { return {&t, t.constant(v)}; }

inline Val operator+(Val a, Val b) { return {a.t, a.t->add(a.id, b.id)}; }
inline Val operator-(Val a, Val b) { return {a.t, a.t->sub(a.id, b.id)}; }
inline Val operator*(Val a, Val b) { return {a.t, a.t->mul(a.id, b.id)}; }
inline Val operator+(Val a, double c) { return {a.t, a.t->add_const(a.id, c)}; }
inline Val operator-(Val a, double c) { return {a.t, a.t->add_const(a.id, -c)}; }
inline Val operator*(Val a, double c) { return {a.t, a.t->mul_const(a.id, c)}; }
inline Val operator*(double c, Val a) { return a * c; }
inline Val operator-(Val a) { return a * -1.0; }

inline Val matmul(Val a, Val b) { return {a.t, a.t->matmul(a.id, b.id)}; }
inline Val tanh(Val a) { return {a.t, a.t->tanh_(a.id)}; }
inline Val exp(Val a) { return {a.t, a.t->exp_(a.id)}; }
inline Val log(Val a) { return {a.t, a.t->log_(a.id)}; }
inline Val softmax_rows(Val a) { return {a.t, a.t->softmax_rows(a.id)}; }
inline Val sum(Val a) { return {a.t, a.t->sum(a.id)}; }
inline Val mean(Val a) { return {a.t, a.t->mean(a.id)}; }
inline Val square(Val a) { return {a.t, a.t->square(a.id)}; }
inline Val min2(Val a, Val b) { return {a.t, a.t->min2(a.id, b.id)}; }
inline Val clip(Val a, double lo, double hi) { return {a.t, a.t->clip(a.id, lo, hi)}; }
inline Val slice_cols(Val a, int c0, int c1) { return {a.t, a.t->slice_cols(a.id, c0, c1)}; }
inline Val slice_rows(Val a, int r0, int r1) { return {a.t, a.t->slice_rows(a.id, r0, r1)}; }
inline Val concat_cols(Val a, Val b) { return {a.t, a.t->concat_cols(a.id, b.id)}; }
inline Val concat_rows(Val a, Val b) { return {a.t, a.t->concat_rows(a.id, b.id)}; }

}  // namespace marl
