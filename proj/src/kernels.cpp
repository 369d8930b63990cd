#include "marl/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace marl::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Below these sizes the OpenMP fork/join costs more than the loop.
constexpr size_t kEwGrain = size_t(1) << 14;
constexpr size_t kMmGrain = size_t(1) << 15;

void require_mm(const Array& a, const Array& b, int ak, int bk, const char* op) {
  int ka = ak == 0 ? a.rows : a.cols;
  int kb = bk == 0 ? b.rows : b.cols;
  if (ka != kb)
    throw std::invalid_argument(std::string(op) + ": inner dim mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
}

}  // namespace

void set_parallel(bool on) { g_parallel.store(on); }
bool parallel_enabled() { return g_parallel.load(); }

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

Array matmul(const Array& a, const Array& b) {
  require_mm(a, b, 1, 0, "matmul");
  Array c(a.rows, b.cols);
  matmul_acc(c, a, b);
  return c;
}

void matmul_acc(Array& c, const Array& a, const Array& b) {
  const int m = a.rows, k = a.cols, n = b.cols;
  for (int i = 0; i < m; ++i) {
    const double* ar = a.row(i);
    double* cr = c.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b.row(p);
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

Array matmul_nt(const Array& a, const Array& b) {
  require_mm(a, b, 1, 1, "matmul_nt");
  Array c(a.rows, b.rows);
  matmul_acc_nt(c, a, b);
  return c;
}

void matmul_acc_nt(Array& c, const Array& a, const Array& b) {
  const int m = a.rows, k = a.cols, n = b.rows;
  for (int i = 0; i < m; ++i) {
    const double* ar = a.row(i);
    double* cr = c.row(i);
    for (int j = 0; j < n; ++j) {
      const double* br = b.row(j);
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ar[p] * br[p];
      cr[j] += s;
    }
  }
}

Array matmul_tn(const Array& a, const Array& b) {
  require_mm(a, b, 0, 0, "matmul_tn");
  Array c(a.cols, b.cols);
  matmul_acc_tn(c, a, b);
  return c;
}

void matmul_acc_tn(Array& c, const Array& a, const Array& b) {
  const int m = a.cols, k = a.rows, n = b.cols;
  // Outer-product order: every c(i,j) still accumulates in ascending p, so
  // the result is bit-identical to a naive serial dot, but all inner reads
  // and writes are sequential.
  for (int p = 0; p < k; ++p) {
    const double* ar = a.row(p);
    const double* br = b.row(p);
    for (int i = 0; i < m; ++i) {
      double* cr = c.row(i);
      const double ai = ar[i];
      for (int j = 0; j < n; ++j) cr[j] += ai * br[j];
    }
  }
}

Array add(const Array& a, const Array& b) {
  require_same_shape(a, b, "add");
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] + b.data[i];
  return c;
}

Array sub(const Array& a, const Array& b) {
  require_same_shape(a, b, "sub");
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] - b.data[i];
  return c;
}

Array mul(const Array& a, const Array& b) {
  require_same_shape(a, b, "mul");
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] * b.data[i];
  return c;
}

Array min2(const Array& a, const Array& b) {
  require_same_shape(a, b, "min2");
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i)
    c.data[i] = a.data[i] <= b.data[i] ? a.data[i] : b.data[i];
  return c;
}

Array add_scalar(const Array& a, double s) {
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] + s;
  return c;
}

Array mul_scalar(const Array& a, double s) {
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] * s;
  return c;
}

Array tanh_fwd(const Array& a) {
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) c.data[i] = std::tanh(a.data[i]);
  return c;
}

Array exp_fwd(const Array& a) {
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) c.data[i] = std::exp(a.data[i]);
  return c;
}

Array log_fwd(const Array& a) {
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i)
    c.data[i] = std::log(a.data[i] > kLogFloor ? a.data[i] : kLogFloor);
  return c;
}

Array square_fwd(const Array& a) {
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] * a.data[i];
  return c;
}

Array clip_fwd(const Array& a, double lo, double hi) {
  Array c(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) {
    double x = a.data[i];
    c.data[i] = x < lo ? lo : (x > hi ? hi : x);
  }
  return c;
}

Array softmax_rows(const Array& a) {
  Array c(a.rows, a.cols);
  for (int r = 0; r < a.rows; ++r) {
    const double* x = a.row(r);
    double* y = c.row(r);
    double mx = x[0];
    for (int j = 1; j < a.cols; ++j) mx = x[j] > mx ? x[j] : mx;
    double z = 0.0;
    for (int j = 0; j < a.cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    double inv = 1.0 / z;
    for (int j = 0; j < a.cols; ++j) y[j] *= inv;
  }
  return c;
}

double sum_all(const Array& a) {
  // Canonical reduction order: left-to-right within a row, rows combined in
  // row order. The parallel variant reproduces this exactly.
  double total = 0.0;
  for (int r = 0; r < a.rows; ++r) {
    const double* x = a.row(r);
    double p = 0.0;
    for (int j = 0; j < a.cols; ++j) p += x[j];
    total += p;
  }
  return total;
}

void acc(Array& dst, const Array& g) {
  for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += g.data[i];
}

void acc_neg(Array& dst, const Array& g) {
  for (size_t i = 0; i < dst.size(); ++i) dst.data[i] -= g.data[i];
}

void acc_scaled(Array& dst, const Array& g, double c) {
  for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += c * g.data[i];
}

void acc_mul(Array& dst, const Array& g, const Array& x) {
  for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += g.data[i] * x.data[i];
}

void tanh_bwd(Array& dx, const Array& g, const Array& y) {
  for (size_t i = 0; i < dx.size(); ++i)
    dx.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
}

void exp_bwd(Array& dx, const Array& g, const Array& y) {
  for (size_t i = 0; i < dx.size(); ++i) dx.data[i] += g.data[i] * y.data[i];
}

void log_bwd(Array& dx, const Array& g, const Array& x) {
  // Zero gradient in the floored region.
  for (size_t i = 0; i < dx.size(); ++i)
    if (x.data[i] > kLogFloor) dx.data[i] += g.data[i] / x.data[i];
}

void square_bwd(Array& dx, const Array& g, const Array& x) {
  for (size_t i = 0; i < dx.size(); ++i) dx.data[i] += 2.0 * x.data[i] * g.data[i];
}

void clip_bwd(Array& dx, const Array& g, const Array& x, double lo, double hi) {
  // Pass-through on the closed interval.
  for (size_t i = 0; i < dx.size(); ++i)
    if (x.data[i] >= lo && x.data[i] <= hi) dx.data[i] += g.data[i];
}

void min2_bwd(Array& da, Array& db, const Array& g, const Array& a, const Array& b) {
  // Ties route to the first operand.
  for (size_t i = 0; i < g.size(); ++i) {
    if (a.data[i] <= b.data[i])
      da.data[i] += g.data[i];
    else
      db.data[i] += g.data[i];
  }
}

void softmax_bwd(Array& dx, const Array& g, const Array& y) {
  for (int r = 0; r < y.rows; ++r) {
    const double* gr = g.row(r);
    const double* yr = y.row(r);
    double* dr = dx.row(r);
    double dot = 0.0;
    for (int j = 0; j < y.cols; ++j) dot += gr[j] * yr[j];
    for (int j = 0; j < y.cols; ++j) dr[j] += yr[j] * (gr[j] - dot);
  }
}

double dot_all(const Array& g, const Array& x) {
  double total = 0.0;
  for (int r = 0; r < g.rows; ++r) {
    const double* gr = g.row(r);
    const double* xr = x.row(r);
    double p = 0.0;
    for (int j = 0; j < g.cols; ++j) p += gr[j] * xr[j];
    total += p;
  }
  return total;
}

}  // namespace serial

// OpenMP twins. Each splits work across rows (or flat elements) whose results
// are independent; per-element arithmetic is byte-for-byte the serial code.

namespace {
inline bool par_ew(size_t n) { return g_parallel.load() && n >= kEwGrain; }
inline bool par_mm(size_t flops) { return g_parallel.load() && flops >= kMmGrain; }
}  // namespace

Array matmul(const Array& a, const Array& b) {
  require_mm(a, b, 1, 0, "matmul");
  Array c(a.rows, b.cols);
  matmul_acc(c, a, b);
  return c;
}

void matmul_acc(Array& c, const Array& a, const Array& b) {
  const int m = a.rows, k = a.cols, n = b.cols;
  if (!par_mm(size_t(m) * k * n)) {
    serial::matmul_acc(c, a, b);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* ar = a.row(i);
    double* cr = c.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b.row(p);
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

Array matmul_nt(const Array& a, const Array& b) {
  require_mm(a, b, 1, 1, "matmul_nt");
  Array c(a.rows, b.rows);
  matmul_acc_nt(c, a, b);
  return c;
}

void matmul_acc_nt(Array& c, const Array& a, const Array& b) {
  const int m = a.rows, k = a.cols, n = b.rows;
  if (!par_mm(size_t(m) * k * n)) {
    serial::matmul_acc_nt(c, a, b);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* ar = a.row(i);
    double* cr = c.row(i);
    for (int j = 0; j < n; ++j) {
      const double* br = b.row(j);
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ar[p] * br[p];
      cr[j] += s;
    }
  }
}

Array matmul_tn(const Array& a, const Array& b) {
  require_mm(a, b, 0, 0, "matmul_tn");
  Array c(a.cols, b.cols);
  matmul_acc_tn(c, a, b);
  return c;
}

void matmul_acc_tn(Array& c, const Array& a, const Array& b) {
  const int m = a.cols, k = a.rows, n = b.cols;
  if (!par_mm(size_t(m) * k * n)) {
    serial::matmul_acc_tn(c, a, b);
    return;
  }
  // Threads own disjoint row blocks of c; inside a block p ascends exactly as
  // in the serial outer-product order, so every element matches bit for bit.
#pragma omp parallel
  {
#ifdef _OPENMP
    const int nt = omp_get_num_threads(), tid = omp_get_thread_num();
#else
    const int nt = 1, tid = 0;
#endif
    const int chunk = (m + nt - 1) / nt;
    const int lo = std::min(m, tid * chunk), hi = std::min(m, lo + chunk);
    for (int p = 0; p < k; ++p) {
      const double* ar = a.row(p);
      const double* br = b.row(p);
      for (int i = lo; i < hi; ++i) {
        double* cr = c.row(i);
        const double ai = ar[i];
        for (int j = 0; j < n; ++j) cr[j] += ai * br[j];
      }
    }
  }
}

#define MARL_EW_BINARY(name, expr)                                    \
  Array name(const Array& a, const Array& b) {                        \
    require_same_shape(a, b, #name);                                  \
    Array c(a.rows, a.cols);                                          \
    const ptrdiff_t n = (ptrdiff_t)a.size();                          \
    if (!par_ew(a.size())) return serial::name(a, b);                 \
    _Pragma("omp parallel for schedule(static)")                      \
    for (ptrdiff_t i = 0; i < n; ++i) {                               \
      c.data[i] = expr;                                               \
    }                                                                 \
    return c;                                                         \
  }

MARL_EW_BINARY(add, a.data[i] + b.data[i])
MARL_EW_BINARY(sub, a.data[i] - b.data[i])
MARL_EW_BINARY(mul, a.data[i] * b.data[i])
MARL_EW_BINARY(min2, a.data[i] <= b.data[i] ? a.data[i] : b.data[i])
#undef MARL_EW_BINARY

Array add_scalar(const Array& a, double s) {
  if (!par_ew(a.size())) return serial::add_scalar(a, s);
  Array c(a.rows, a.cols);
  const ptrdiff_t n = (ptrdiff_t)a.size();
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < n; ++i) c.data[i] = a.data[i] + s;
  return c;
}

Array mul_scalar(const Array& a, double s) {
  if (!par_ew(a.size())) return serial::mul_scalar(a, s);
  Array c(a.rows, a.cols);
  const ptrdiff_t n = (ptrdiff_t)a.size();
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < n; ++i) c.data[i] = a.data[i] * s;
  return c;
}

#define MARL_EW_UNARY(name, expr)                                     \
  Array name(const Array& a) {                                        \
    if (!par_ew(a.size())) return serial::name(a);                    \
    Array c(a.rows, a.cols);                                          \
    const ptrdiff_t n = (ptrdiff_t)a.size();                          \
    _Pragma("omp parallel for schedule(static)")                      \
    for (ptrdiff_t i = 0; i < n; ++i) {                               \
      c.data[i] = expr;                                               \
    }                                                                 \
    return c;                                                         \
  }

MARL_EW_UNARY(tanh_fwd, std::tanh(a.data[i]))
MARL_EW_UNARY(exp_fwd, std::exp(a.data[i]))
MARL_EW_UNARY(log_fwd, std::log(a.data[i] > kLogFloor ? a.data[i] : kLogFloor))
MARL_EW_UNARY(square_fwd, a.data[i] * a.data[i])
#undef MARL_EW_UNARY

Array clip_fwd(const Array& a, double lo, double hi) {
  if (!par_ew(a.size())) return serial::clip_fwd(a, lo, hi);
  Array c(a.rows, a.cols);
  const ptrdiff_t n = (ptrdiff_t)a.size();
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < n; ++i) {
    double x = a.data[i];
    c.data[i] = x < lo ? lo : (x > hi ? hi : x);
  }
  return c;
}

Array softmax_rows(const Array& a) {
  if (!(g_parallel.load() && size_t(a.rows) * a.cols >= kEwGrain))
    return serial::softmax_rows(a);
  Array c(a.rows, a.cols);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < a.rows; ++r) {
    const double* x = a.row(r);
    double* y = c.row(r);
    double mx = x[0];
    for (int j = 1; j < a.cols; ++j) mx = x[j] > mx ? x[j] : mx;
    double z = 0.0;
    for (int j = 0; j < a.cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    double inv = 1.0 / z;
    for (int j = 0; j < a.cols; ++j) y[j] *= inv;
  }
  return c;
}

double sum_all(const Array& a) {
  if (!(g_parallel.load() && a.size() >= kEwGrain && a.rows > 1))
    return serial::sum_all(a);
  std::vector<double> partial(a.rows);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < a.rows; ++r) {
    const double* x = a.row(r);
    double p = 0.0;
    for (int j = 0; j < a.cols; ++j) p += x[j];
    partial[r] = p;
  }
  double total = 0.0;
  for (int r = 0; r < a.rows; ++r) total += partial[r];
  return total;
}

#define MARL_EW_ACC(name, args, call, stmt)                           \
  void name args {                                                    \
    const ptrdiff_t n = (ptrdiff_t)dst.size();                        \
    if (!par_ew(dst.size())) {                                        \
      serial::call;                                                   \
      return;                                                         \
    }                                                                 \
    _Pragma("omp parallel for schedule(static)")                      \
    for (ptrdiff_t i = 0; i < n; ++i) {                               \
      stmt;                                                           \
    }                                                                 \
  }

MARL_EW_ACC(acc, (Array& dst, const Array& g), acc(dst, g), dst.data[i] += g.data[i])
MARL_EW_ACC(acc_neg, (Array& dst, const Array& g), acc_neg(dst, g), dst.data[i] -= g.data[i])
MARL_EW_ACC(acc_scaled, (Array& dst, const Array& g, double c), acc_scaled(dst, g, c),
            dst.data[i] += c * g.data[i])
MARL_EW_ACC(acc_mul, (Array& dst, const Array& g, const Array& x), acc_mul(dst, g, x),
            dst.data[i] += g.data[i] * x.data[i])
#undef MARL_EW_ACC

#define MARL_BWD(name, args, call, stmt)                              \
  void name args {                                                    \
    const ptrdiff_t n = (ptrdiff_t)dx.size();                         \
    if (!par_ew(dx.size())) {                                         \
      serial::call;                                                   \
      return;                                                         \
    }                                                                 \
    _Pragma("omp parallel for schedule(static)")                      \
    for (ptrdiff_t i = 0; i < n; ++i) {                               \
      stmt;                                                           \
    }                                                                 \
  }

MARL_BWD(tanh_bwd, (Array& dx, const Array& g, const Array& y), tanh_bwd(dx, g, y),
         dx.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]))
MARL_BWD(exp_bwd, (Array& dx, const Array& g, const Array& y), exp_bwd(dx, g, y),
         dx.data[i] += g.data[i] * y.data[i])
MARL_BWD(log_bwd, (Array& dx, const Array& g, const Array& x), log_bwd(dx, g, x),
         dx.data[i] += x.data[i] > kLogFloor ? g.data[i] / x.data[i] : 0.0)
MARL_BWD(square_bwd, (Array& dx, const Array& g, const Array& x), square_bwd(dx, g, x),
         dx.data[i] += 2.0 * x.data[i] * g.data[i])
#undef MARL_BWD

void clip_bwd(Array& dx, const Array& g, const Array& x, double lo, double hi) {
  if (!par_ew(dx.size())) {
    serial::clip_bwd(dx, g, x, lo, hi);
    return;
  }
  const ptrdiff_t n = (ptrdiff_t)dx.size();
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < n; ++i)
    if (x.data[i] >= lo && x.data[i] <= hi) dx.data[i] += g.data[i];
}

void min2_bwd(Array& da, Array& db, const Array& g, const Array& a, const Array& b) {
  if (!par_ew(g.size())) {
    serial::min2_bwd(da, db, g, a, b);
    return;
  }
  const ptrdiff_t n = (ptrdiff_t)g.size();
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < n; ++i) {
    if (a.data[i] <= b.data[i])
      da.data[i] += g.data[i];
    else
      db.data[i] += g.data[i];
  }
}

void softmax_bwd(Array& dx, const Array& g, const Array& y) {
  if (!(g_parallel.load() && y.size() >= kEwGrain)) {
    serial::softmax_bwd(dx, g, y);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int r = 0; r < y.rows; ++r) {
    const double* gr = g.row(r);
    const double* yr = y.row(r);
    double* dr = dx.row(r);
    double dot = 0.0;
    for (int j = 0; j < y.cols; ++j) dot += gr[j] * yr[j];
    for (int j = 0; j < y.cols; ++j) dr[j] += yr[j] * (gr[j] - dot);
  }
}

double dot_all(const Array& g, const Array& x) {
  if (!(g_parallel.load() && g.size() >= kEwGrain && g.rows > 1))
    return serial::dot_all(g, x);
  std::vector<double> partial(g.rows);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < g.rows; ++r) {
    const double* gr = g.row(r);
    const double* xr = x.row(r);
    double p = 0.0;
    for (int j = 0; j < g.cols; ++j) p += gr[j] * xr[j];
    partial[r] = p;
  }
  double total = 0.0;
  for (int r = 0; r < g.rows; ++r) total += partial[r];
  return total;
}

Array slice_cols(const Array& a, int c0, int c1) {
  if (c0 < 0 || c1 > a.cols || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  Array c(a.rows, c1 - c0);
  for (int r = 0; r < a.rows; ++r) {
    const double* x = a.row(r) + c0;
    double* y = c.row(r);
    for (int j = 0; j < c.cols; ++j) y[j] = x[j];
  }
  return c;
}

Array slice_rows(const Array& a, int r0, int r1) {
  if (r0 < 0 || r1 > a.rows || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range");
  Array c(r1 - r0, a.cols);
  for (int r = 0; r < c.rows; ++r)
    for (int j = 0; j < c.cols; ++j) c.at(r, j) = a.at(r0 + r, j);
  return c;
}

Array concat_cols(const Array& a, const Array& b) {
  if (a.rows != b.rows) throw std::invalid_argument("concat_cols: row mismatch");
  Array c(a.rows, a.cols + b.cols);
  for (int r = 0; r < c.rows; ++r) {
    double* y = c.row(r);
    const double* xa = a.row(r);
    const double* xb = b.row(r);
    for (int j = 0; j < a.cols; ++j) y[j] = xa[j];
    for (int j = 0; j < b.cols; ++j) y[a.cols + j] = xb[j];
  }
  return c;
}

Array concat_rows(const Array& a, const Array& b) {
  if (a.cols != b.cols) throw std::invalid_argument("concat_rows: col mismatch");
  Array c(a.rows + b.rows, a.cols);
  for (int r = 0; r < a.rows; ++r)
    for (int j = 0; j < a.cols; ++j) c.at(r, j) = a.at(r, j);
  for (int r = 0; r < b.rows; ++r)
    for (int j = 0; j < a.cols; ++j) c.at(a.rows + r, j) = b.at(r, j);
  return c;
}

void scatter_add_cols(Array& dst, const Array& g, int c0) {
  for (int r = 0; r < g.rows; ++r) {
    double* y = dst.row(r) + c0;
    const double* x = g.row(r);
    for (int j = 0; j < g.cols; ++j) y[j] += x[j];
  }
}

void scatter_add_rows(Array& dst, const Array& g, int r0) {
  for (int r = 0; r < g.rows; ++r)
    for (int j = 0; j < g.cols; ++j) dst.at(r0 + r, j) += g.at(r, j);
}

bool all_finite(const Array& a) {
  for (double x : a.data)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace marl::kernels
