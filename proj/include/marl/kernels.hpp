#pragma once

#include "marl/array.hpp"

// Dense kernels behind the autodiff tape. Every kernel exists twice: the
// marl::kernels::serial namespace is the reference implementation, and the
// top-level marl::kernels functions run the same loops under OpenMP. The
// parallel variants split work only across independent output elements and
// keep every per-element reduction in serial order, so both produce
// bit-identical results; tests assert that and marl_bench compares timings.
namespace marl::kernels {

// Global switch for the OpenMP paths (thread count still comes from OpenMP).
void set_parallel(bool on);
bool parallel_enabled();
int thread_count();

namespace serial {

Array matmul(const Array& a, const Array& b);         // a(m,k) * b(k,n)
Array matmul_nt(const Array& a, const Array& b);      // a(m,k) * b(n,k)^T
Array matmul_tn(const Array& a, const Array& b);      // a(k,m)^T * b(k,n)
void matmul_acc(Array& c, const Array& a, const Array& b);
void matmul_acc_nt(Array& c, const Array& a, const Array& b);
void matmul_acc_tn(Array& c, const Array& a, const Array& b);

Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array min2(const Array& a, const Array& b);
Array add_scalar(const Array& a, double s);
Array mul_scalar(const Array& a, double s);

Array tanh_fwd(const Array& a);
Array exp_fwd(const Array& a);
Array log_fwd(const Array& a);  // ln(max(x, kLogFloor))
Array square_fwd(const Array& a);
Array clip_fwd(const Array& a, double lo, double hi);
Array softmax_rows(const Array& a);

double sum_all(const Array& a);   // row partials combined in row order

// Backward helpers; all accumulate into dst.
void acc(Array& dst, const Array& g);                         // dst += g
void acc_neg(Array& dst, const Array& g);                     // dst -= g
void acc_scaled(Array& dst, const Array& g, double c);        // dst += c*g
void acc_mul(Array& dst, const Array& g, const Array& x);     // dst += g.*x
void tanh_bwd(Array& dx, const Array& g, const Array& y);
void exp_bwd(Array& dx, const Array& g, const Array& y);
void log_bwd(Array& dx, const Array& g, const Array& x);
void square_bwd(Array& dx, const Array& g, const Array& x);
void clip_bwd(Array& dx, const Array& g, const Array& x, double lo, double hi);
void min2_bwd(Array& da, Array& db, const Array& g, const Array& a, const Array& b);
void softmax_bwd(Array& dx, const Array& g, const Array& y);
double dot_all(const Array& g, const Array& x);               // sum(g.*x), row order

}  // namespace serial

Array matmul(const Array& a, const Array& b);
Array matmul_nt(const Array& a, const Array& b);
Array matmul_tn(const Array& a, const Array& b);
void matmul_acc(Array& c, const Array& a, const Array& b);
void matmul_acc_nt(Array& c, const Array& a, const Array& b);
void matmul_acc_tn(Array& c, const Array& a, const Array& b);

Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array min2(const Array& a, const Array& b);
Array add_scalar(const Array& a, double s);
Array mul_scalar(const Array& a, double s);

Array tanh_fwd(const Array& a);
Array exp_fwd(const Array& a);
Array log_fwd(const Array& a);
Array square_fwd(const Array& a);
Array clip_fwd(const Array& a, double lo, double hi);
Array softmax_rows(const Array& a);

double sum_all(const Array& a);

void acc(Array& dst, const Array& g);
void acc_neg(Array& dst, const Array& g);
void acc_scaled(Array& dst, const Array& g, double c);
void acc_mul(Array& dst, const Array& g, const Array& x);
void tanh_bwd(Array& dx, const Array& g, const Array& y);
void exp_bwd(Array& dx, const Array& g, const Array& y);
void log_bwd(Array& dx, const Array& g, const Array& x);
void square_bwd(Array& dx, const Array& g, const Array& x);
void clip_bwd(Array& dx, const Array& g, const Array& x, double lo, double hi);
void min2_bwd(Array& da, Array& db, const Array& g, const Array& a, const Array& b);
void softmax_bwd(Array& dx, const Array& g, const Array& y);
double dot_all(const Array& g, const Array& x);

// Shape plumbing (copies; deterministic trivially, no parallel variant).
Array slice_cols(const Array& a, int c0, int c1);
Array slice_rows(const Array& a, int r0, int r1);
Array concat_cols(const Array& a, const Array& b);
Array concat_rows(const Array& a, const Array& b);
void scatter_add_cols(Array& dst, const Array& g, int c0);
void scatter_add_rows(Array& dst, const Array& g, int r0);

bool all_finite(const Array& a);

inline constexpr double kLogFloor = 1e-8;

}  // namespace marl::kernels
