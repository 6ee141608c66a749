#pragma once

#include "draftlab/common.hpp"

#include <cstdint>

// Dense inner loops of the library. Each kernel exists twice: a plain serial
// implementation under kernels::ref, and a dispatching version that runs the
// same arithmetic with OpenMP when enabled. Parallel versions split work only
// across independent output elements and keep the per-element summation order
// identical to the reference, so both paths produce bit-identical results for
// any thread count. tests/test_kernels.cpp asserts that equivalence and
// bench/bench_kernels.cpp measures the speedup.

namespace draft::kernels {

// Runtime toggle for the OpenMP path (defaults to on when compiled with
// OpenMP). The serial reference is always reachable through kernels::ref.
void set_parallel(bool enabled);
bool parallel_enabled();
int thread_count();

namespace ref {

// c[m,n] = a[m,k] * b[k,n], adding into c when accumulate is set.
void matmul(const real* a, const real* b, real* c, int m, int k, int n,
            bool accumulate);

// c[m,n] = a[m,k] * b[n,k]^T
void matmul_nt(const real* a, const real* b, real* c, int m, int k, int n,
               bool accumulate);

// c[m,n] = a[k,m]^T * b[k,n]
void matmul_tn(const real* a, const real* b, real* c, int m, int k, int n,
               bool accumulate);

// Valid 1-d convolution over rows. x is [t_in, c_in], w is [k*c_in, c_out]
// with the tap index k varying slowest, y is [t_out, c_out] where
// t_out = (t_in - k) / stride + 1 (caller guarantees t_in >= k).
void conv1d_forward(const real* x, const real* w, real* y, int t_in, int c_in,
                    int c_out, int k, int stride);

// dx[t_in, c_in] += conv backward through x; each input row is owned by one
// iteration so this parallelizes without scatter races.
void conv1d_backward_input(const real* dy, const real* w, real* dx, int t_in,
                           int c_in, int c_out, int k, int stride);

// dw[k*c_in, c_out] += conv backward through w.
void conv1d_backward_weight(const real* x, const real* dy, real* dw, int t_in,
                            int c_in, int c_out, int k, int stride);

// Row-wise layer norm without affine terms: y = (x - mean) * rstd, saving
// mean and rstd per row for the backward pass. Variance is the biased
// (divide by n) estimate with epsilon added before the square root.
void layer_norm_rows(const real* x, real* y, real* mean, real* rstd, int rows,
                     int cols, real epsilon);

// dx for the normalization above, given the saved mean/rstd.
void layer_norm_backward_rows(const real* x, const real* dy, const real* mean,
                              const real* rstd, real* dx, int rows, int cols);

// Row-wise softmax with an element mask (1 = keep, 0 = excluded). Excluded
// positions come out exactly 0. The caller guarantees every row keeps at
// least one element.
void masked_softmax_rows(const real* x, const unsigned char* mask, real* y,
                         int rows, int cols);

// dx for the masked softmax, given its output y. Excluded positions get an
// exact 0 gradient.
void masked_softmax_backward_rows(const real* y, const unsigned char* mask,
                                  const real* dy, real* dx, int rows,
                                  int cols);

// One bias-corrected Adam step over a flat parameter. Internal arithmetic is
// double regardless of the element type; m and v are updated in place.
void adam_update(real* x, const real* g, real* m, real* v, std::int64_t n,
                 std::int64_t t, double lr, double beta1, double beta2,
                 double epsilon);

}  // namespace ref

void matmul(const real* a, const real* b, real* c, int m, int k, int n,
            bool accumulate);
void matmul_nt(const real* a, const real* b, real* c, int m, int k, int n,
               bool accumulate);
void matmul_tn(const real* a, const real* b, real* c, int m, int k, int n,
               bool accumulate);
void conv1d_forward(const real* x, const real* w, real* y, int t_in, int c_in,
                    int c_out, int k, int stride);
void conv1d_backward_input(const real* dy, const real* w, real* dx, int t_in,
                           int c_in, int c_out, int k, int stride);
void conv1d_backward_weight(const real* x, const real* dy, real* dw, int t_in,
                            int c_in, int c_out, int k, int stride);
void layer_norm_rows(const real* x, real* y, real* mean, real* rstd, int rows,
                     int cols, real epsilon);
void layer_norm_backward_rows(const real* x, const real* dy, const real* mean,
                              const real* rstd, real* dx, int rows, int cols);
void masked_softmax_rows(const real* x, const unsigned char* mask, real* y,
                         int rows, int cols);
void masked_softmax_backward_rows(const real* y, const unsigned char* mask,
                                  const real* dy, real* dx, int rows,
                                  int cols);
void adam_update(real* x, const real* g, real* m, real* v, std::int64_t n,
                 std::int64_t t, double lr, double beta1, double beta2,
                 double epsilon);

}  // namespace draft::kernels
