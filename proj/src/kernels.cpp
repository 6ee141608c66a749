#include "draftlab/kernels.hpp"

#include <cmath>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace draft::kernels {

namespace {

#ifdef _OPENMP
bool g_parallel = true;
#else
bool g_parallel = false;
#endif

// Per-output-element bodies shared by the reference and OpenMP paths. Every
// body owns a disjoint slice of the output and runs its reductions in a fixed
// serial order, which is what makes the two paths bit-identical.

inline void matmul_row(const real* a, const real* b, real* c, int k, int n,
                       bool accumulate, int i) {
    const real* ai = a + static_cast<std::size_t>(i) * k;
    real* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        real acc = accumulate ? ci[j] : real(0);
        for (int p = 0; p < k; ++p)
            acc += ai[p] * b[static_cast<std::size_t>(p) * n + j];
        ci[j] = acc;
    }
}

inline void matmul_nt_row(const real* a, const real* b, real* c, int k, int n,
                          bool accumulate, int i) {
    const real* ai = a + static_cast<std::size_t>(i) * k;
    real* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        const real* bj = b + static_cast<std::size_t>(j) * k;
        real acc = accumulate ? ci[j] : real(0);
        for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] = acc;
    }
}

inline void matmul_tn_row(const real* a, const real* b, real* c, int m, int k,
                          int n, int i) {
    // c[i,j] = sum_p a[p,i] * b[p,j]; caller zeroes c first when the call is
    // not accumulating.
    real* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        real acc = ci[j];
        for (int p = 0; p < k; ++p)
            acc += a[static_cast<std::size_t>(p) * m + i] *
                   b[static_cast<std::size_t>(p) * n + j];
        ci[j] = acc;
    }
}

inline void conv1d_row(const real* x, const real* w, real* y, int c_in,
                       int c_out, int k, int stride, int t) {
    const real* xt = x + static_cast<std::size_t>(t) * stride * c_in;
    real* yt = y + static_cast<std::size_t>(t) * c_out;
    for (int co = 0; co < c_out; ++co) {
        real acc = 0;
        for (int tap = 0; tap < k; ++tap)
            for (int ci = 0; ci < c_in; ++ci)
                acc += xt[static_cast<std::size_t>(tap) * c_in + ci] *
                       w[(static_cast<std::size_t>(tap) * c_in + ci) * c_out +
                         co];
        yt[co] = acc;
    }
}

inline void conv1d_dx_row(const real* dy, const real* w, real* dx, int t_out,
                          int c_in, int c_out, int k, int stride, int s) {
    real* dxs = dx + static_cast<std::size_t>(s) * c_in;
    for (int ci = 0; ci < c_in; ++ci) {
        real acc = dxs[ci];
        for (int tap = 0; tap < k; ++tap) {
            int offset = s - tap;
            if (offset < 0 || offset % stride != 0) continue;
            int t = offset / stride;
            if (t >= t_out) continue;
            const real* dyt = dy + static_cast<std::size_t>(t) * c_out;
            const real* wrow =
                w + (static_cast<std::size_t>(tap) * c_in + ci) * c_out;
            for (int co = 0; co < c_out; ++co) acc += dyt[co] * wrow[co];
        }
        dxs[ci] = acc;
    }
}

inline void conv1d_dw_row(const real* x, const real* dy, real* dw, int t_out,
                          int c_in, int c_out, int stride, int r) {
    int tap = r / c_in;
    int ci = r % c_in;
    real* dwr = dw + static_cast<std::size_t>(r) * c_out;
    for (int co = 0; co < c_out; ++co) {
        real acc = dwr[co];
        for (int t = 0; t < t_out; ++t)
            acc += x[(static_cast<std::size_t>(t) * stride + tap) * c_in +
                     ci] *
                   dy[static_cast<std::size_t>(t) * c_out + co];
        dwr[co] = acc;
    }
}

inline void layer_norm_row(const real* x, real* y, real* mean, real* rstd,
                           int cols, real epsilon, int i) {
    const real* xi = x + static_cast<std::size_t>(i) * cols;
    real* yi = y + static_cast<std::size_t>(i) * cols;
    real mu = 0;
    for (int j = 0; j < cols; ++j) mu += xi[j];
    mu /= static_cast<real>(cols);
    real var = 0;
    for (int j = 0; j < cols; ++j) {
        real d = xi[j] - mu;
        var += d * d;
    }
    var /= static_cast<real>(cols);
    real r = real(1) / std::sqrt(var + epsilon);
    for (int j = 0; j < cols; ++j) yi[j] = (xi[j] - mu) * r;
    mean[i] = mu;
    rstd[i] = r;
}

inline void layer_norm_backward_row(const real* x, const real* dy,
                                    const real* mean, const real* rstd,
                                    real* dx, int cols, int i) {
    const real* xi = x + static_cast<std::size_t>(i) * cols;
    const real* dyi = dy + static_cast<std::size_t>(i) * cols;
    real* dxi = dx + static_cast<std::size_t>(i) * cols;
    real mu = mean[i];
    real r = rstd[i];
    real sum_dy = 0;
    real sum_dy_xhat = 0;
    for (int j = 0; j < cols; ++j) {
        real xhat = (xi[j] - mu) * r;
        sum_dy += dyi[j];
        sum_dy_xhat += dyi[j] * xhat;
    }
    real inv_n = real(1) / static_cast<real>(cols);
    for (int j = 0; j < cols; ++j) {
        real xhat = (xi[j] - mu) * r;
        dxi[j] += r * (dyi[j] - sum_dy * inv_n - xhat * sum_dy_xhat * inv_n);
    }
}

inline void masked_softmax_row(const real* x, const unsigned char* mask,
                               real* y, int cols, int i) {
    const real* xi = x + static_cast<std::size_t>(i) * cols;
    const unsigned char* mi = mask + static_cast<std::size_t>(i) * cols;
    real* yi = y + static_cast<std::size_t>(i) * cols;
    real mx = 0;
    bool any = false;
    for (int j = 0; j < cols; ++j) {
        if (!mi[j]) continue;
        if (!any || xi[j] > mx) mx = xi[j];
        any = true;
    }
    real sum = 0;
    for (int j = 0; j < cols; ++j) {
        real e = mi[j] ? std::exp(xi[j] - mx) : real(0);
        yi[j] = e;
        sum += e;
    }
    real inv = any ? real(1) / sum : real(0);
    for (int j = 0; j < cols; ++j) yi[j] *= inv;
}

inline void masked_softmax_backward_row(const real* y,
                                        const unsigned char* mask,
                                        const real* dy, real* dx, int cols,
                                        int i) {
    const real* yi = y + static_cast<std::size_t>(i) * cols;
    const unsigned char* mi = mask + static_cast<std::size_t>(i) * cols;
    const real* dyi = dy + static_cast<std::size_t>(i) * cols;
    real* dxi = dx + static_cast<std::size_t>(i) * cols;
    real s = 0;
    for (int j = 0; j < cols; ++j)
        if (mi[j]) s += dyi[j] * yi[j];
    for (int j = 0; j < cols; ++j) {
        // Excluded positions contribute an exact zero, not a rounded one;
        // the causality checks compare against 0.0 bitwise.
        if (mi[j]) dxi[j] += yi[j] * (dyi[j] - s);
    }
}

inline void adam_element(real* x, const real* g, real* m, real* v,
                         double bias1, double bias2, double lr, double beta1,
                         double beta2, double epsilon, std::int64_t i) {
    double gi = static_cast<double>(g[i]);
    double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
    double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
    m[i] = static_cast<real>(mi);
    v[i] = static_cast<real>(vi);
    double mhat = mi / bias1;
    double vhat = vi / bias2;
    x[i] = static_cast<real>(static_cast<double>(x[i]) -
                             lr * mhat / (std::sqrt(vhat) + epsilon));
}

}  // namespace

void set_parallel(bool enabled) { g_parallel = enabled; }

bool parallel_enabled() {
#ifdef _OPENMP
    return g_parallel;
#else
    return false;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return parallel_enabled() ? omp_get_max_threads() : 1;
#else
    return 1;
#endif
}

namespace ref {

void matmul(const real* a, const real* b, real* c, int m, int k, int n,
            bool accumulate) {
    for (int i = 0; i < m; ++i) matmul_row(a, b, c, k, n, accumulate, i);
}

void matmul_nt(const real* a, const real* b, real* c, int m, int k, int n,
               bool accumulate) {
    for (int i = 0; i < m; ++i) matmul_nt_row(a, b, c, k, n, accumulate, i);
}

void matmul_tn(const real* a, const real* b, real* c, int m, int k, int n,
               bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < static_cast<std::size_t>(m) * n; ++i)
            c[i] = 0;
    for (int i = 0; i < m; ++i) matmul_tn_row(a, b, c, m, k, n, i);
}

void conv1d_forward(const real* x, const real* w, real* y, int t_in, int c_in,
                    int c_out, int k, int stride) {
    int t_out = (t_in - k) / stride + 1;
    for (int t = 0; t < t_out; ++t)
        conv1d_row(x, w, y, c_in, c_out, k, stride, t);
}

void conv1d_backward_input(const real* dy, const real* w, real* dx, int t_in,
                           int c_in, int c_out, int k, int stride) {
    int t_out = (t_in - k) / stride + 1;
    for (int s = 0; s < t_in; ++s)
        conv1d_dx_row(dy, w, dx, t_out, c_in, c_out, k, stride, s);
}

void conv1d_backward_weight(const real* x, const real* dy, real* dw, int t_in,
                            int c_in, int c_out, int k, int stride) {
    int t_out = (t_in - k) / stride + 1;
    for (int r = 0; r < k * c_in; ++r)
        conv1d_dw_row(x, dy, dw, t_out, c_in, c_out, stride, r);
}

void layer_norm_rows(const real* x, real* y, real* mean, real* rstd, int rows,
                     int cols, real epsilon) {
    for (int i = 0; i < rows; ++i)
        layer_norm_row(x, y, mean, rstd, cols, epsilon, i);
}

void layer_norm_backward_rows(const real* x, const real* dy, const real* mean,
                              const real* rstd, real* dx, int rows, int cols) {
    for (int i = 0; i < rows; ++i)
        layer_norm_backward_row(x, dy, mean, rstd, dx, cols, i);
}

void masked_softmax_rows(const real* x, const unsigned char* mask, real* y,
                         int rows, int cols) {
    for (int i = 0; i < rows; ++i) masked_softmax_row(x, mask, y, cols, i);
}

void masked_softmax_backward_rows(const real* y, const unsigned char* mask,
                                  const real* dy, real* dx, int rows,
                                  int cols) {
    for (int i = 0; i < rows; ++i)
        masked_softmax_backward_row(y, mask, dy, dx, cols, i);
}

void adam_update(real* x, const real* g, real* m, real* v, std::int64_t n,
                 std::int64_t t, double lr, double beta1, double beta2,
                 double epsilon) {
    double bias1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bias2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::int64_t i = 0; i < n; ++i)
        adam_element(x, g, m, v, bias1, bias2, lr, beta1, beta2, epsilon, i);
}

}  // namespace ref

void matmul(const real* a, const real* b, real* c, int m, int k, int n,
            bool accumulate) {
    if (!parallel_enabled()) return ref::matmul(a, b, c, m, k, n, accumulate);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_row(a, b, c, k, n, accumulate, i);
}

void matmul_nt(const real* a, const real* b, real* c, int m, int k, int n,
               bool accumulate) {
    if (!parallel_enabled())
        return ref::matmul_nt(a, b, c, m, k, n, accumulate);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_nt_row(a, b, c, k, n, accumulate, i);
}

void matmul_tn(const real* a, const real* b, real* c, int m, int k, int n,
               bool accumulate) {
    if (!parallel_enabled())
        return ref::matmul_tn(a, b, c, m, k, n, accumulate);
    if (!accumulate) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(m) * n; ++i)
            c[i] = 0;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_tn_row(a, b, c, m, k, n, i);
}

void conv1d_forward(const real* x, const real* w, real* y, int t_in, int c_in,
                    int c_out, int k, int stride) {
    if (!parallel_enabled())
        return ref::conv1d_forward(x, w, y, t_in, c_in, c_out, k, stride);
    int t_out = (t_in - k) / stride + 1;
#pragma omp parallel for schedule(static)
    for (int t = 0; t < t_out; ++t)
        conv1d_row(x, w, y, c_in, c_out, k, stride, t);
}

void conv1d_backward_input(const real* dy, const real* w, real* dx, int t_in,
                           int c_in, int c_out, int k, int stride) {
    if (!parallel_enabled())
        return ref::conv1d_backward_input(dy, w, dx, t_in, c_in, c_out, k,
                                          stride);
    int t_out = (t_in - k) / stride + 1;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < t_in; ++s)
        conv1d_dx_row(dy, w, dx, t_out, c_in, c_out, k, stride, s);
}

void conv1d_backward_weight(const real* x, const real* dy, real* dw, int t_in,
                            int c_in, int c_out, int k, int stride) {
    if (!parallel_enabled())
        return ref::conv1d_backward_weight(x, dy, dw, t_in, c_in, c_out, k,
                                           stride);
    int t_out = (t_in - k) / stride + 1;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < k * c_in; ++r)
        conv1d_dw_row(x, dy, dw, t_out, c_in, c_out, stride, r);
}

void layer_norm_rows(const real* x, real* y, real* mean, real* rstd, int rows,
                     int cols, real epsilon) {
    if (!parallel_enabled())
        return ref::layer_norm_rows(x, y, mean, rstd, rows, cols, epsilon);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i)
        layer_norm_row(x, y, mean, rstd, cols, epsilon, i);
}

void layer_norm_backward_rows(const real* x, const real* dy, const real* mean,
                              const real* rstd, real* dx, int rows, int cols) {
    if (!parallel_enabled())
        return ref::layer_norm_backward_rows(x, dy, mean, rstd, dx, rows,
                                             cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i)
        layer_norm_backward_row(x, dy, mean, rstd, dx, cols, i);
}

void masked_softmax_rows(const real* x, const unsigned char* mask, real* y,
                         int rows, int cols) {
    if (!parallel_enabled())
        return ref::masked_softmax_rows(x, mask, y, rows, cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i) masked_softmax_row(x, mask, y, cols, i);
}

void masked_softmax_backward_rows(const real* y, const unsigned char* mask,
                                  const real* dy, real* dx, int rows,
                                  int cols) {
    if (!parallel_enabled())
        return ref::masked_softmax_backward_rows(y, mask, dy, dx, rows, cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i)
        masked_softmax_backward_row(y, mask, dy, dx, cols, i);
}

void adam_update(real* x, const real* g, real* m, real* v, std::int64_t n,
                 std::int64_t t, double lr, double beta1, double beta2,
                 double epsilon) {
    if (!parallel_enabled())
        return ref::adam_update(x, g, m, v, n, t, lr, beta1, beta2, epsilon);
    double bias1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bias2 = 1.0 - std::pow(beta2, static_cast<double>(t));
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        adam_element(x, g, m, v, bias1, bias2, lr, beta1, beta2, epsilon, i);
}

}  // namespace draft::kernels
