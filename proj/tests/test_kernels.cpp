#include "draftlab/kernels.hpp"
#include "draftlab/rng.hpp"

#include <doctest.h>

#include <tuple>
#include <vector>

// The OpenMP kernel path must be bit-identical to the serial reference for
// any input: parallelism only splits independent output elements. Every
// kernel is exercised on a few random shapes and compared exactly.

using draft::Rng;
using draft::real;
namespace kernels = draft::kernels;

namespace {

std::vector<real> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<real> v(n);
    for (auto& x : v) x = static_cast<real>(scale * rng.normal());
    return v;
}

struct ParallelGuard {
    bool saved = kernels::parallel_enabled();
    ~ParallelGuard() { kernels::set_parallel(saved); }
};

}  // namespace

TEST_CASE("matmul family: parallel path matches reference bit for bit") {
    Rng rng(101);
    ParallelGuard guard;
    for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 5, 7}, {16, 32, 8},
                           {33, 17, 65}}) {
        auto a = random_vec(rng, static_cast<std::size_t>(m) * k);
        auto b = random_vec(rng, static_cast<std::size_t>(k) * n);
        auto bt = random_vec(rng, static_cast<std::size_t>(n) * k);
        auto at = random_vec(rng, static_cast<std::size_t>(k) * m);
        auto seed = random_vec(rng, static_cast<std::size_t>(m) * n);

        for (bool accumulate : {false, true}) {
            auto c_ref = seed, c_omp = seed;
            kernels::ref::matmul(a.data(), b.data(), c_ref.data(), m, k, n,
                                 accumulate);
            kernels::set_parallel(true);
            kernels::matmul(a.data(), b.data(), c_omp.data(), m, k, n,
                            accumulate);
            CHECK(c_ref == c_omp);

            c_ref = seed;
            c_omp = seed;
            kernels::ref::matmul_nt(a.data(), bt.data(), c_ref.data(), m, k,
                                    n, accumulate);
            kernels::matmul_nt(a.data(), bt.data(), c_omp.data(), m, k, n,
                               accumulate);
            CHECK(c_ref == c_omp);

            c_ref = seed;
            c_omp = seed;
            kernels::ref::matmul_tn(at.data(), b.data(), c_ref.data(), m, k,
                                    n, accumulate);
            kernels::matmul_tn(at.data(), b.data(), c_omp.data(), m, k, n,
                               accumulate);
            CHECK(c_ref == c_omp);
        }
    }
}

TEST_CASE("matmul computes the textbook product") {
    // [[1,2],[3,4]] x [[5],[6]] = [[17],[39]]
    std::vector<real> a = {1, 2, 3, 4};
    std::vector<real> b = {5, 6};
    std::vector<real> c(2);
    kernels::ref::matmul(a.data(), b.data(), c.data(), 2, 2, 1, false);
    CHECK(c[0] == real(17));
    CHECK(c[1] == real(39));
}

TEST_CASE("conv1d kernels: parallel path matches reference") {
    Rng rng(202);
    ParallelGuard guard;
    for (auto [t, cin, cout, k, stride] :
         {std::tuple{8, 3, 5, 3, 2}, {16, 80, 32, 3, 2}, {5, 2, 2, 1, 1},
          {11, 4, 6, 5, 3}}) {
        auto x = random_vec(rng, static_cast<std::size_t>(t) * cin);
        auto w = random_vec(rng, static_cast<std::size_t>(k) * cin * cout);
        int t_out = (t - k) / stride + 1;
        auto dy = random_vec(rng, static_cast<std::size_t>(t_out) * cout);

        std::vector<real> y_ref(static_cast<std::size_t>(t_out) * cout);
        auto y_omp = y_ref;
        kernels::ref::conv1d_forward(x.data(), w.data(), y_ref.data(), t, cin,
                                     cout, k, stride);
        kernels::set_parallel(true);
        kernels::conv1d_forward(x.data(), w.data(), y_omp.data(), t, cin,
                                cout, k, stride);
        CHECK(y_ref == y_omp);

        auto dx_ref = random_vec(rng, x.size(), 0.1);
        auto dx_omp = dx_ref;
        kernels::ref::conv1d_backward_input(dy.data(), w.data(),
                                            dx_ref.data(), t, cin, cout, k,
                                            stride);
        kernels::conv1d_backward_input(dy.data(), w.data(), dx_omp.data(), t,
                                       cin, cout, k, stride);
        CHECK(dx_ref == dx_omp);

        auto dw_ref = random_vec(rng, w.size(), 0.1);
        auto dw_omp = dw_ref;
        kernels::ref::conv1d_backward_weight(x.data(), dy.data(),
                                             dw_ref.data(), t, cin, cout, k,
                                             stride);
        kernels::conv1d_backward_weight(x.data(), dy.data(), dw_omp.data(), t,
                                        cin, cout, k, stride);
        CHECK(dw_ref == dw_omp);
    }
}

TEST_CASE("layer norm and masked softmax kernels match reference") {
    Rng rng(303);
    ParallelGuard guard;
    for (auto [rows, cols] : {std::pair{1, 4}, {7, 16}, {32, 64}}) {
        std::size_t n = static_cast<std::size_t>(rows) * cols;
        auto x = random_vec(rng, n);
        auto dy = random_vec(rng, n);

        std::vector<real> y_ref(n), mean_ref(rows), rstd_ref(rows);
        auto y_omp = y_ref;
        auto mean_omp = mean_ref;
        auto rstd_omp = rstd_ref;
        kernels::ref::layer_norm_rows(x.data(), y_ref.data(), mean_ref.data(),
                                      rstd_ref.data(), rows, cols,
                                      real(1e-5));
        kernels::set_parallel(true);
        kernels::layer_norm_rows(x.data(), y_omp.data(), mean_omp.data(),
                                 rstd_omp.data(), rows, cols, real(1e-5));
        CHECK(y_ref == y_omp);
        CHECK(mean_ref == mean_omp);
        CHECK(rstd_ref == rstd_omp);

        auto dx_ref = random_vec(rng, n, 0.1);
        auto dx_omp = dx_ref;
        kernels::ref::layer_norm_backward_rows(x.data(), dy.data(),
                                               mean_ref.data(),
                                               rstd_ref.data(), dx_ref.data(),
                                               rows, cols);
        kernels::layer_norm_backward_rows(x.data(), dy.data(),
                                          mean_omp.data(), rstd_omp.data(),
                                          dx_omp.data(), rows, cols);
        CHECK(dx_ref == dx_omp);

        std::vector<unsigned char> mask(n);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j)
                mask[static_cast<std::size_t>(i) * cols + j] =
                    rng.uniform() < 0.7 ? 1 : 0;
            mask[static_cast<std::size_t>(i) * cols +
                 rng.uniform_index(cols)] = 1;  // keep the row non-empty
        }
        std::vector<real> p_ref(n), p_omp(n);
        kernels::ref::masked_softmax_rows(x.data(), mask.data(), p_ref.data(),
                                          rows, cols);
        kernels::masked_softmax_rows(x.data(), mask.data(), p_omp.data(),
                                     rows, cols);
        CHECK(p_ref == p_omp);

        auto ds_seed = random_vec(rng, n, 0.1);
        auto ds_ref = ds_seed;
        auto ds_omp = ds_seed;
        kernels::ref::masked_softmax_backward_rows(
            p_ref.data(), mask.data(), dy.data(), ds_ref.data(), rows, cols);
        kernels::masked_softmax_backward_rows(p_omp.data(), mask.data(),
                                              dy.data(), ds_omp.data(), rows,
                                              cols);
        CHECK(ds_ref == ds_omp);

        // Masked positions are exactly zero in the output and receive
        // exactly zero gradient (their accumulator slot is untouched).
        for (std::size_t i = 0; i < n; ++i) {
            if (mask[i]) continue;
            CHECK(p_ref[i] == real(0));
            CHECK(ds_ref[i] == ds_seed[i]);
        }

        // Rows sum to 1 over allowed positions.
        for (int i = 0; i < rows; ++i) {
            real s = 0;
            for (int j = 0; j < cols; ++j)
                s += p_ref[static_cast<std::size_t>(i) * cols + j];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
        }
    }
}

TEST_CASE("adam kernel matches reference and leaves zero-grad params alone") {
    Rng rng(404);
    ParallelGuard guard;
    std::size_t n = 1000;
    auto x = random_vec(rng, n);
    auto g = random_vec(rng, n);
    std::vector<real> m(n, 0), v(n, 0);

    auto x_ref = x;
    auto m_ref = m, v_ref = v;
    auto x_omp = x;
    auto m_omp = m, v_omp = v;
    for (std::int64_t t = 1; t <= 5; ++t) {
        kernels::ref::adam_update(x_ref.data(), g.data(), m_ref.data(),
                                  v_ref.data(), n, t, 1e-3, 0.9, 0.98, 1e-9);
        kernels::set_parallel(true);
        kernels::adam_update(x_omp.data(), g.data(), m_omp.data(),
                             v_omp.data(), n, t, 1e-3, 0.9, 0.98, 1e-9);
    }
    CHECK(x_ref == x_omp);
    CHECK(m_ref == m_omp);
    CHECK(v_ref == v_omp);
    CHECK(x_ref != x);  // the update actually moved something

    // All-zero gradient from a fresh state: x - lr * 0/(0+eps) == x exactly.
    std::vector<real> zero(n, 0);
    auto x2 = x;
    std::vector<real> m2(n, 0), v2(n, 0);
    kernels::ref::adam_update(x2.data(), zero.data(), m2.data(), v2.data(), n,
                              1, 1e-3, 0.9, 0.98, 1e-9);
    CHECK(x2 == x);
}

TEST_CASE("first adam step moves by about -lr in the gradient direction") {
    // With eps much smaller than |g|, the bias-corrected first step is
    // -lr * g/|g| regardless of the gradient magnitude.
    std::vector<real> x = {real(2.0)};
    std::vector<real> g = {real(0.37)};
    std::vector<real> m = {0}, v = {0};
    kernels::ref::adam_update(x.data(), g.data(), m.data(), v.data(), 1, 1,
                              1e-3, 0.9, 0.98, 1e-9);
    CHECK(static_cast<double>(x[0]) ==
          doctest::Approx(2.0 - 1e-3).epsilon(1e-5));
}
