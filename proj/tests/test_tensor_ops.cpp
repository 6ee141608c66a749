#include "draftlab/ops.hpp"

#include "op_gradcheck_cases.hpp"

#include <doctest.h>

#include <cmath>

using draft::backward;
using draft::Error;
using draft::ErrorCode;
using draft::make_tensor;
using draft::Rng;
using draft::TensorPtr;
using draft::real;
namespace ops = draft::ops;

TEST_CASE("matmul closed forms") {
    auto a = make_tensor({2, 2}, {1, 2, 3, 4});
    auto eye = make_tensor({2, 2}, {1, 0, 0, 1});
    auto ai = ops::matmul(a, eye);
    CHECK(ai->data == a->data);

    auto b = make_tensor({2, 1}, {5, 6});
    auto ab = ops::matmul(a, b);
    CHECK(ab->data == std::vector<real>{17, 39});

    auto zero = make_tensor({2, 2});
    CHECK(ops::matmul(zero, a)->data == std::vector<real>{0, 0, 0, 0});

    CHECK_THROWS_AS(ops::matmul(a, make_tensor({3, 2})), Error);
}

TEST_CASE("layer_norm closed forms") {
    auto gain1 = make_tensor({2}, {1, 1});
    auto bias0 = make_tensor({2}, {0, 0});

    // Constant row: zero variance maps to 0 through epsilon.
    auto c = make_tensor({1, 2}, {3, 3});
    auto yc = ops::layer_norm(c, gain1, bias0);
    CHECK(yc->data[0] == real(0));
    CHECK(yc->data[1] == real(0));

    // x = [1,-1] has mean 0, variance 1: output approaches [1,-1] as eps->0.
    auto x = make_tensor({1, 2}, {1, -1});
    auto y = ops::layer_norm(x, gain1, bias0, real(1e-12));
    CHECK(static_cast<double>(y->data[0]) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(static_cast<double>(y->data[1]) == doctest::Approx(-1.0).epsilon(1e-4));

}

TEST_CASE("layer_norm gain zero gives bias rows") {
    auto x = make_tensor({2, 2}, {1, -1, 4, 9});
    auto gain0 = make_tensor({2}, {0, 0});
    auto bias = make_tensor({2}, {real(0.5), real(-2)});
    auto y = ops::layer_norm(x, gain0, bias);
    CHECK(y->data == std::vector<real>{real(0.5), real(-2), real(0.5),
                                       real(-2)});
}

TEST_CASE("masked_softmax closed forms") {
    // Uniform scores, all allowed: every entry 1/4.
    auto u = make_tensor({1, 4}, {real(0.3), real(0.3), real(0.3), real(0.3)});
    auto pu = ops::masked_softmax(u, {1, 1, 1, 1});
    for (real v : pu->data)
        CHECK(static_cast<double>(v) == doctest::Approx(0.25).epsilon(1e-6));

    // Single allowed entry takes all the mass, exactly.
    auto s = make_tensor({1, 3}, {5, 2, 7});
    auto ps = ops::masked_softmax(s, {1, 0, 0});
    CHECK(ps->data[0] == real(1));
    CHECK(ps->data[1] == real(0));
    CHECK(ps->data[2] == real(0));

    // Scores [0, ln 3] -> [0.25, 0.75].
    auto t = make_tensor({1, 2}, {0, static_cast<real>(std::log(3.0))});
    auto pt = ops::masked_softmax(t, {1, 1});
    CHECK(static_cast<double>(pt->data[0]) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(static_cast<double>(pt->data[1]) == doctest::Approx(0.75).epsilon(1e-6));

    CHECK_THROWS_AS(ops::masked_softmax(t, {0, 0}), Error);
}

TEST_CASE("conv1d length formula and identity map") {
    Rng rng(7);
    // K=1, stride=1, identity channel map: output equals input.
    auto x = draft::randn(rng, {6, 3}, 1.0);
    auto eye = make_tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(ops::conv1d(x, eye, 1)->data == x->data);

    // T=8, K=3, stride=2 -> T' = 3.
    auto x8 = draft::randn(rng, {8, 2}, 1.0);
    auto w = draft::randn(rng, {6, 4}, 1.0);
    CHECK(ops::conv1d(x8, w, 2)->rows() == 3);

    // Too-short input raises the sequence error.
    auto x2 = draft::randn(rng, {2, 2}, 1.0);
    CHECK_THROWS_AS(ops::conv1d(x2, w, 2), Error);
}

TEST_CASE("backward semantics: accumulation, pruning, scalar-only roots") {
    Rng rng(11);
    auto p = draft::randn(rng, {3}, 1.0, /*requires_grad=*/true);

    // loss = sum(p): gradient all ones; accumulates on a second call.
    auto loss = ops::sum(p);
    backward(loss);
    CHECK(p->grad == std::vector<real>{1, 1, 1});
    backward(loss);
    CHECK(p->grad == std::vector<real>{2, 2, 2});

    // loss = sum(p * p) at p = [3]: gradient 2p = 6.
    auto q = make_tensor({1}, {3}, /*requires_grad=*/true);
    backward(ops::sum(ops::mul(q, q)));
    CHECK(q->grad == std::vector<real>{6});

    // Constants never receive gradients and build no graph.
    auto c = make_tensor({3}, {1, 2, 3});
    auto pruned = ops::mul(c, c);
    CHECK(pruned->parents.empty());
    CHECK_FALSE(pruned->requires_grad);

    // Non-scalar backward is a state error.
    auto wide = make_tensor({2}, {1, 2}, /*requires_grad=*/true);
    CHECK_THROWS_AS(backward(ops::mul(wide, wide)), Error);
}

TEST_CASE("replace_rows blocks gradient through replaced rows exactly") {
    Rng rng(13);
    auto x = draft::randn(rng, {4, 3}, 1.0, true);
    auto r = draft::randn(rng, {1, 3}, 1.0, true);
    auto out = ops::replace_rows(x, r, {1, 2});
    backward(ops::sum(out));
    // Untouched rows get 1s; replaced rows get exact zeros.
    CHECK(x->grad == std::vector<real>{1, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 1});
    CHECK(r->grad == std::vector<real>{2, 2, 2});
}

TEST_CASE("every registered op passes single-precision gradient checks") {
    bool coverage = false;
    auto results = gradcases::run_all_op_gradchecks(1e-3, &coverage);
    CHECK(coverage);
    for (const auto& r : results) {
        INFO(r.op, " / ", r.param, " rel err ", r.max_rel_error);
        CHECK(r.pass);
    }
}
