#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "test_helpers.hpp"

using namespace pdedpc;
using namespace pdedpc::ad;
using pdedpc::testing::central_difference_gradient;
using pdedpc::testing::max_rel_err;

namespace {

std::vector<double> grad_of(const Tensor& t) {
    const auto g = t.grad();
    return {g.begin(), g.end()};
}

}  // namespace

TEST_CASE("matmul forward examples") {
    Tape tape;
    const Tensor eye = tape.leaf(Shape{2, 2}, std::vector<double>{1, 0, 0, 1}, false);
    const Tensor a = tape.leaf(Shape{2, 2}, std::vector<double>{1, 2, 3, 4}, false);
    const Tensor prod = matmul(eye, a);
    CHECK(std::vector<double>(prod.values().begin(), prod.values().end()) ==
          std::vector<double>{1, 2, 3, 4});

    const Tensor row = tape.leaf(Shape{1, 2}, std::vector<double>{1, 2}, false);
    const Tensor col = tape.leaf(Shape{2, 1}, std::vector<double>{3, 4}, false);
    const Tensor dot = matmul(row, col);
    CHECK(dot.values()[0] == doctest::Approx(11.0).epsilon(0));
}

TEST_CASE("matmul shape errors name both shapes") {
    Tape tape;
    const Tensor a = tape.leaf(Shape{2, 3}, std::vector<double>(6, 1.0), false);
    const Tensor b = tape.leaf(Shape{2, 2}, std::vector<double>(4, 1.0), false);
    CHECK_THROWS_WITH_AS(matmul(a, b),
                         "matmul: inner dimensions disagree, [2x3] vs [2x2]",
                         std::runtime_error);
}

TEST_CASE("matmul gradient matches finite differences and column sums") {
    Rng rng(7);
    std::vector<double> a_vals(6), b_vals(12);
    for (auto& v : a_vals) v = rng.uniform(-1.0, 1.0);
    for (auto& v : b_vals) v = rng.uniform(-1.0, 1.0);

    auto loss_fn = [&](const std::vector<double>& a_in) {
        Tape tape;
        const Tensor a = tape.leaf(Shape{2, 3}, a_in, true);
        const Tensor b = tape.leaf(Shape{3, 4}, b_vals, false);
        return sum_all(matmul(a, b)).value();
    };

    Tape tape;
    const Tensor a = tape.leaf(Shape{2, 3}, a_vals, true);
    const Tensor b = tape.leaf(Shape{3, 4}, b_vals, false);
    const Tensor loss = sum_all(matmul(a, b));
    tape.backward(loss);
    const std::vector<double> ad_grad = grad_of(a);

    const std::vector<double> fd = central_difference_gradient(loss_fn, a_vals, 1e-5);
    CHECK(max_rel_err(ad_grad, fd) < 1e-7);

    // d sum(AB) / dA[i][k] = sum_j B[k][j], independent of the row i.
    for (int k = 0; k < 3; ++k) {
        double colsum = 0.0;
        for (int j = 0; j < 4; ++j) colsum += b_vals[static_cast<std::size_t>(k) * 4 + j];
        CHECK(ad_grad[static_cast<std::size_t>(k)] == doctest::Approx(colsum).epsilon(1e-12));
        CHECK(ad_grad[3 + static_cast<std::size_t>(k)] ==
              doctest::Approx(colsum).epsilon(1e-12));
    }
}

TEST_CASE("elementwise fixed points") {
    Tape tape;
    CHECK(tanh(tape.scalar(0.0)).value() == 0.0);
    CHECK(relu(tape.scalar(-1.0)).value() == 0.0);
    CHECK(silu(tape.scalar(0.0)).value() == 0.0);

    const Tensor x = tape.scalar(3.0, true);
    const Tensor sq = square(x);
    CHECK(sq.value() == 9.0);
    tape.backward(sq);
    CHECK(x.grad_value() == 6.0);
}

TEST_CASE("silu derivative at zero is one half") {
    Tape tape;
    const Tensor x = tape.scalar(0.0, true);
    tape.backward(silu(x));
    CHECK(x.grad_value() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("reduce_sum examples") {
    Tape tape;
    const Tensor v = tape.leaf(Shape{3}, std::vector<double>{1, 2, 3}, true);
    const Tensor s = sum_all(v);
    CHECK(s.value() == 6.0);
    tape.backward(s);
    CHECK(grad_of(v) == std::vector<double>{1, 1, 1});

    Tape tape2;
    CHECK(sum_all(tape2.zeros(Shape{4, 5})).value() == 0.0);

    Tape tape3;
    const Tensor m = tape3.leaf(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}, false);
    const Tensor s0 = sum_axis(m, 0);
    CHECK(std::vector<double>(s0.values().begin(), s0.values().end()) ==
          std::vector<double>{5, 7, 9});
    const Tensor s1 = sum_axis(m, 1);
    CHECK(std::vector<double>(s1.values().begin(), s1.values().end()) ==
          std::vector<double>{6, 15});
    CHECK_THROWS(sum_axis(m, 2));
}

TEST_CASE("backward requires a scalar loss on the same tape") {
    Tape tape;
    const Tensor v = tape.leaf(Shape{3}, std::vector<double>{1, 2, 3}, true);
    CHECK_THROWS(tape.backward(v));

    Tape other;
    const Tensor s = other.scalar(1.0, true);
    CHECK_THROWS(tape.backward(s));
}

TEST_CASE("gradient accumulates across multiple uses") {
    Tape tape;
    const Tensor x = tape.scalar(1.5, true);
    const Tensor loss = add(x, x);
    tape.backward(loss);
    CHECK(x.grad_value() == 2.0);
}

TEST_CASE("backward of tanh(Wx) network matches finite differences") {
    Rng rng(21);
    std::vector<double> w_vals(12), x_vals(4);
    for (auto& v : w_vals) v = rng.uniform(-1.0, 1.0);
    for (auto& v : x_vals) v = rng.uniform(-1.0, 1.0);

    auto loss_fn = [&](const std::vector<double>& w_in) {
        Tape tape;
        const Tensor w = tape.leaf(Shape{3, 4}, w_in, true);
        const Tensor x = tape.leaf(Shape{4, 1}, x_vals, false);
        return sum_all(tanh(matmul(w, x))).value();
    };

    Tape tape;
    const Tensor w = tape.leaf(Shape{3, 4}, w_vals, true);
    const Tensor x = tape.leaf(Shape{4, 1}, x_vals, false);
    const Tensor loss = sum_all(tanh(matmul(w, x)));
    tape.backward(loss);
    CHECK(max_rel_err(grad_of(w), central_difference_gradient(loss_fn, w_vals, 1e-5)) < 1e-6);
}

TEST_CASE("scalar broadcast in binary ops") {
    Tape tape;
    const Tensor v = tape.leaf(Shape{3}, std::vector<double>{1, 2, 3}, true);
    const Tensor c = tape.scalar(2.0, true);
    const Tensor loss = sum_all(mul(v, c));
    CHECK(loss.value() == 12.0);
    tape.backward(loss);
    CHECK(grad_of(v) == std::vector<double>{2, 2, 2});
    CHECK(c.grad_value() == 6.0);
}

TEST_CASE("linear op forward and backward") {
    Rng rng(3);
    std::vector<double> x_vals(6), w_vals(12), b_vals(4);
    for (auto& v : x_vals) v = rng.uniform(-1.0, 1.0);
    for (auto& v : w_vals) v = rng.uniform(-1.0, 1.0);
    for (auto& v : b_vals) v = rng.uniform(-1.0, 1.0);

    // forward against matmul composition
    Tape ref;
    const Tensor xr = ref.leaf(Shape{2, 3}, x_vals, false);
    const Tensor wr = ref.leaf(Shape{3, 4}, w_vals, false);
    const Tensor mm = matmul(xr, wr);
    Tape tape;
    const Tensor x = tape.leaf(Shape{2, 3}, x_vals, true);
    const Tensor w = tape.leaf(Shape{3, 4}, w_vals, true);
    const Tensor b = tape.leaf(Shape{4}, b_vals, true);
    const Tensor y = linear(x, w, b);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 4; ++c)
            CHECK(y.values()[static_cast<std::size_t>(r) * 4 + c] ==
                  doctest::Approx(mm.values()[static_cast<std::size_t>(r) * 4 + c] +
                                  b_vals[static_cast<std::size_t>(c)])
                      .epsilon(1e-15));

    const Tensor loss = sum_all(square(y));
    tape.backward(loss);

    auto pack = [&](const std::vector<double>& xi, const std::vector<double>& wi,
                    const std::vector<double>& bi) {
        Tape t;
        return sum_all(square(linear(t.leaf(Shape{2, 3}, xi, true),
                                     t.leaf(Shape{3, 4}, wi, true), t.leaf(Shape{4}, bi, true))))
            .value();
    };
    const auto fd_x = central_difference_gradient(
        [&](const std::vector<double>& v) { return pack(v, w_vals, b_vals); }, x_vals);
    const auto fd_w = central_difference_gradient(
        [&](const std::vector<double>& v) { return pack(x_vals, v, b_vals); }, w_vals);
    const auto fd_b = central_difference_gradient(
        [&](const std::vector<double>& v) { return pack(x_vals, w_vals, v); }, b_vals);
    CHECK(max_rel_err(grad_of(x), fd_x) < 1e-6);
    CHECK(max_rel_err(grad_of(w), fd_w) < 1e-6);
    CHECK(max_rel_err(grad_of(b), fd_b) < 1e-6);
}

TEST_CASE("gradient-check property across every elementwise kind") {
    Rng rng(12345);
    const ElemKind kinds[] = {ElemKind::Add,  ElemKind::Sub,  ElemKind::Mul,
                              ElemKind::Square, ElemKind::Tanh, ElemKind::Silu,
                              ElemKind::Relu, ElemKind::Scale, ElemKind::Negate};
    for (const ElemKind kind : kinds) {
        for (int trial = 0; trial < 8; ++trial) {
            const int rows = 1 + static_cast<int>(rng.below(8));
            const int cols = 1 + static_cast<int>(rng.below(8));
            const std::size_t n = static_cast<std::size_t>(rows) * cols;
            std::vector<double> a_vals(n), b_vals(n);
            for (auto& v : a_vals) {
                v = rng.uniform(-1.0, 1.0);
                // keep relu away from its kink so finite differences are valid
                if (kind == ElemKind::Relu && std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
            }
            for (auto& v : b_vals) v = rng.uniform(-1.0, 1.0);
            const double constant = 1.7;

            auto eval = [&](const std::vector<double>& a_in) {
                Tape tape;
                const Tensor a = tape.leaf(Shape{rows, cols}, a_in, true);
                std::optional<Tensor> b;
                if (kind == ElemKind::Add || kind == ElemKind::Sub || kind == ElemKind::Mul)
                    b = tape.leaf(Shape{rows, cols}, b_vals, false);
                return sum_all(square(apply_elementwise(kind, a, b, constant))).value();
            };

            Tape tape;
            const Tensor a = tape.leaf(Shape{rows, cols}, a_vals, true);
            std::optional<Tensor> b;
            if (kind == ElemKind::Add || kind == ElemKind::Sub || kind == ElemKind::Mul)
                b = tape.leaf(Shape{rows, cols}, b_vals, false);
            const Tensor loss = sum_all(square(apply_elementwise(kind, a, b, constant)));
            tape.backward(loss);
            CHECK(max_rel_err(grad_of(a), central_difference_gradient(eval, a_vals, 1e-5)) <
                  1e-5);
        }
    }
}

TEST_CASE("transpose, concat and row_affine gradients") {
    Rng rng(99);
    std::vector<double> a_vals(6), b_vals(4);
    for (auto& v : a_vals) v = rng.uniform(-1.0, 1.0);
    for (auto& v : b_vals) v = rng.uniform(-1.0, 1.0);
    const std::vector<double> scale_v{1.3, -0.4, 2.0};
    const std::vector<double> shift_v{0.1, 0.0, -0.7};

    auto eval = [&](const std::vector<double>& a_in) {
        Tape tape;
        const Tensor a = tape.leaf(Shape{2, 3}, a_in, true);
        const Tensor b = tape.leaf(Shape{2, 2}, b_vals, false);
        const Tensor loss =
            add(sum_all(square(concat_cols(row_affine(a, scale_v, shift_v), b))),
                sum_all(square(transpose(a))));
        return loss.value();
    };

    Tape tape;
    const Tensor a = tape.leaf(Shape{2, 3}, a_vals, true);
    const Tensor b = tape.leaf(Shape{2, 2}, b_vals, false);
    const Tensor loss = add(sum_all(square(concat_cols(row_affine(a, scale_v, shift_v), b))),
                            sum_all(square(transpose(a))));
    tape.backward(loss);
    CHECK(max_rel_err(grad_of(a), central_difference_gradient(eval, a_vals, 1e-5)) < 1e-6);
}

TEST_CASE("linearity: scaling the loss by powers of two scales gradients exactly") {
    Rng rng(5);
    std::vector<double> vals(9);
    for (auto& v : vals) v = rng.uniform(-1.0, 1.0);

    std::vector<double> base;
    {
        Tape tape;
        const Tensor x = tape.leaf(Shape{3, 3}, vals, true);
        tape.backward(sum_all(square(tanh(x))));
        base = grad_of(x);
    }
    for (const double alpha : {2.0, 0.5, 8.0}) {
        Tape tape;
        const Tensor x = tape.leaf(Shape{3, 3}, vals, true);
        tape.backward(scale(sum_all(square(tanh(x))), alpha));
        const std::vector<double> scaled = grad_of(x);
        for (std::size_t i = 0; i < base.size(); ++i) CHECK(scaled[i] == alpha * base[i]);
    }
}

TEST_CASE("repeated backward accumulates additively; zero_grad clears") {
    Tape tape;
    const Tensor x = tape.scalar(3.0, true);
    const Tensor loss = square(x);
    tape.backward(loss);
    CHECK(x.grad_value() == 6.0);
    tape.backward(loss);
    CHECK(x.grad_value() == 12.0);
    tape.zero_grad();
    tape.backward(loss);
    CHECK(x.grad_value() == 6.0);
}

TEST_CASE("grad of a non-participating tensor stays absent") {
    Tape tape;
    const Tensor x = tape.scalar(2.0, true);
    const Tensor unused = tape.scalar(5.0, true);
    tape.backward(square(x));
    CHECK(unused.grad().empty());
}

TEST_CASE("deterministic gradients for identical inputs") {
    auto run = [] {
        Rng rng(42);
        std::vector<double> vals(16);
        for (auto& v : vals) v = rng.uniform(-1.0, 1.0);
        Tape tape;
        const Tensor x = tape.leaf(Shape{4, 4}, vals, true);
        const Tensor y = tape.leaf(Shape{4, 4}, vals, false);
        tape.backward(sum_all(silu(matmul(x, y))));
        const auto g = x.grad();
        return std::vector<double>(g.begin(), g.end());
    };
    const auto g1 = run();
    const auto g2 = run();
    CHECK(g1 == g2);
}
