#include <cmath>
#include <vector>

#include "doctest.h"
#include "logitmix/errors.hpp"
#include "logitmix/rng.hpp"
#include "logitmix/tensor.hpp"
#include "oracles.hpp"

using namespace logitmix;

TEST_CASE("matmul identity and scalar cases") {
    Tensor id = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor b = Tensor::from({2, 2}, {3, 4, 5, 6});
    Tensor c = matmul(id, b);
    CHECK(c.at(0, 0) == 3);
    CHECK(c.at(0, 1) == 4);
    CHECK(c.at(1, 0) == 5);
    CHECK(c.at(1, 1) == 6);

    Tensor s = matmul(Tensor::from({1, 1}, {2}), Tensor::from({1, 1}, {3}));
    CHECK(s.value() == 6);
}

TEST_CASE("matmul matches naive triple loop on random 3x4 by 4x2") {
    Rng rng(17);
    auto av = oracles::random_values(12, rng);
    auto bv = oracles::random_values(8, rng);
    Tensor a = Tensor::from({3, 4}, av);
    Tensor b = Tensor::from({4, 2}, bv);
    Tensor c = matmul(a, b);
    auto expect = oracles::matmul_naive(av, bv, 3, 4, 2);
    for (int i = 0; i < 6; ++i) CHECK(c.at(i) == doctest::Approx(expect[i]).epsilon(1e-14));
}

TEST_CASE("matmul dimension mismatch is a shape error") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 2});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("softmax uniform, stability and extended-precision oracle") {
    Tensor u = softmax(Tensor::from({3}, {0, 0, 0}));
    for (int i = 0; i < 3; ++i) CHECK(u.at(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    Tensor big = softmax(Tensor::from({2}, {1000, 0}));
    CHECK(std::isfinite(big.at(0)));
    CHECK(big.at(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(big.at(1) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> z{1, 2, 3};
    Tensor y = softmax(Tensor::from({3}, z));
    auto expect = oracles::softmax_longdouble(z);
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(y.at(i) - expect[i]) < 1e-15);
        total += y.at(i);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);

    CHECK_THROWS_AS(softmax(Tensor::zeros({0, 1})), ShapeError);
}

TEST_CASE("softmax output is a probability vector on random inputs") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.bounded(12));
        Tensor y = softmax(Tensor::from({n}, oracles::random_values(static_cast<std::size_t>(n), rng, -30, 30)));
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK(y.at(i) >= 0.0);
            total += y.at(i);
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("backward on sum gives ones; repeated backward accumulates") {
    Tensor w = Tensor::from({3}, {1, 2, 3}, true);
    Tensor loss = sum(w);
    backward(loss);
    for (int i = 0; i < 3; ++i) CHECK(w.grad_at(i) == 1.0);
    backward(loss);
    for (int i = 0; i < 3; ++i) CHECK(w.grad_at(i) == 2.0);
}

TEST_CASE("backward of dot(w, w) at [1,2] is [2,4]") {
    Tensor w = Tensor::from({2}, {1, 2}, true);
    Tensor loss = sum(mul(w, w));
    backward(loss);
    CHECK(w.grad_at(0) == doctest::Approx(2.0));
    CHECK(w.grad_at(1) == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar roots") {
    Tensor w = Tensor::from({2}, {1, 2}, true);
    Tensor y = mul(w, w);
    CHECK_THROWS_AS(backward(y), ShapeError);
}

TEST_CASE("no-grad mode records no graph") {
    Tensor w = Tensor::from({2}, {1, 2}, true);
    NoGradGuard ng;
    Tensor y = sum(mul(w, w));
    CHECK(y.node == nullptr);
    CHECK_FALSE(y.requires_grad);
}

TEST_CASE("forward is deterministic bit-for-bit") {
    Rng rng(99);
    auto xv = oracles::random_values(6, rng);
    auto wv = oracles::random_values(12, rng);
    auto run = [&] {
        Tensor x = Tensor::from({6}, xv);
        Tensor w = Tensor::from({6, 2}, wv);
        return vec_mat(tanh(x), w);
    };
    Tensor a = run();
    Tensor b = run();
    for (int i = 0; i < 2; ++i) CHECK(a.at(i) == b.at(i));
}

// Composed-network gradient check: a small MLP with every differentiable op
// in the library, against central finite differences.
TEST_CASE("analytic gradients match finite differences on composed networks") {
    Rng rng(1234);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int in_dim = 2 + static_cast<int>(rng.bounded(3));
        const int hid = 2 + static_cast<int>(rng.bounded(3));
        Tensor x = Tensor::from({in_dim}, oracles::random_values(static_cast<std::size_t>(in_dim), rng), true);
        Tensor w1 = Tensor::from({in_dim, hid}, oracles::random_values(static_cast<std::size_t>(in_dim * hid), rng, -1, 1), true);
        Tensor b1 = Tensor::from({hid}, oracles::random_values(static_cast<std::size_t>(hid), rng, -1, 1), true);
        Tensor w2 = Tensor::from({hid, 3}, oracles::random_values(static_cast<std::size_t>(hid * 3), rng, -1, 1), true);

        const int pick_idx = static_cast<int>(rng.bounded(3));
        auto net = [&]() -> Tensor {
            Tensor h = tanh(linear(x, w1, b1));
            Tensor z = vec_mat(h, w2);
            Tensor lp = log_softmax(z);
            Tensor p = softmax(z);
            Tensor mixed = add(scalar_mul(lp, 0.25), log(p));
            Tensor picked = pick(mixed, pick_idx);
            // exercise clip/min/exp on the scalar tail
            Tensor r = exp(scalar_mul(picked, 0.5));
            Tensor t = min_elem(r, clip(r, 0.2, 0.8));
            return sum(add_n(std::vector<Tensor>{t, picked, neg(picked)}));
        };

        Tensor loss = net();
        backward(loss);

        std::vector<Tensor*> params{&x, &w1, &b1, &w2};
        for (Tensor* p : params) {
            const int idx = static_cast<int>(rng.bounded(p->numel()));
            const double analytic = p->grad_at(idx);
            const double fd = oracles::central_difference([&] { return net().value(); }, *p, idx);
            CHECK_MESSAGE(oracles::close_rel(analytic, fd, 1e-4),
                          "trial ", trial, " analytic=", analytic, " fd=", fd);
            ++checked;
        }
        for (Tensor* p : params) p->zero_grad();
    }
    CHECK(checked >= 400);
}

TEST_CASE("sgd-style update leaves constants untouched and grads clear") {
    Tensor w = Tensor::from({2}, {1.0, -1.0}, true);
    Tensor c = Tensor::from({2}, {5.0, 5.0});
    Tensor loss = sum(mul(w, c));
    backward(loss);
    CHECK(w.grad_at(0) == 5.0);
    CHECK(c.grad == nullptr);
    w.zero_grad();
    CHECK(w.grad_at(0) == 0.0);
}
