#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "logitmix/errors.hpp"
#include "logitmix/model.hpp"
#include "logitmix/rng.hpp"
#include "oracles.hpp"

using namespace logitmix;

namespace {

PolicyConfig small_cfg() {
    PolicyConfig cfg;
    cfg.vocab = 6;
    cfg.dim = 4;
    cfg.max_ctx = 8;
    cfg.hidden_layers = 2;
    return cfg;
}

std::vector<int> random_context(const PolicyConfig& cfg, Rng& rng) {
    const int n = 1 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(cfg.max_ctx)));
    std::vector<int> ctx(static_cast<std::size_t>(n));
    for (auto& t : ctx) t = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(cfg.vocab)));
    return ctx;
}

}  // namespace

TEST_CASE("logits are deterministic and depend only on the provided prefix") {
    Policy p = Policy::random_init(small_cfg(), 7);
    std::vector<int> ctx{1, 2, 3};
    auto a = p.logits_values(ctx);
    // interleave unrelated calls
    (void)p.logits_values(std::vector<int>{5, 5});
    (void)p.logits_values(std::vector<int>{0});
    auto b = p.logits_values(ctx);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("zero parameters give zero logits for every context") {
    Policy p = Policy::random_init(small_cfg(), 1);
    for (Tensor* t : p.parameters()) std::fill(t->data->begin(), t->data->end(), 0.0);
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        for (double v : p.logits_values(random_context(p.config(), rng))) CHECK(v == 0.0);
    }
}

TEST_CASE("forward pass matches hand computation on a 2-token d=2 network") {
    PolicyConfig cfg;
    cfg.vocab = 2;
    cfg.dim = 2;
    cfg.max_ctx = 4;
    cfg.hidden_layers = 1;
    Policy p = Policy::random_init(cfg, 0);

    auto params = p.parameters();  // tok, pos, w0, b0, out
    *params[0]->data = {0.1, 0.2, 0.3, 0.4};                    // tok [2x2]
    *params[1]->data = {0.05, -0.05, 0, 0, 0, 0, 0, 0};         // pos [4x2]
    *params[2]->data = {1, 0, 0, 1, 1, 0, 0, 1};                // w0 [4x2]
    *params[3]->data = {0.1, -0.1};                             // b0 [2]
    *params[4]->data = {1, 2, 3, 4};                            // out [2x2]

    // context {1}: e = tok[1] + pos[0] = (0.35, 0.35); pooled == last == e
    // h_in = (0.35, 0.35, 0.35, 0.35); pre = (0.7+0.1, 0.7-0.1)
    const double h0 = std::tanh(0.8);
    const double h1 = std::tanh(0.6);
    auto z = p.logits_values(std::vector<int>{1});
    CHECK(z[0] == doctest::Approx(h0 * 1 + h1 * 3).epsilon(1e-15));
    CHECK(z[1] == doctest::Approx(h0 * 2 + h1 * 4).epsilon(1e-15));
}

TEST_CASE("context validation") {
    Policy p = Policy::random_init(small_cfg(), 11);
    CHECK_THROWS_AS(p.logits_values(std::vector<int>{}), InputError);
    CHECK_THROWS_AS(p.logits_values(std::vector<int>(9, 0)), InputError);
    CHECK_THROWS_AS(p.logits_values(std::vector<int>{6}), InputError);
    CHECK_THROWS_AS(p.logits_values(std::vector<int>{-1}), InputError);
}

TEST_CASE("snapshot isolates the copy from later updates") {
    Policy p = Policy::random_init(small_cfg(), 21);
    Policy snap = p.snapshot();
    CHECK_FALSE(snap.trainable());
    const std::uint64_t before = snap.checksum();

    Rng rng(40);
    std::vector<std::vector<int>> contexts;
    for (int i = 0; i < 50; ++i) contexts.push_back(random_context(p.config(), rng));
    for (const auto& ctx : contexts) {
        auto zs = snap.logits_values(ctx);
        auto zp = p.logits_values(ctx);
        for (std::size_t j = 0; j < zs.size(); ++j) CHECK(zs[j] == zp[j]);
    }

    // perturb the source via a gradient step
    for (Tensor* t : p.parameters()) std::fill(t->grad->begin(), t->grad->end(), 1.0);
    p.sgd_step(0.1);
    CHECK(snap.checksum() == before);

    Policy snap2 = snap.snapshot();
    CHECK(snap2.checksum() == snap.checksum());
}

TEST_CASE("sgd_step semantics") {
    Policy p = Policy::random_init(small_cfg(), 33);
    const std::uint64_t before = p.checksum();
    p.sgd_step(0.5);  // zero grads: no-op
    CHECK(p.checksum() == before);

    // eta = 1 subtracts exactly the gradient
    Policy q = Policy::random_init(small_cfg(), 34);
    std::vector<double> first_before = *q.parameters()[0]->data;
    for (Tensor* t : q.parameters()) std::fill(t->grad->begin(), t->grad->end(), 0.25);
    q.sgd_step(1.0);
    for (std::size_t i = 0; i < first_before.size(); ++i) {
        CHECK(q.parameters()[0]->data->at(i) == first_before[i] - 0.25);
    }
    // grads cleared afterwards
    for (double g : *q.parameters()[0]->grad) CHECK(g == 0.0);

    // two half steps against a held gradient equal one full step
    Policy a = Policy::random_init(small_cfg(), 35);
    Policy b = Policy::random_init(small_cfg(), 35);
    Rng rng(8);
    std::vector<std::vector<double>> grads;
    for (Tensor* t : a.parameters()) grads.push_back(oracles::random_values(t->numel(), rng));
    auto apply = [&](Policy& pol, double lr) {
        auto params = pol.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) *params[i]->grad = grads[i];
        pol.sgd_step(lr);
    };
    apply(a, 0.2);
    apply(a, 0.2);
    apply(b, 0.4);
    auto pa = a.parameters();
    auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::size_t j = 0; j < pa[i]->numel(); ++j) {
            CHECK(pa[i]->data->at(j) == doctest::Approx(pb[i]->data->at(j)).epsilon(1e-14));
        }
    }

    Policy frozen = p.snapshot();
    CHECK_THROWS_AS(frozen.sgd_step(0.1), ContractError);
}

TEST_CASE("checkpoint round-trip reproduces logits bit-identically on 100 contexts") {
    Policy p = Policy::random_init(small_cfg(), 77);
    const char* path = "model_roundtrip.ckpt";
    p.save(path);
    Policy q = Policy::load(path);
    CHECK(q.trainable() == p.trainable());
    CHECK(q.checksum() == p.checksum());

    Rng rng(55);
    for (int i = 0; i < 100; ++i) {
        auto ctx = random_context(p.config(), rng);
        auto zp = p.logits_values(ctx);
        auto zq = q.logits_values(ctx);
        for (std::size_t j = 0; j < zp.size(); ++j) CHECK(zp[j] == zq[j]);
    }
    std::remove(path);
}

TEST_CASE("loading a corrupt checkpoint fails cleanly") {
    const char* path = "model_corrupt.ckpt";
    std::FILE* f = std::fopen(path, "w");
    std::fprintf(f, "not a checkpoint\n");
    std::fclose(f);
    CHECK_THROWS_AS(Policy::load(path), InputError);
    std::remove(path);
}
