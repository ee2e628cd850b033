#include <doctest.h>

#include <cmath>

#include "gald/nn_ops.hpp"
#include "gald/oracles.hpp"

using namespace gald;
using namespace gald::oracles;

TEST_CASE("dense oracle: single node returns its value vector") {
    Tensor x = Tensor::seeded_uniform({1, 3, 1, 1}, 1, -1, 1);
    Tensor th = Tensor::seeded_uniform({2, 3, 1, 1}, 2, -1, 1);
    Tensor ph = Tensor::seeded_uniform({2, 3, 1, 1}, 3, -1, 1);
    Tensor g = Tensor::seeded_uniform({2, 3, 1, 1}, 4, -1, 1);
    Tensor out = dense_attention_oracle(x, th, ph, g);
    for (std::size_t r = 0; r < 2; ++r) {
        double want = 0;
        for (std::size_t c = 0; c < 3; ++c) want += g.at(r, c, 0, 0) * x.at(0, c, 0, 0);
        CHECK(out.at(0, r, 0, 0) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("dense oracle: zero query/key gives uniform attention") {
    Tensor x = Tensor::seeded_uniform({1, 2, 2, 2}, 5, -1, 1);
    Tensor zero = Tensor::zeros({2, 2, 1, 1});
    Tensor g = Tensor::seeded_uniform({2, 2, 1, 1}, 6, -1, 1);
    Tensor out = dense_attention_oracle(x, zero, zero, g);
    for (std::size_t r = 0; r < 2; ++r) {
        double mean = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            double proj = 0;
            for (std::size_t c = 0; c < 2; ++c)
                proj += g.at(r, c, 0, 0) * x.at(0, c, i / 2, i % 2);
            mean += proj;
        }
        mean /= 4;
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(out.at(0, r, i / 2, i % 2) == doctest::Approx(mean).epsilon(1e-10));
    }
}

TEST_CASE("dense oracle refuses large N") {
    Tensor x = Tensor::zeros({1, 1, 9, 9});
    Tensor p = Tensor::zeros({1, 1, 1, 1});
    CHECK_THROWS_AS(dense_attention_oracle(x, p, p, p), std::invalid_argument);
}

TEST_CASE("naive conv oracle identity 1x1") {
    Tensor x = Tensor::seeded_uniform({1, 2, 3, 3}, 7, -1, 1);
    Tensor k = Tensor::zeros({2, 2, 1, 1});
    k.at(0, 0, 0, 0) = 1;
    k.at(1, 1, 0, 0) = 1;
    Tensor out = naive_conv_oracle(x, ConvWeights{k, std::nullopt, ConvSpec{}});
    CHECK(approx_eq(out, x, 0, 0));
}

TEST_CASE("finite differences on closed-form functionals") {
    Tensor x = Tensor::seeded_uniform({1, 1, 2, 3}, 8, -1, 1);

    auto fsum = [](const Tensor& t) {
        double s = 0;
        for (std::size_t i = 0; i < t.numel(); ++i) s += t[i];
        return s;
    };
    Tensor g = finite_diff_grad(fsum, x, 1e-5);
    for (std::size_t i = 0; i < g.numel(); ++i) CHECK(g[i] == doctest::Approx(1.0).epsilon(1e-8));

    auto fq = [](const Tensor& t) {
        double s = 0;
        for (std::size_t i = 0; i < t.numel(); ++i) s += 0.5 * t[i] * t[i];
        return s;
    };
    Tensor gq = finite_diff_grad(fq, x, 1e-5);
    for (std::size_t i = 0; i < gq.numel(); ++i)
        CHECK(std::fabs(gq[i] - x[i]) < 1e-8);

    Tensor zero = Tensor::zeros({1, 1, 2, 2});
    auto fsig = [](const Tensor& t) {
        double s = 0;
        for (std::size_t i = 0; i < t.numel(); ++i) s += 1.0 / (1.0 + std::exp(-t[i]));
        return s;
    };
    Tensor gs = finite_diff_grad(fsig, zero, 1e-5);
    for (std::size_t i = 0; i < gs.numel(); ++i)
        CHECK(gs[i] == doctest::Approx(0.25).epsilon(1e-8));
}

TEST_CASE("gradcheck flags a corrupted backward") {
    auto good = [](const std::vector<Tensor>& a) { return sigmoid_op(a[0]); };
    auto bad = [](const std::vector<Tensor>& a) {
        OpResult r = sigmoid_op(a[0]);
        BackwardFn orig = r.backward;
        r.backward = [orig](const Tensor& go) {
            auto g = orig(go);
            for (std::size_t i = 0; i < g[0].numel(); ++i) g[0][i] *= 1.01;
            return g;
        };
        return r;
    };
    std::vector<Tensor> args{Tensor::seeded_uniform({1, 1, 2, 2}, 9, -1, 1)};
    CHECK(gradcheck(good, args).max_rel_err < 1e-6);
    CHECK(gradcheck(bad, args).max_rel_err > 1e-6);
}
