#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "certismooth/nn.hpp"
#include "certismooth/rng.hpp"
#include "oracles.hpp"

using namespace certismooth;
using nn::Activation;

namespace {

nn::Mlp identity_layer(std::size_t d) {
    nn::Mlp mlp;
    nn::Layer layer;
    layer.w = nn::Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) layer.w.at(i, i) = 1.0;
    layer.b.assign(d, 0.0);
    layer.act = Activation::Identity;
    mlp.layers.push_back(layer);
    return mlp;
}

}  // namespace

TEST_CASE("forward: identity and zero-weight layers") {
    auto id = identity_layer(2);
    Vec out = nn::forward(id, {1.0, 2.0});
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 2.0);

    nn::Mlp zero;
    nn::Layer layer;
    layer.w = nn::Matrix(3, 2);
    layer.b.assign(3, 0.0);
    layer.act = Activation::Tanh;
    zero.layers.push_back(layer);
    Vec z = nn::forward(zero, {0.7, -0.3});
    for (double v : z) CHECK(v == 0.0);

    CHECK_THROWS_AS(nn::forward(id, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("forward matches an independent evaluator on a random 2-layer net") {
    auto mlp = nn::make_mlp({4, 5, 3}, {Activation::Tanh, Activation::Identity}, 7);
    Vec e1 = {1.0, 0.0, 0.0, 0.0};
    Vec got = nn::forward(mlp, e1);
    Vec want = oracles::mlp_eval(mlp, e1);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
    }
    // bit-identical repeat calls
    Vec again = nn::forward(mlp, e1);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == again[i]);
}

TEST_CASE("backward: identity transpose and tanh'(0) structure") {
    auto id = identity_layer(2);
    auto g = nn::backward(id, {0.3, 0.9}, {1.0, 0.0});
    CHECK(g.input[0] == 1.0);
    CHECK(g.input[1] == 0.0);

    // W = 0 tanh layer: weight grads equal upstream (x) input exactly
    nn::Mlp zero;
    nn::Layer layer;
    layer.w = nn::Matrix(2, 2);
    layer.b.assign(2, 0.0);
    layer.act = Activation::Tanh;
    zero.layers.push_back(layer);
    Vec x = {0.5, -1.5};
    Vec up = {2.0, -3.0};
    auto gz = nn::backward(zero, x, up);
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(gz.layers[0].w.at(r, c) == doctest::Approx(up[r] * x[c]).epsilon(1e-15));
        }
    }
    CHECK_THROWS_AS(nn::backward(id, {1.0, 2.0}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("cross_entropy values, stability, gradient sum") {
    auto [loss0, grad0] = nn::cross_entropy({0.0, 0.0}, 0);
    CHECK(loss0 == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(grad0[0] == doctest::Approx(-0.5));
    CHECK(grad0[1] == doctest::Approx(0.5));

    auto [loss1, grad1] = nn::cross_entropy({1000.0, 0.0}, 0);
    CHECK(loss1 == doctest::Approx(0.0));
    CHECK(std::isfinite(grad1[0]));

    // frozen direct evaluation: -log softmax((1,2,3))[2]
    auto [loss2, grad2] = nn::cross_entropy({1.0, 2.0, 3.0}, 2);
    CHECK(loss2 == doctest::Approx(0.40760596444438079).epsilon(1e-12));
    double sum = 0.0;
    for (double v : grad2) sum += v;
    CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(nn::cross_entropy({1.0, 2.0}, 2), std::invalid_argument);
}

TEST_CASE("sgd_step plain, momentum, and zero-gradient stationarity") {
    nn::Mlp mlp = identity_layer(1);
    mlp.layers[0].w.at(0, 0) = 1.0;
    nn::SgdState state;
    nn::MlpGrads g = nn::zero_grads(mlp);
    g.layers[0].w.at(0, 0) = 1.0;
    nn::sgd_step(mlp, g, 0.1, 0.0, state);
    CHECK(mlp.layers[0].w.at(0, 0) == doctest::Approx(0.9));

    // two momentum steps from p0 = 0: -0.1 then -0.19
    nn::Mlp m2 = identity_layer(1);
    m2.layers[0].w.at(0, 0) = 0.0;
    nn::SgdState s2;
    nn::sgd_step(m2, g, 0.1, 0.9, s2);
    CHECK(m2.layers[0].w.at(0, 0) == doctest::Approx(-0.1));
    nn::sgd_step(m2, g, 0.1, 0.9, s2);
    CHECK(m2.layers[0].w.at(0, 0) == doctest::Approx(-0.29));

    nn::Mlp m3 = identity_layer(1);
    double before = m3.layers[0].w.at(0, 0);
    nn::MlpGrads zg = nn::zero_grads(m3);
    nn::SgdState s3;
    nn::sgd_step(m3, zg, 0.1, 0.9, s3);
    CHECK(m3.layers[0].w.at(0, 0) == before);

    nn::MlpGrads bad = nn::zero_grads(m3);
    bad.layers[0].w.at(0, 0) = std::nan("");
    CHECK_THROWS_AS(nn::sgd_step(m3, bad, 0.1, 0.9, s3), TrainingError);
}

TEST_CASE("grad_check across architectures and seeds") {
    // zero network: both sides reproduce tanh'(0) structure
    nn::Mlp zero;
    nn::Layer layer;
    layer.w = nn::Matrix(3, 4);
    layer.b.assign(3, 0.0);
    layer.act = Activation::Tanh;
    zero.layers.push_back(layer);
    CHECK(nn::grad_check(zero, {0.1, 0.2, -0.3, 0.4}, 1, 1e-5) < 1e-6);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto mlp = nn::make_mlp({6, 8, 8, 4},
                                {Activation::Tanh, Activation::Tanh, Activation::Identity},
                                seed);
        rng::Stream rs(seed + 99);
        Vec x(6);
        for (double& v : x) v = rs.next_gaussian();
        CHECK(nn::grad_check(mlp, x, static_cast<int>(seed % 4), 1e-5) < 1e-4);
    }
}

TEST_CASE("checkpoint round trip") {
    auto mlp = nn::make_mlp({3, 5, 2}, {Activation::Tanh, Activation::Identity}, 42);
    const std::string path = "test_nn_ckpt.bin";
    nn::save_mlp(mlp, path);
    nn::Mlp loaded = nn::load_mlp(path);
    REQUIRE(loaded.layers.size() == mlp.layers.size());
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        CHECK(loaded.layers[i].act == mlp.layers[i].act);
        REQUIRE(loaded.layers[i].w.a.size() == mlp.layers[i].w.a.size());
        for (std::size_t j = 0; j < mlp.layers[i].w.a.size(); ++j) {
            CHECK(loaded.layers[i].w.a[j] == mlp.layers[i].w.a[j]);
        }
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(nn::load_mlp("does_not_exist.bin"), DataError);
}
