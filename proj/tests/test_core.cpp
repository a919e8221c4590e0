// SPDX-License-Identifier: Apache-2.0
//
// Core op tests: closed-form cases, linearity/stochasticity properties,
// and central finite-difference gradient checks in double.

#include <catch2/catch.hpp>

#include "helpers.hpp"

using namespace vsr;
using vsrtest::rand_proj;

TEST_CASE("conv2d scalar affine case", "[core]") {
    Tensor in({1, 1, 1}, {2.0f});
    Tensor w({1, 1, 1, 1}, {3.0f});
    Tensor b({1}, {1.0f});
    Tensor out = conv2d(in, w, b, 1, 0);
    REQUIRE(out.numel() == 1);
    REQUIRE(out[0] == Approx(7.0f));
}

TEST_CASE("conv2d zero weight and bias yields zero output", "[core]") {
    Rng rng(1);
    Tensor in = rng.randn<float>({5, 6, 3});
    Tensor w = Tensor::zeros({3, 3, 3, 4});
    Tensor b = Tensor::zeros({4});
    Tensor out = conv2d(in, w, b, 1, 1);
    REQUIRE(max_abs(out) == 0.0);
}

TEST_CASE("conv2d rejects channel mismatch naming both shapes", "[core]") {
    Tensor in({4, 4, 3});
    Tensor w({3, 3, 2, 4});
    Tensor b({4});
    try {
        conv2d(in, w, b, 1, 1);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("[4x4x3]") != std::string::npos);
        REQUIRE(msg.find("[3x3x2x4]") != std::string::npos);
    }
}

TEST_CASE("conv2d output size contract", "[core]") {
    Rng rng(2);
    Tensor in = rng.randn<float>({7, 9, 2});
    Tensor w = rng.randn<float>({3, 3, 2, 5});
    Tensor b = rng.randn<float>({5});
    Tensor out = conv2d(in, w, b, 2, 1);
    REQUIRE(out.shape == std::vector<int>{(7 + 2 - 3) / 2 + 1, (9 + 2 - 3) / 2 + 1, 5});
}

TEST_CASE("conv2d linearity", "[core]") {
    Rng rng(3);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor x = rng.randn<float>({5, 5, 2});
        Tensor y = rng.randn<float>({5, 5, 2});
        Tensor w = rng.randn<float>({3, 3, 2, 3});
        Tensor nob;  // bias disabled
        const float a = 0.7f, b = -1.3f;
        Tensor xy = add(scale(x, a), scale(y, b));
        Tensor lhs = conv2d(xy, w, nob, 1, 1);
        Tensor rhs = add(scale(conv2d(x, w, nob, 1, 1), a), scale(conv2d(y, w, nob, 1, 1), b));
        REQUIRE(max_abs_diff(lhs, rhs) < 1e-5);
    }
}

TEST_CASE("conv2d gradient matches finite differences", "[core][grad]") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        Tensor64 in = rng.randn<double>({5, 5, 2});
        Tensor64 w = rng.randn<double>({3, 3, 2, 4});
        Tensor64 b = rng.randn<double>({4});
        const Tensor64 proj = rand_proj({5, 5, 4}, rng);

        auto value = [&](const std::vector<Tensor64>& xs) { return dot(conv2d(xs[0], xs[1], xs[2], 1, 1), proj); };
        auto grad = [&](const std::vector<Tensor64>& xs) {
            Tensor64 gi, gw, gb;
            conv2d_backward(proj, xs[0], xs[1], 1, 1, &gi, &gw, &gb);
            return std::vector<Tensor64>{gi, gw, gb};
        };
        auto report = grad_check(value, grad, {{"input", in}, {"weight", w}, {"bias", b}}, 1e-4);
        INFO(report.summary());
        REQUIRE(report.pass);
    }
}

TEST_CASE("conv3d pointwise identity mixing", "[core]") {
    Tensor in({1, 1, 1, 2}, {1.0f, 2.0f});
    Tensor w({1, 1, 1, 2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
    Tensor b;
    Tensor out = conv3d(in, w, b, 1, 0);
    REQUIRE(out[0] == 1.0f);
    REQUIRE(out[1] == 2.0f);
}

TEST_CASE("conv3d zero weight yields zero", "[core]") {
    Rng rng(4);
    Tensor in = rng.randn<float>({3, 4, 4, 2});
    Tensor w = Tensor::zeros({3, 3, 3, 2, 3});
    Tensor b = Tensor::zeros({3});
    REQUIRE(max_abs(conv3d(in, w, b, 1, 1)) == 0.0);
}

TEST_CASE("conv3d linearity", "[core]") {
    Rng rng(15);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor x = rng.randn<float>({2, 4, 4, 2});
        Tensor y = rng.randn<float>({2, 4, 4, 2});
        Tensor w = rng.randn<float>({3, 3, 3, 2, 3});
        Tensor nob;
        const float a = -0.4f, b = 0.9f;
        Tensor lhs = conv3d(add(scale(x, a), scale(y, b)), w, nob, 1, 1);
        Tensor rhs = add(scale(conv3d(x, w, nob, 1, 1), a), scale(conv3d(y, w, nob, 1, 1), b));
        REQUIRE(max_abs_diff(lhs, rhs) < 1e-5);
    }
}

TEST_CASE("conv3d gradient matches finite differences", "[core][grad]") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(10 + seed);
        Tensor64 in = rng.randn<double>({3, 4, 4, 2});
        Tensor64 w = rng.randn<double>({1, 1, 1, 2, 3});
        Tensor64 b = rng.randn<double>({3});
        const Tensor64 proj = rand_proj({3, 4, 4, 3}, rng);

        auto value = [&](const std::vector<Tensor64>& xs) { return dot(conv3d(xs[0], xs[1], xs[2], 1, 0), proj); };
        auto grad = [&](const std::vector<Tensor64>& xs) {
            Tensor64 gi, gw, gb;
            conv3d_backward(proj, xs[0], xs[1], 1, 0, &gi, &gw, &gb);
            return std::vector<Tensor64>{gi, gw, gb};
        };
        auto report = grad_check(value, grad, {{"input", in}, {"weight", w}, {"bias", b}}, 1e-4);
        INFO(report.summary());
        REQUIRE(report.pass);
    }
}

TEST_CASE("attention with a single key returns that value row", "[core]") {
    Rng rng(5);
    Tensor Q = rng.randn<float>({3, 4});
    Tensor K = rng.randn<float>({1, 4});
    Tensor V = rng.randn<float>({1, 4});
    Tensor out = attention(Q, K, V);
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 4; ++c) REQUIRE(out.at2(i, c) == Approx(V.at2(0, c)));
}

TEST_CASE("attention with equal scores averages values", "[core]") {
    // Q orthogonal to every K -> uniform weights -> column mean of V
    Tensor Q({2, 2}, {1.0f, 0.0f, -2.0f, 0.0f});
    Tensor K({3, 2}, {0.0f, 1.0f, 0.0f, -0.5f, 0.0f, 2.0f});
    Rng rng(6);
    Tensor V = rng.randn<float>({3, 2});
    Tensor out = attention(Q, K, V);
    for (int c = 0; c < 2; ++c) {
        const float mean = (V.at2(0, c) + V.at2(1, c) + V.at2(2, c)) / 3.0f;
        REQUIRE(out.at2(0, c) == Approx(mean).margin(1e-6));
        REQUIRE(out.at2(1, c) == Approx(mean).margin(1e-6));
    }
}

TEST_CASE("attention weights are stochastic rows", "[core]") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(20 + seed);
        Tensor Q = rng.randn<float>({4, 3});
        Tensor K = rng.randn<float>({6, 3});
        Tensor V = rng.randn<float>({6, 3});
        AttentionCache<float> cache;
        attention(Q, K, V, &cache);
        for (int i = 0; i < 4; ++i) {
            double sum = 0;
            for (int j = 0; j < 6; ++j) {
                REQUIRE(cache.weights.at2(i, j) >= 0.0f);
                sum += cache.weights.at2(i, j);
            }
            REQUIRE(sum == Approx(1.0).margin(1e-6));
        }
    }
}

TEST_CASE("attention rejects empty or inconsistent key sets", "[core]") {
    Tensor Q({2, 3});
    // an m=0 key matrix cannot even be constructed (dims must be positive)
    REQUIRE_THROWS_AS(Tensor({0, 3}), std::invalid_argument);
    // K/V row mismatch
    Tensor K({1, 3});
    Tensor V({2, 3});
    REQUIRE_THROWS_AS(attention(Q, K, V), std::invalid_argument);
}

TEST_CASE("attention gradient matches finite differences", "[core][grad]") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(30 + seed);
        Tensor64 Q = rng.randn<double>({3, 2});
        Tensor64 K = rng.randn<double>({4, 2});
        Tensor64 V = rng.randn<double>({4, 2});
        const Tensor64 proj = rand_proj({3, 2}, rng);

        auto value = [&](const std::vector<Tensor64>& xs) { return dot(attention(xs[0], xs[1], xs[2]), proj); };
        auto grad = [&](const std::vector<Tensor64>& xs) {
            AttentionCache<double> cache;
            attention(xs[0], xs[1], xs[2], &cache);
            Tensor64 dQ, dK, dV;
            attention_backward(proj, xs[0], xs[1], xs[2], cache, dQ, dK, dV);
            return std::vector<Tensor64>{dQ, dK, dV};
        };
        auto report = grad_check(value, grad, {{"Q", Q}, {"K", K}, {"V", V}}, 1e-4);
        INFO(report.summary());
        REQUIRE(report.pass);
    }
}

TEST_CASE("pixel_shuffle layout definition", "[core]") {
    Tensor in({1, 1, 4}, {1.0f, 2.0f, 3.0f, 4.0f});  // a,b,c,d
    Tensor out = pixel_shuffle(in, 2);
    REQUIRE(out.shape == std::vector<int>{2, 2, 1});
    REQUIRE(out.at3(0, 0, 0) == 1.0f);
    REQUIRE(out.at3(0, 1, 0) == 2.0f);
    REQUIRE(out.at3(1, 0, 0) == 3.0f);
    REQUIRE(out.at3(1, 1, 0) == 4.0f);
}

TEST_CASE("pixel_shuffle r=1 is identity", "[core]") {
    Rng rng(7);
    Tensor in = rng.randn<float>({3, 4, 5});
    REQUIRE(vsrtest::bit_equal(pixel_shuffle(in, 1), in));
}

TEST_CASE("pixel_shuffle round trip and multiset preservation", "[core]") {
    Rng rng(8);
    Tensor in = rng.randn<float>({2, 3, 8});
    Tensor out = pixel_shuffle(in, 2);
    Tensor back = pixel_unshuffle(out, 2);
    REQUIRE(vsrtest::bit_equal(back, in));
    auto a = in.data, b = out.data;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    REQUIRE(a == b);
}

TEST_CASE("pixel_shuffle rejects non-divisible channels", "[core]") {
    Tensor in({2, 2, 6});
    REQUIRE_THROWS_AS(pixel_shuffle(in, 2), std::invalid_argument);
}

TEST_CASE("channel_stats closed forms", "[core]") {
    Tensor mu, sigma;
    channel_stats(Tensor::full({3, 4, 2}, 5.0f), mu, sigma);
    REQUIRE(mu[0] == Approx(5.0f));
    REQUIRE(mu[1] == Approx(5.0f));
    REQUIRE(sigma[0] == Approx(std::sqrt(kEpsStat)).epsilon(1e-5));

    Tensor pm({1, 2, 1}, {-1.0f, 1.0f});
    channel_stats(pm, mu, sigma);
    REQUIRE(mu[0] == Approx(0.0f).margin(1e-9));
    REQUIRE(sigma[0] == Approx(std::sqrt(1.0 + kEpsStat)).epsilon(1e-6));
}

TEST_CASE("normalized map has zero mean unit variance per channel", "[core]") {
    Rng rng(9);
    Tensor f = rng.randn<float>({6, 7, 3}, 2.5);
    Tensor norm = normalize_spatial(f);
    const int H = 6, W = 7, C = 3;
    for (int c = 0; c < C; ++c) {
        double s = 0, s2 = 0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                s += norm.at3(y, x, c);
                s2 += static_cast<double>(norm.at3(y, x, c)) * norm.at3(y, x, c);
            }
        const double mean = s / (H * W);
        const double var = s2 / (H * W) - mean * mean;
        REQUIRE(mean == Approx(0.0).margin(1e-6));
        REQUIRE(var == Approx(1.0).margin(1e-3));
    }
}

TEST_CASE("channel_stats gradient matches finite differences", "[core][grad]") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(40 + seed);
        Tensor64 f = rng.randn<double>({4, 5, 3});
        const Tensor64 pm = rand_proj({3}, rng);
        const Tensor64 ps = rand_proj({3}, rng);

        auto value = [&](const std::vector<Tensor64>& xs) {
            Tensor64 mu, sigma;
            channel_stats(xs[0], mu, sigma);
            return dot(mu, pm) + dot(sigma, ps);
        };
        auto grad = [&](const std::vector<Tensor64>& xs) {
            Tensor64 mu, sigma;
            channel_stats(xs[0], mu, sigma);
            return std::vector<Tensor64>{channel_stats_backward(xs[0], mu, sigma, pm, ps)};
        };
        auto report = grad_check(value, grad, {{"f", f}}, 1e-4);
        INFO(report.summary());
        REQUIRE(report.pass);
    }
}

TEST_CASE("normalize_spatial gradient matches finite differences", "[core][grad]") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(50 + seed);
        Tensor64 f = rng.randn<double>({4, 4, 2});
        const Tensor64 proj = rand_proj({4, 4, 2}, rng);
        auto value = [&](const std::vector<Tensor64>& xs) { return dot(normalize_spatial(xs[0]), proj); };
        auto grad = [&](const std::vector<Tensor64>& xs) {
            NormalizeCache<double> cache;
            normalize_spatial(xs[0], &cache);
            return std::vector<Tensor64>{normalize_spatial_backward(proj, cache)};
        };
        auto report = grad_check(value, grad, {{"f", f}}, 1e-3);
        INFO(report.summary());
        REQUIRE(report.pass);
    }
}

TEST_CASE("charbonnier closed forms", "[core]") {
    Rng rng(11);
    Tensor x = rng.randn<float>({2, 3, 4});
    REQUIRE(charbonnier(x, x, 1e-3) == Approx(1e-3).epsilon(1e-6));

    Tensor a({1}, {3.0f});
    Tensor z({1}, {0.0f});
    REQUIRE(charbonnier(a, z, 4.0) == Approx(5.0));  // 3-4-5
}

TEST_CASE("charbonnier rejects shape mismatch", "[core]") {
    REQUIRE_THROWS_AS(charbonnier(Tensor({2, 2}), Tensor({2, 3}), 1e-3), std::invalid_argument);
}

TEST_CASE("charbonnier gradient matches finite differences", "[core][grad]") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(60 + seed);
        Tensor64 x = rng.randn<double>({3, 3, 2});
        Tensor64 y = rng.randn<double>({3, 3, 2});
        auto value = [&](const std::vector<Tensor64>& xs) { return charbonnier(xs[0], xs[1], 0.3); };
        auto grad = [&](const std::vector<Tensor64>& xs) {
            Tensor64 gx = charbonnier_backward(xs[0], xs[1], 0.3);
            Tensor64 gy = scale(gx, -1.0);
            return std::vector<Tensor64>{gx, gy};
        };
        auto report = grad_check(value, grad, {{"x", x}, {"y", y}}, 1e-4);
        INFO(report.summary());
        REQUIRE(report.pass);
    }
}

TEST_CASE("gelu gradient matches finite differences", "[core][grad]") {
    Rng rng(70);
    Tensor64 x = rng.randn<double>({4, 4, 2});
    const Tensor64 proj = rand_proj({4, 4, 2}, rng);
    auto value = [&](const std::vector<Tensor64>& xs) { return dot(gelu(xs[0]), proj); };
    auto grad = [&](const std::vector<Tensor64>& xs) {
        return std::vector<Tensor64>{gelu_backward(proj, xs[0])};
    };
    auto report = grad_check(value, grad, {{"x", x}}, 1e-4);
    INFO(report.summary());
    REQUIRE(report.pass);
}

TEST_CASE("grad_check is exact on a linear op", "[core]") {
    Rng rng(12);
    Tensor64 x = rng.randn<double>({5});
    const Tensor64 proj = rand_proj({5}, rng);
    auto value = [&](const std::vector<Tensor64>& xs) { return 3.0 * dot(xs[0], proj); };
    auto grad = [&](const std::vector<Tensor64>&) { return std::vector<Tensor64>{scale(proj, 3.0)}; };
    auto report = grad_check(value, grad, {{"x", x}}, 1e-3);
    REQUIRE(report.pass);
    REQUIRE(report.entries[0].rel_err < 1e-9);
}

TEST_CASE("grad_check at charbonnier minimum sees zero gradient", "[core]") {
    Rng rng(13);
    Tensor64 x = rng.randn<double>({6});
    const Tensor64 y = x;
    auto value = [&](const std::vector<Tensor64>& xs) { return charbonnier(xs[0], y, 0.5); };
    auto grad = [&](const std::vector<Tensor64>& xs) {
        return std::vector<Tensor64>{charbonnier_backward(xs[0], y, 0.5)};
    };
    auto report = grad_check(value, grad, {{"x", x}}, 1e-3);
    REQUIRE(report.pass);
}

TEST_CASE("grad_check flags non-finite analytic gradients", "[core]") {
    Tensor64 x({2}, {1.0, 2.0});
    auto value = [&](const std::vector<Tensor64>&) { return 0.0; };
    auto grad = [&](const std::vector<Tensor64>&) {
        Tensor64 g({2});
        g[0] = std::numeric_limits<double>::quiet_NaN();
        return std::vector<Tensor64>{g};
    };
    REQUIRE_THROWS_WITH(grad_check(value, grad, {{"bad_input", x}}, 1e-3), Catch::Contains("bad_input"));
}

TEST_CASE("rng determinism", "[core]") {
    Rng a(123), b(123);
    Tensor ta = a.randn<float>({64});
    Tensor tb = b.randn<float>({64});
    REQUIRE(vsrtest::bit_equal(ta, tb));
    // statistical sanity
    Rng c(99);
    double s = 0, s2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = c.normal();
        s += v;
        s2 += v * v;
    }
    REQUIRE(s / n == Approx(0.0).margin(0.03));
    REQUIRE(s2 / n == Approx(1.0).margin(0.05));
}
