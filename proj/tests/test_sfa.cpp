// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch.hpp>

#include "helpers.hpp"

using namespace vsr;
using vsrtest::rand_proj;

namespace {

template <class T>
void randomize(SfaT<T>& sfa, Rng& rng, double scale = 0.3) {
    sfa.scale_conv.weight.value = rng.randn<T>(sfa.scale_conv.weight.value.shape, scale);
    sfa.scale_conv.bias.value = rng.randn<T>(sfa.scale_conv.bias.value.shape, scale);
    sfa.bias_conv.weight.value = rng.randn<T>(sfa.bias_conv.weight.value.shape, scale);
    sfa.bias_conv.bias.value = rng.randn<T>(sfa.bias_conv.bias.value.shape, scale);
}

}  // namespace

TEST_CASE("fresh sfa emits unit scale and zero bias for any guidance", "[sfa]") {
    Sfa sfa;
    sfa.init(3);
    Rng rng(1);
    Tensor G = rng.randn<float>({2, 5, 5, 3});
    auto [S, M] = sfa.affine(G, false);
    for (float v : S.data) REQUIRE(v == 1.0f);
    for (float v : M.data) REQUIRE(v == 0.0f);
}

TEST_CASE("fresh sfa equals plain per-frame normalization bit-for-bit", "[sfa]") {
    Sfa sfa;
    sfa.init(2);
    Rng rng(2);
    Tensor F = rng.randn<float>({3, 6, 6, 2}, 1.7);
    Tensor G = rng.randn<float>({3, 6, 6, 2});
    Tensor out = sfa.forward(F, G, false);
    for (int f = 0; f < 3; ++f) {
        Tensor norm = normalize_spatial(frame_of(F, f));
        REQUIRE(vsrtest::bit_equal(frame_of(out, f), norm));
    }
    // per-channel mean of the output is 0
    for (int f = 0; f < 3; ++f)
        for (int c = 0; c < 2; ++c) {
            double s = 0;
            for (int y = 0; y < 6; ++y)
                for (int x = 0; x < 6; ++x) s += out.at4(f, y, x, c);
            REQUIRE(s / 36.0 == Approx(0.0).margin(1e-6));
        }
}

TEST_CASE("zero guidance passes conv biases through", "[sfa]") {
    Sfa sfa;
    sfa.init(2);
    sfa.scale_conv.bias.value = Tensor({2}, {0.25f, -0.5f});
    sfa.bias_conv.bias.value = Tensor({2}, {2.0f, 3.0f});
    Tensor G = Tensor::zeros({1, 4, 4, 2});
    auto [S, M] = sfa.affine(G, false);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            REQUIRE(S.at4(0, y, x, 0) == 0.25f);
            REQUIRE(S.at4(0, y, x, 1) == -0.5f);
            REQUIRE(M.at4(0, y, x, 0) == 2.0f);
            REQUIRE(M.at4(0, y, x, 1) == 3.0f);
        }
}

TEST_CASE("affine fields are linear in guidance once biases are subtracted", "[sfa]") {
    Sfa sfa;
    sfa.init(3);
    Rng rng(3);
    randomize(sfa, rng);
    Tensor zero = Tensor::zeros({1, 5, 5, 3});
    auto [Sb, Mb] = sfa.affine(zero, false);  // pure bias response
    Tensor g1 = rng.randn<float>({1, 5, 5, 3});
    Tensor g2 = rng.randn<float>({1, 5, 5, 3});
    auto [S1, M1] = sfa.affine(g1, false);
    auto [S2, M2] = sfa.affine(g2, false);
    auto [S12, M12] = sfa.affine(add(g1, g2), false);
    Tensor lin = add(sub(S1, Sb), sub(S2, Sb));
    REQUIRE(max_abs_diff(sub(S12, Sb), lin) < 1e-5);
    Tensor linM = add(sub(M1, Mb), sub(M2, Mb));
    REQUIRE(max_abs_diff(sub(M12, Mb), linM) < 1e-5);
}

TEST_CASE("zero scale makes the output equal the bias field", "[sfa]") {
    Sfa sfa;
    sfa.init(2);
    Rng rng(4);
    sfa.scale_conv.bias.value.zero();  // S == 0 everywhere now
    sfa.bias_conv.weight.value = rng.randn<float>(sfa.bias_conv.weight.value.shape, 0.5);
    sfa.bias_conv.bias.value = rng.randn<float>(sfa.bias_conv.bias.value.shape, 0.5);
    Tensor F = rng.randn<float>({2, 5, 5, 2});
    Tensor G = rng.randn<float>({2, 5, 5, 2});
    auto [S, M] = sfa.affine(G, false);
    Tensor out = sfa.forward(F, G, false);
    REQUIRE(vsrtest::bit_equal(out, M));
}

TEST_CASE("sfa forward gradient check", "[sfa][grad]") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(100 + seed);
        SfaT<double> sfa;
        sfa.init(2);
        randomize(sfa, rng);
        std::vector<ParameterT<double>*> ps = {&sfa.scale_conv.weight, &sfa.scale_conv.bias, &sfa.bias_conv.weight,
                                               &sfa.bias_conv.bias};
        Tensor64 F = rng.randn<double>({2, 4, 4, 2});
        Tensor64 G = rng.randn<double>({2, 4, 4, 2});
        const Tensor64 proj = rand_proj({2, 4, 4, 2}, rng);

        std::vector<std::pair<std::string, Tensor64>> inputs = {{"F", F}, {"G", G}};
        for (size_t i = 0; i < ps.size(); ++i) inputs.emplace_back("param" + std::to_string(i), ps[i]->value);

        auto assign = [&](const std::vector<Tensor64>& xs) {
            for (size_t i = 0; i < ps.size(); ++i) {
                ps[i]->value = xs[2 + i];
                ps[i]->zero_grad();
            }
        };
        auto value = [&](const std::vector<Tensor64>& xs) {
            assign(xs);
            return dot(sfa.forward(xs[0], xs[1], false), proj);
        };
        auto grad = [&](const std::vector<Tensor64>& xs) {
            assign(xs);
            sfa.forward(xs[0], xs[1], true);
            auto [gF, gG] = sfa.backward(proj);
            std::vector<Tensor64> gs = {gF, gG};
            for (auto* p : ps) gs.push_back(p->grad);
            return gs;
        };
        auto report = grad_check(value, grad, inputs, 1e-3);
        INFO(report.summary());
        REQUIRE(report.pass);
    }
}

TEST_CASE("frame-wise equivariance under joint permutation", "[sfa]") {
    Sfa sfa;
    sfa.init(2);
    Rng rng(5);
    randomize(sfa, rng);
    Tensor F = rng.randn<float>({4, 5, 5, 2});
    Tensor G = rng.randn<float>({4, 5, 5, 2});
    Tensor out = sfa.forward(F, G, false);

    const int perm[4] = {2, 0, 3, 1};
    Tensor Fp(F.shape), Gp(G.shape);
    for (int f = 0; f < 4; ++f) {
        set_frame(Fp, f, frame_of(F, perm[f]));
        set_frame(Gp, f, frame_of(G, perm[f]));
    }
    Tensor outp = sfa.forward(Fp, Gp, false);
    for (int f = 0; f < 4; ++f) REQUIRE(vsrtest::bit_equal(frame_of(outp, f), frame_of(out, perm[f])));
}

TEST_CASE("duplicated frames give identical output frames", "[sfa]") {
    Sfa sfa;
    sfa.init(2);
    Rng rng(6);
    randomize(sfa, rng);
    Tensor f0 = rng.randn<float>({1, 5, 5, 2});
    Tensor g0 = rng.randn<float>({1, 5, 5, 2});
    Tensor F({3, 5, 5, 2}), G({3, 5, 5, 2});
    for (int f = 0; f < 3; ++f) {
        set_frame(F, f, frame_of(f0, 0));
        set_frame(G, f, frame_of(g0, 0));
    }
    Tensor out = sfa.forward(F, G, false);
    REQUIRE(vsrtest::bit_equal(frame_of(out, 0), frame_of(out, 1)));
    REQUIRE(vsrtest::bit_equal(frame_of(out, 1), frame_of(out, 2)));
}

TEST_CASE("guidance locality is bounded by the conv receptive field", "[sfa]") {
    Sfa sfa;
    sfa.init(1);
    Rng rng(7);
    randomize(sfa, rng);
    Tensor G = rng.randn<float>({1, 9, 9, 1});
    auto [S0, M0] = sfa.affine(G, false);
    Tensor G2 = G;
    G2.at4(0, 4, 4, 0) += 1.0f;
    auto [S1, M1] = sfa.affine(G2, false);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) {
            const bool inside = std::abs(y - 4) <= 1 && std::abs(x - 4) <= 1;
            if (!inside) {
                REQUIRE(S1.at4(0, y, x, 0) == S0.at4(0, y, x, 0));
                REQUIRE(M1.at4(0, y, x, 0) == M0.at4(0, y, x, 0));
            }
        }
}

TEST_CASE("sfa rejects mismatched shapes", "[sfa]") {
    Sfa sfa;
    sfa.init(2);
    Rng rng(8);
    Tensor F = rng.randn<float>({2, 4, 4, 2});
    Tensor Gwrong = rng.randn<float>({2, 4, 4, 3});
    REQUIRE_THROWS_AS(sfa.forward(F, Gwrong, false), std::invalid_argument);
    Tensor Gframes = rng.randn<float>({3, 4, 4, 2});
    REQUIRE_THROWS_AS(sfa.forward(F, Gframes, false), std::invalid_argument);
}

TEST_CASE("scalar-stat variant normalizes over the whole map", "[sfa]") {
    SfaConfig cfg;
    cfg.per_channel_stats = false;
    Sfa sfa;
    sfa.init(2, cfg);
    Rng rng(9);
    Tensor F = rng.randn<float>({1, 6, 6, 2}, 3.0);
    Tensor G = rng.randn<float>({1, 6, 6, 2});
    Tensor out = sfa.forward(F, G, false);
    double s = 0, s2 = 0;
    for (float v : out.data) {
        s += v;
        s2 += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(out.numel());
    REQUIRE(s / n == Approx(0.0).margin(1e-6));
    REQUIRE(s2 / n - (s / n) * (s / n) == Approx(1.0).margin(1e-3));
}
