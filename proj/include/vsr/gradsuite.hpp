// SPDX-License-Identifier: Apache-2.0
//
// Registered finite-difference verification suites: one entry per
// differentiable op and per composite module, each checkable on seeded
// random instances in double precision.

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "core/grad_check.hpp"
#include "core/loss.hpp"
#include "core/pixel_shuffle.hpp"
#include "nets/blocks.hpp"
#include "nets/refiner.hpp"
#include "sfa.hpp"
#include "tfa.hpp"

namespace vsr {

using GradSuiteFn = std::function<GradCheckReport(uint64_t seed, double tol)>;

inline GradCheckReport gradsuite_conv2d(uint64_t seed, double tol) {
    Rng rng(seed);
    Tensor64 in = rng.randn<double>({5, 5, 2}), w = rng.randn<double>({3, 3, 2, 4}), b = rng.randn<double>({4});
    Tensor64 proj = rng.randn<double>({5, 5, 4});
    return grad_check(
        [&](const std::vector<Tensor64>& xs) { return dot(conv2d(xs[0], xs[1], xs[2], 1, 1), proj); },
        [&](const std::vector<Tensor64>& xs) {
            Tensor64 gi, gw, gb;
            conv2d_backward(proj, xs[0], xs[1], 1, 1, &gi, &gw, &gb);
            return std::vector<Tensor64>{gi, gw, gb};
        },
        {{"input", in}, {"weight", w}, {"bias", b}}, tol);
}

inline GradCheckReport gradsuite_conv3d(uint64_t seed, double tol) {
    Rng rng(seed);
    Tensor64 in = rng.randn<double>({3, 4, 4, 2}), w = rng.randn<double>({1, 1, 1, 2, 3}), b = rng.randn<double>({3});
    Tensor64 proj = rng.randn<double>({3, 4, 4, 3});
    return grad_check(
        [&](const std::vector<Tensor64>& xs) { return dot(conv3d(xs[0], xs[1], xs[2], 1, 0), proj); },
        [&](const std::vector<Tensor64>& xs) {
            Tensor64 gi, gw, gb;
            conv3d_backward(proj, xs[0], xs[1], 1, 0, &gi, &gw, &gb);
            return std::vector<Tensor64>{gi, gw, gb};
        },
        {{"input", in}, {"weight", w}, {"bias", b}}, tol);
}

inline GradCheckReport gradsuite_attention(uint64_t seed, double tol) {
    Rng rng(seed);
    Tensor64 Q = rng.randn<double>({3, 2}), K = rng.randn<double>({4, 2}), V = rng.randn<double>({4, 2});
    Tensor64 proj = rng.randn<double>({3, 2});
    return grad_check(
        [&](const std::vector<Tensor64>& xs) { return dot(attention(xs[0], xs[1], xs[2]), proj); },
        [&](const std::vector<Tensor64>& xs) {
            AttentionCache<double> c;
            attention(xs[0], xs[1], xs[2], &c);
            Tensor64 dQ, dK, dV;
            attention_backward(proj, xs[0], xs[1], xs[2], c, dQ, dK, dV);
            return std::vector<Tensor64>{dQ, dK, dV};
        },
        {{"Q", Q}, {"K", K}, {"V", V}}, tol);
}

inline GradCheckReport gradsuite_pixel_shuffle(uint64_t seed, double tol) {
    Rng rng(seed);
    Tensor64 in = rng.randn<double>({2, 3, 8});
    Tensor64 proj = rng.randn<double>({4, 6, 2});
    return grad_check(
        [&](const std::vector<Tensor64>& xs) { return dot(pixel_shuffle(xs[0], 2), proj); },
        [&](const std::vector<Tensor64>&) { return std::vector<Tensor64>{pixel_shuffle_backward(proj, 2)}; },
        {{"input", in}}, tol);
}

inline GradCheckReport gradsuite_channel_stats(uint64_t seed, double tol) {
    Rng rng(seed);
    Tensor64 f = rng.randn<double>({4, 5, 3});
    Tensor64 pm = rng.randn<double>({3}), ps = rng.randn<double>({3});
    return grad_check(
        [&](const std::vector<Tensor64>& xs) {
            Tensor64 mu, sigma;
            channel_stats(xs[0], mu, sigma);
            return dot(mu, pm) + dot(sigma, ps);
        },
        [&](const std::vector<Tensor64>& xs) {
            Tensor64 mu, sigma;
            channel_stats(xs[0], mu, sigma);
            return std::vector<Tensor64>{channel_stats_backward(xs[0], mu, sigma, pm, ps)};
        },
        {{"f", f}}, tol);
}

inline GradCheckReport gradsuite_charbonnier(uint64_t seed, double tol) {
    Rng rng(seed);
    Tensor64 x = rng.randn<double>({3, 3, 2}), y = rng.randn<double>({3, 3, 2});
    return grad_check(
        [&](const std::vector<Tensor64>& xs) { return charbonnier(xs[0], xs[1], 0.3); },
        [&](const std::vector<Tensor64>& xs) {
            Tensor64 gx = charbonnier_backward(xs[0], xs[1], 0.3);
            return std::vector<Tensor64>{gx, scale(gx, -1.0)};
        },
        {{"x", x}, {"y", y}}, tol);
}

inline GradCheckReport gradsuite_sfa(uint64_t seed, double tol) {
    Rng rng(seed);
    SfaT<double> sfa;
    sfa.init(2);
    sfa.scale_conv.weight.value = rng.randn<double>(sfa.scale_conv.weight.value.shape, 0.3);
    sfa.scale_conv.bias.value = rng.randn<double>({2}, 0.3);
    sfa.bias_conv.weight.value = rng.randn<double>(sfa.bias_conv.weight.value.shape, 0.3);
    Tensor64 F = rng.randn<double>({2, 4, 4, 2}), G = rng.randn<double>({2, 4, 4, 2});
    Tensor64 proj = rng.randn<double>({2, 4, 4, 2});
    return grad_check(
        [&](const std::vector<Tensor64>& xs) { return dot(sfa.forward(xs[0], xs[1], false), proj); },
        [&](const std::vector<Tensor64>& xs) {
            sfa.forward(xs[0], xs[1], true);
            auto [gF, gG] = sfa.backward(proj);
            return std::vector<Tensor64>{gF, gG};
        },
        {{"F", F}, {"G", G}}, tol);
}

inline GradCheckReport gradsuite_tfa(uint64_t seed, double tol) {
    Rng rng(seed);
    TfaT<double> tfa;
    TfaConfig tc;
    tc.heads = 2;
    tfa.init(4, rng, tc);
    for (auto* l : {&tfa.self_out, &tfa.cross_out}) l->weight.value = rng.randn<double>(l->weight.value.shape, 0.3);
    Tensor64 F = rng.randn<double>({2, 3, 3, 4}), G = rng.randn<double>({2, 3, 3, 4});
    Tensor64 proj = rng.randn<double>({2, 3, 3, 4});
    const WindowSpec spec{2, 2};
    return grad_check(
        [&](const std::vector<Tensor64>& xs) { return dot(tfa.forward(xs[0], xs[1], spec, false), proj); },
        [&](const std::vector<Tensor64>& xs) {
            tfa.forward(xs[0], xs[1], spec, true);
            auto [gF, gG] = tfa.backward(proj);
            return std::vector<Tensor64>{gF, gG};
        },
        {{"F", F}, {"G", G}}, tol);
}

inline GradCheckReport gradsuite_refiner(uint64_t seed, double tol) {
    Rng rng(seed);
    RefinerT<double> ref;
    ref.init(0.5, rng);
    ref.c2.weight.value = rng.randn<double>(ref.c2.weight.value.shape, 0.2);
    Tensor64 xd = rng.randn<double>({2, 4, 4, 3}), xu = rng.randn<double>({2, 4, 4, 3});
    Tensor64 proj = rng.randn<double>({2, 4, 4, 3});
    return grad_check(
        [&](const std::vector<Tensor64>& xs) { return dot(ref.forward(xs[0], xs[1], false), proj); },
        [&](const std::vector<Tensor64>& xs) {
            ref.forward(xs[0], xs[1], true);
            auto [gd, gu] = ref.backward(proj);
            return std::vector<Tensor64>{gd, gu};
        },
        {{"x_d", xd}, {"x_u", xu}}, tol);
}

// resblock + SFA + TFA slot, the decoder block composite
inline GradCheckReport gradsuite_decoder_block(uint64_t seed, double tol) {
    Rng rng(seed);
    ResBlockT<double> res;
    res.init(4, 4, rng);
    CondSlotT<double> slot;
    TfaConfig tc;
    tc.heads = 2;
    slot.init(4, CondMode::sfa_tfa, rng, WindowSpec{2, 2}, SfaConfig{}, tc);
    slot.sfa->scale_conv.weight.value = rng.randn<double>(slot.sfa->scale_conv.weight.value.shape, 0.2);
    slot.tfa->self_out.weight.value = rng.randn<double>(slot.tfa->self_out.weight.value.shape, 0.2);
    slot.tfa->cross_out.weight.value = rng.randn<double>(slot.tfa->cross_out.weight.value.shape, 0.2);
    Tensor64 x = rng.randn<double>({2, 4, 4, 4}), g = rng.randn<double>({2, 4, 4, 4});
    Tensor64 proj = rng.randn<double>({2, 4, 4, 4});
    return grad_check(
        [&](const std::vector<Tensor64>& xs) {
            return dot(slot.forward(res.forward(xs[0], nullptr, false), &xs[1], false), proj);
        },
        [&](const std::vector<Tensor64>& xs) {
            slot.forward(res.forward(xs[0], nullptr, true), &xs[1], true);
            auto [gh, gg] = slot.backward(proj);
            return std::vector<Tensor64>{res.backward(gh), gg};
        },
        {{"x", x}, {"g", g}}, tol);
}

inline const std::map<std::string, std::vector<std::pair<std::string, GradSuiteFn>>>& grad_suites() {
    static const std::map<std::string, std::vector<std::pair<std::string, GradSuiteFn>>> suites = {
        {"core",
         {{"conv2d", gradsuite_conv2d},
          {"conv3d", gradsuite_conv3d},
          {"attention", gradsuite_attention},
          {"pixel_shuffle", gradsuite_pixel_shuffle},
          {"channel_stats", gradsuite_channel_stats},
          {"charbonnier", gradsuite_charbonnier}}},
        {"adaptation", {{"sfa", gradsuite_sfa}}},
        {"alignment", {{"tfa", gradsuite_tfa}}},
        {"networks", {{"decoder_block", gradsuite_decoder_block}, {"refiner", gradsuite_refiner}}},
    };
    return suites;
}

}  // namespace vsr
