// SPDX-License-Identifier: Apache-2.0
//
// Deterministic toy autoencoder. The encoder is a strided conv stack
// (x4 spatial reduction, 4 latent channels); the decoder mirrors it and
// hosts one conditioning slot per block. Multi-scale encoder activations
// are returned alongside the latent code.

#pragma once

#include "blocks.hpp"
#include "layers.hpp"

namespace vsr {

struct VaeConfig {
    int latent_channels = 4;
    int c0 = 16, c1 = 32, c2 = 64;  // widths at full / half / quarter resolution
};

template <class T>
struct VaeEncodeResultT {
    TensorT<T> latent;                // (L, H/4, W/4, Cz)
    std::vector<TensorT<T>> features; // per-level activations, coarse-to-fine unused by default
};

template <class T>
class VaeEncoderT {
public:
    VaeConfig cfg;

    void init(const VaeConfig& c, Rng& rng) {
        cfg = c;
        c0_.init(3, 3, cfg.c0, 1, 1, rng);
        c1_.init(3, cfg.c0, cfg.c1, 2, 1, rng);
        c2_.init(3, cfg.c1, cfg.c2, 2, 1, rng);
        to_latent_.init(3, cfg.c2, cfg.latent_channels, 1, 1, rng);
    }

    VaeEncodeResultT<T> forward(const TensorT<T>& x, bool cache) {
        require_rank(x, 4, "vae encode input");
        require(x.shape[1] % 4 == 0 && x.shape[2] % 4 == 0,
                "vae encode: spatial dims must be divisible by 4, got " + shape_str(x.shape));
        VaeEncodeResultT<T> out;
        TensorT<T> p0 = c0_.forward(x, cache);
        TensorT<T> a0 = gelu(p0);
        TensorT<T> p1 = c1_.forward(a0, cache);
        TensorT<T> a1 = gelu(p1);
        TensorT<T> p2 = c2_.forward(a1, cache);
        TensorT<T> a2 = gelu(p2);
        out.latent = to_latent_.forward(a2, cache);
        out.features = {a0, a1, a2};
        if (cache) pre_cache_.push_back({std::move(p0), std::move(p1), std::move(p2)});
        return out;
    }

    TensorT<T> backward(const TensorT<T>& grad_latent) {
        require(!pre_cache_.empty(), "vae encoder: backward without cached forward");
        auto pres = std::move(pre_cache_.back());
        pre_cache_.pop_back();
        TensorT<T> g = to_latent_.backward(grad_latent);
        g = c2_.backward(gelu_backward(g, pres[2]));
        g = c1_.backward(gelu_backward(g, pres[1]));
        g = c0_.backward(gelu_backward(g, pres[0]));
        return g;
    }

    void collect(ParamRefsT<T>& out, const std::string& prefix) {
        c0_.collect(out, prefix + ".c0");
        c1_.collect(out, prefix + ".c1");
        c2_.collect(out, prefix + ".c2");
        to_latent_.collect(out, prefix + ".to_latent");
    }

private:
    Conv2dLayerT<T> c0_, c1_, c2_, to_latent_;
    std::vector<std::array<TensorT<T>, 3>> pre_cache_;
};

template <class T>
class VaeDecoderT {
public:
    VaeConfig cfg;

    // Guidance levels in consumption order: [0] at latent res (c2 chans),
    // [1] at 2x latent (c1), [2] at 4x latent (c0).
    static constexpr int kLevels = 3;

    // Backbone and conditioning slots draw from separate streams so the
    // backbone initialization does not depend on the slot wiring.
    void init(const VaeConfig& c, CondMode mode, Rng& rng, Rng& slot_rng, WindowSpec window, SfaConfig sfa_cfg = {},
              TfaConfig tfa_cfg = {}) {
        cfg = c;
        conv_in_.init(3, cfg.latent_channels, cfg.c2, 1, 1, rng);
        r2_.init(cfg.c2, cfg.c2, rng);
        s2_.init(cfg.c2, mode, slot_rng, window, sfa_cfg, tfa_cfg);
        up1_.init(3, cfg.c2, cfg.c1, 1, 1, rng);
        r1_.init(cfg.c1, cfg.c1, rng);
        s1_.init(cfg.c1, mode, slot_rng, window, sfa_cfg, tfa_cfg);
        up0_.init(3, cfg.c1, cfg.c0, 1, 1, rng);
        r0_.init(cfg.c0, cfg.c0, rng);
        s0_.init(cfg.c0, mode, slot_rng, window, sfa_cfg, tfa_cfg);
        conv_out_.init(3, cfg.c0, 3, 1, 1, rng);
        mode_ = mode;
    }

    CondMode mode() const { return mode_; }

    int guidance_channels(int level) const {
        switch (level) {
            case 0: return cfg.c2;
            case 1: return cfg.c1;
            case 2: return cfg.c0;
        }
        throw std::invalid_argument("vae decoder: bad guidance level");
    }

    TensorT<T> forward(const TensorT<T>& z, const std::vector<TensorT<T>>& guidance, bool cache) {
        require_rank(z, 4, "vae decode input");
        const bool wants_g = s2_.wants_guidance();
        if (wants_g) {
            require(guidance.size() == kLevels, "vae decode: expected " + std::to_string(kLevels) +
                                                    " guidance levels, got " + std::to_string(guidance.size()));
            const int L = z.shape[0], Hl = z.shape[1], Wl = z.shape[2];
            const int expect_h[kLevels] = {Hl, 2 * Hl, 4 * Hl};
            const int expect_w[kLevels] = {Wl, 2 * Wl, 4 * Wl};
            for (int lv = 0; lv < kLevels; ++lv) {
                const auto& g = guidance[static_cast<size_t>(lv)];
                require(g.rank() == 4 && g.shape[0] == L && g.shape[1] == expect_h[lv] &&
                            g.shape[2] == expect_w[lv] && g.shape[3] == guidance_channels(lv),
                        "vae decode: guidance level " + std::to_string(lv) + " shape " + shape_str(g.shape) +
                            " does not match decoder block");
            }
        }
        const TensorT<T>* g2 = wants_g ? &guidance[0] : nullptr;
        const TensorT<T>* g1 = wants_g ? &guidance[1] : nullptr;
        const TensorT<T>* g0 = wants_g ? &guidance[2] : nullptr;

        TensorT<T> h = conv_in_.forward(z, cache);
        h = s2_.forward(r2_.forward(h, nullptr, cache), g2, cache);
        h = up1_.forward(nearest_up2(h), cache);
        h = s1_.forward(r1_.forward(h, nullptr, cache), g1, cache);
        h = up0_.forward(nearest_up2(h), cache);
        h = s0_.forward(r0_.forward(h, nullptr, cache), g0, cache);
        return conv_out_.forward(h, cache);
    }

    // Returns (grad_z, grad_guidance[3]).
    std::pair<TensorT<T>, std::vector<TensorT<T>>> backward(const TensorT<T>& grad_out) {
        std::vector<TensorT<T>> grad_g(kLevels);
        TensorT<T> g = conv_out_.backward(grad_out);
        auto [g_r0, gg0] = s0_.backward(g);
        grad_g[2] = std::move(gg0);
        g = r0_.backward(g_r0);
        g = nearest_up2_backward(up0_.backward(g));
        auto [g_r1, gg1] = s1_.backward(g);
        grad_g[1] = std::move(gg1);
        g = r1_.backward(g_r1);
        g = nearest_up2_backward(up1_.backward(g));
        auto [g_r2, gg2] = s2_.backward(g);
        grad_g[0] = std::move(gg2);
        g = r2_.backward(g_r2);
        return {conv_in_.backward(g), std::move(grad_g)};
    }

    void collect_backbone(ParamRefsT<T>& out, const std::string& prefix) {
        conv_in_.collect(out, prefix + ".conv_in");
        r2_.collect(out, prefix + ".r2");
        up1_.collect(out, prefix + ".up1");
        r1_.collect(out, prefix + ".r1");
        up0_.collect(out, prefix + ".up0");
        r0_.collect(out, prefix + ".r0");
        conv_out_.collect(out, prefix + ".conv_out");
    }
    void collect_adapters(ParamRefsT<T>& out, const std::string& prefix) {
        s2_.collect(out, prefix + ".slot2");
        s1_.collect(out, prefix + ".slot1");
        s0_.collect(out, prefix + ".slot0");
    }

private:
    Conv2dLayerT<T> conv_in_, up1_, up0_, conv_out_;
    ResBlockT<T> r2_, r1_, r0_;
    CondSlotT<T> s2_, s1_, s0_;
    CondMode mode_ = CondMode::plain;
};

}  // namespace vsr
