// SPDX-License-Identifier: Apache-2.0
//
// Two-level epsilon-prediction UNet over video latents. Each decoder
// block is a resblock followed by a conditioning slot; skip connections
// concatenate encoder activations; the timestep enters through a
// sinusoidal embedding and per-resblock projections.

#pragma once

#include "blocks.hpp"
#include "layers.hpp"

namespace vsr {

struct UnetConfig {
    int latent_channels = 4;
    int base = 32;
    int temb_dim = 64;
    int T = 1000;
};

template <class T>
class UnetT {
public:
    UnetConfig cfg;
    static constexpr int kLevels = 2;  // guidance level order: [0] half res, [1] latent res

    // Backbone and conditioning slots draw from separate streams so the
    // backbone initialization does not depend on the slot wiring.
    void init(const UnetConfig& c, CondMode mode, Rng& rng, Rng& slot_rng, WindowSpec window, SfaConfig sfa_cfg = {},
              TfaConfig tfa_cfg = {}) {
        cfg = c;
        mode_ = mode;
        const int w = cfg.base;
        fc1_.init(cfg.temb_dim, cfg.temb_dim, rng);
        fc2_.init(cfg.temb_dim, cfg.temb_dim, rng);
        conv_in_.init(3, cfg.latent_channels, w, 1, 1, rng);
        enc0_.init(w, w, rng, cfg.temb_dim);
        down_.init(3, w, 2 * w, 2, 1, rng);
        enc1_.init(2 * w, 2 * w, rng, cfg.temb_dim);
        mid_.init(2 * w, 2 * w, rng, cfg.temb_dim);
        dec1_res_.init(4 * w, 2 * w, rng, cfg.temb_dim);
        dec1_slot_.init(2 * w, mode, slot_rng, window, sfa_cfg, tfa_cfg);
        up_.init(3, 2 * w, w, 1, 1, rng);
        dec0_res_.init(2 * w, w, rng, cfg.temb_dim);
        dec0_slot_.init(w, mode, slot_rng, window, sfa_cfg, tfa_cfg);
        conv_out_.init(3, w, cfg.latent_channels, 1, 1, rng);
    }

    CondMode mode() const { return mode_; }

    int guidance_channels(int level) const { return level == 0 ? 2 * cfg.base : cfg.base; }

    // z_t: (L, Hl, Wl, Cz). guidance: [0] (L, Hl/2, Wl/2, 2*base), [1] (L, Hl, Wl, base).
    TensorT<T> forward(const TensorT<T>& z_t, int t, const std::vector<TensorT<T>>& guidance, bool cache) {
        require_rank(z_t, 4, "unet input");
        require(t >= 1 && t <= cfg.T, "unet: timestep " + std::to_string(t) + " outside [1, " + std::to_string(cfg.T) + "]");
        require(z_t.shape[1] % 2 == 0 && z_t.shape[2] % 2 == 0,
                "unet: latent spatial dims must be even, got " + shape_str(z_t.shape));
        const bool wants_g = dec1_slot_.wants_guidance();
        if (wants_g) {
            require(guidance.size() == kLevels, "unet: expected " + std::to_string(kLevels) + " guidance levels, got " +
                                                    std::to_string(guidance.size()));
            const int L = z_t.shape[0], Hl = z_t.shape[1], Wl = z_t.shape[2];
            const int eh[kLevels] = {Hl / 2, Hl}, ew[kLevels] = {Wl / 2, Wl};
            for (int lv = 0; lv < kLevels; ++lv) {
                const auto& g = guidance[static_cast<size_t>(lv)];
                require(g.rank() == 4 && g.shape[0] == L && g.shape[1] == eh[lv] && g.shape[2] == ew[lv] &&
                            g.shape[3] == guidance_channels(lv),
                        "unet: guidance level " + std::to_string(lv) + " shape " + shape_str(g.shape) +
                            " does not match decoder block");
            }
        }
        const TensorT<T>* g1 = wants_g ? &guidance[0] : nullptr;
        const TensorT<T>* g0 = wants_g ? &guidance[1] : nullptr;

        TensorT<T> temb0 = timestep_embedding<T>(t, cfg.temb_dim);
        TensorT<T> u = fc1_.forward(temb0, cache);
        TensorT<T> temb = fc2_.forward(gelu(u), cache);

        TensorT<T> h_in = conv_in_.forward(z_t, cache);
        TensorT<T> e0 = enc0_.forward(h_in, &temb, cache);
        TensorT<T> d = down_.forward(e0, cache);
        TensorT<T> e1 = enc1_.forward(d, &temb, cache);
        TensorT<T> m = mid_.forward(e1, &temb, cache);

        TensorT<T> r1 = dec1_res_.forward(concat_channels(m, e1), &temb, cache);
        TensorT<T> s1 = dec1_slot_.forward(r1, g1, cache);
        TensorT<T> u1 = up_.forward(nearest_up2(s1), cache);
        TensorT<T> r0 = dec0_res_.forward(concat_channels(u1, e0), &temb, cache);
        TensorT<T> s0 = dec0_slot_.forward(r0, g0, cache);
        TensorT<T> eps = conv_out_.forward(s0, cache);
        if (cache) temb_pre_cache_.push_back(std::move(u));
        return eps;
    }

    // Returns (grad_z, grad_guidance).
    std::pair<TensorT<T>, std::vector<TensorT<T>>> backward(const TensorT<T>& grad_eps) {
        require(!temb_pre_cache_.empty(), "unet: backward without cached forward");
        TensorT<T> u = std::move(temb_pre_cache_.back());
        temb_pre_cache_.pop_back();

        std::vector<TensorT<T>> grad_g(kLevels);
        TensorT<T> g_temb({cfg.temb_dim});

        TensorT<T> g = conv_out_.backward(grad_eps);
        auto [g_r0, gg0] = dec0_slot_.backward(g);
        grad_g[1] = std::move(gg0);
        TensorT<T> g_c0 = dec0_res_.backward(g_r0, &g_temb);
        TensorT<T> g_u1, g_e0_skip;
        split_channels(g_c0, g_u1, g_e0_skip, cfg.base);
        TensorT<T> g_s1 = nearest_up2_backward(up_.backward(g_u1));
        auto [g_r1, gg1] = dec1_slot_.backward(g_s1);
        grad_g[0] = std::move(gg1);
        TensorT<T> g_c1 = dec1_res_.backward(g_r1, &g_temb);
        TensorT<T> g_m, g_e1_skip;
        split_channels(g_c1, g_m, g_e1_skip, 2 * cfg.base);
        TensorT<T> g_e1 = mid_.backward(g_m, &g_temb);
        g_e1 += g_e1_skip;
        TensorT<T> g_d = enc1_.backward(g_e1, &g_temb);
        TensorT<T> g_e0 = down_.backward(g_d);
        g_e0 += g_e0_skip;
        TensorT<T> g_hin = enc0_.backward(g_e0, &g_temb);
        TensorT<T> grad_z = conv_in_.backward(g_hin);

        TensorT<T> g_u = fc2_.backward(g_temb);
        fc1_.backward(gelu_backward(g_u, u));
        return {std::move(grad_z), std::move(grad_g)};
    }

    void collect_backbone(ParamRefsT<T>& out, const std::string& prefix) {
        fc1_.collect(out, prefix + ".temb1");
        fc2_.collect(out, prefix + ".temb2");
        conv_in_.collect(out, prefix + ".conv_in");
        enc0_.collect(out, prefix + ".enc0");
        down_.collect(out, prefix + ".down");
        enc1_.collect(out, prefix + ".enc1");
        mid_.collect(out, prefix + ".mid");
        dec1_res_.collect(out, prefix + ".dec1");
        up_.collect(out, prefix + ".up");
        dec0_res_.collect(out, prefix + ".dec0");
        conv_out_.collect(out, prefix + ".conv_out");
    }
    void collect_adapters(ParamRefsT<T>& out, const std::string& prefix) {
        dec1_slot_.collect(out, prefix + ".slot1");
        dec0_slot_.collect(out, prefix + ".slot0");
    }

private:
    CondMode mode_ = CondMode::plain;
    LinearT<T> fc1_, fc2_;
    Conv2dLayerT<T> conv_in_, down_, up_, conv_out_;
    ResBlockT<T> enc0_, enc1_, mid_, dec1_res_, dec0_res_;
    CondSlotT<T> dec1_slot_, dec0_slot_;
    std::vector<TensorT<T>> temb_pre_cache_;
};

}  // namespace vsr
