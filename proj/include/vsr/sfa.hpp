// SPDX-License-Identifier: Apache-2.0
//
// Spatial feature adaptation: two 3x3 convolutions predict a per-pixel
// scale S and bias M from a guidance map g, and the feature map f is
// normalized (per frame, per channel, over spatial positions) then
// modulated:  out = S * (f - mu)/sigma + M.
//
// Freshly initialized (scale conv = 0 weights / bias 1, bias conv = all
// zero) the module is exactly the plain normalizer, for any guidance, so
// inserting it into a pretrained block is non-destructive.

#pragma once

#include <utility>
#include <vector>

#include "core/stats.hpp"
#include "nets/layers.hpp"

namespace vsr {

struct SfaConfig {
    int kernel = 3;
    bool per_channel_stats = true;  // false: whole-map scalar mu/sigma
};

template <class T>
class SfaT {
public:
    Conv2dLayerT<T> scale_conv, bias_conv;
    SfaConfig cfg;

    void init(int channels, SfaConfig c = {}) {
        cfg = c;
        const int pad = (cfg.kernel - 1) / 2;
        scale_conv.init_const(cfg.kernel, channels, channels, 1, pad, T(0), T(1));
        bias_conv.init_const(cfg.kernel, channels, channels, 1, pad, T(0), T(0));
    }

    int channels() const { return scale_conv.out_channels(); }

    // (S, M) affine fields from guidance, frames handled jointly.
    std::pair<TensorT<T>, TensorT<T>> affine(const TensorT<T>& G, bool cache) {
        require_rank(G, 4, "sfa affine guidance");
        require(G.shape[3] == channels(), "sfa affine: guidance channels " + shape_str(G.shape) +
                                              " do not match module channels " + std::to_string(channels()));
        return {scale_conv.forward(G, cache), bias_conv.forward(G, cache)};
    }

    // F, G: (L, H, W, C) with identical shapes. Frames are independent.
    TensorT<T> forward(const TensorT<T>& F, const TensorT<T>& G, bool cache) {
        require_rank(F, 4, "sfa forward features");
        require(F.same_shape(G),
                "sfa forward: feature/guidance shape mismatch " + shape_str(F.shape) + " vs " + shape_str(G.shape));
        auto [S, M] = affine(G, cache);

        const int L = F.shape[0];
        TensorT<T> out(F.shape);
        std::vector<NormalizeCache<T>> norms(static_cast<size_t>(L));
        for (int f = 0; f < L; ++f) {
            TensorT<T> n = normalize_spatial(frame_of(F, f), &norms[f], cfg.per_channel_stats);
            set_frame(out, f, n);
        }
        for (long long i = 0; i < out.numel(); ++i) out[i] = S[i] * out[i] + M[i];
        if (cache) cache_.push_back(CacheEntry{std::move(S), std::move(norms)});
        return out;
    }

    // Returns (grad_F, grad_G).
    std::pair<TensorT<T>, TensorT<T>> backward(const TensorT<T>& grad_out) {
        require(!cache_.empty(), "sfa: backward without cached forward");
        CacheEntry entry = std::move(cache_.back());
        cache_.pop_back();
        const TensorT<T>& S = entry.S;
        const int L = grad_out.shape[0];

        TensorT<T> grad_S(grad_out.shape), grad_norm(grad_out.shape);
        for (long long i = 0; i < grad_out.numel(); ++i) {
            const long long f = i / (grad_out.numel() / L);
            const auto& norm = entry.norms[static_cast<size_t>(f)].normalized;
            const long long j = i % norm.numel();
            grad_S[i] = grad_out[i] * norm[j];
            grad_norm[i] = grad_out[i] * S[i];
        }

        TensorT<T> grad_F(grad_out.shape);
        for (int f = 0; f < L; ++f) {
            TensorT<T> gf = normalize_spatial_backward(frame_of(grad_norm, f), entry.norms[static_cast<size_t>(f)]);
            set_frame(grad_F, f, gf);
        }
        TensorT<T> grad_G = bias_conv.backward(grad_out);  // dM = grad_out
        grad_G += scale_conv.backward(grad_S);
        return {std::move(grad_F), std::move(grad_G)};
    }

    void collect(ParamRefsT<T>& out, const std::string& prefix) {
        scale_conv.collect(out, prefix + ".scale");
        bias_conv.collect(out, prefix + ".bias");
    }

private:
    struct CacheEntry {
        TensorT<T> S;
        std::vector<NormalizeCache<T>> norms;
    };
    std::vector<CacheEntry> cache_;
};

using Sfa = SfaT<float>;

}  // namespace vsr
