// SPDX-License-Identifier: Apache-2.0
//
// Guidance extraction for the conditioning slots.
//
// UNet-side guidance: a conv pyramid over the LR latent code (stem shared,
// per-level projection heads), one map per UNet decoder level.
// VAE-side guidance: per-level projections of the VAE encoder features of
// the up-sampled LR video, one map per VAE decoder level - the pixel-space
// decoder is steered by the encoder's multi-scale features, not by
// upsampled latents.
//
// The stem forms the latent-encoder parameter group; the projection heads
// register with the adapter group they feed, since they exist solely to
// serve those conditioning slots.

#pragma once

#include "layers.hpp"
#include "vae.hpp"

namespace vsr {

template <class T>
struct GuidanceMapsT {
    std::vector<TensorT<T>> unet;  // [0] at half latent res, [1] at latent res
    std::vector<TensorT<T>> vae;   // [0] latent res, [1] 2x, [2] 4x
};

using GuidanceMaps = GuidanceMapsT<float>;

template <class T>
class LatentEncoderT {
public:
    struct Config {
        int latent_channels = 4;
        int width = 32;
        int unet_c1 = 64, unet_c0 = 32;            // UNet decoder channels, deep to shallow
        int vae_c2 = 64, vae_c1 = 32, vae_c0 = 16;  // VAE decoder channels, deep to shallow
        int enc_c2 = 64, enc_c1 = 32, enc_c0 = 16;  // VAE encoder feature channels, deep to shallow
    };

    void init(const Config& c, Rng& rng) {
        cfg_ = c;
        stem1_.init(3, c.latent_channels, c.width, 1, 1, rng);
        stem2_.init(3, c.width, c.width, 1, 1, rng);
        down_.init(3, c.width, c.width, 2, 1, rng);
        head_unet1_.init(3, c.width, c.unet_c1, 1, 1, rng);
        head_unet0_.init(3, c.width, c.unet_c0, 1, 1, rng);
        head_vae2_.init(3, c.enc_c2, c.vae_c2, 1, 1, rng);
        head_vae1_.init(3, c.enc_c1, c.vae_c1, 1, 1, rng);
        head_vae0_.init(3, c.enc_c0, c.vae_c0, 1, 1, rng);
    }

    // z: LR latent code. enc_feats: VAE encoder features of the up-sampled
    // video, fine-to-coarse as returned by the encoder ([0] full res, [1]
    // half, [2] quarter). Required when need_vae.
    GuidanceMapsT<T> forward(const TensorT<T>& z, const std::vector<TensorT<T>>* enc_feats, bool cache,
                             bool need_unet = true, bool need_vae = true) {
        require_rank(z, 4, "latent encoder input");
        require(z.shape[3] == cfg_.latent_channels, "latent encoder: latent channels mismatch " + shape_str(z.shape));
        CacheEntry ce;
        ce.need_unet = need_unet;
        ce.need_vae = need_vae;

        GuidanceMapsT<T> out;
        if (need_unet) {
            TensorT<T> b = stem1_.forward(z, cache);
            TensorT<T> base = stem2_.forward(gelu(b), cache);
            TensorT<T> pb = gelu(base);
            TensorT<T> pd = down_.forward(pb, cache);
            out.unet.push_back(head_unet1_.forward(pd, cache));
            out.unet.push_back(head_unet0_.forward(pb, cache));
            if (cache) {
                ce.b = std::move(b);
                ce.base = std::move(base);
            }
        }
        if (need_vae) {
            require(enc_feats != nullptr && enc_feats->size() == 3,
                    "latent encoder: VAE-side guidance needs the 3 encoder feature levels");
            out.vae.push_back(head_vae2_.forward((*enc_feats)[2], cache));
            out.vae.push_back(head_vae1_.forward((*enc_feats)[1], cache));
            out.vae.push_back(head_vae0_.forward((*enc_feats)[0], cache));
        }
        if (cache) cache_.push_back(std::move(ce));
        return out;
    }

    // Returns grad wrt z (the encoder-feature grads are computed into the
    // head caches and discarded; the encoder is frozen whenever the heads
    // train).
    TensorT<T> backward(const GuidanceMapsT<T>& grad_maps) {
        require(!cache_.empty(), "latent encoder: backward without cached forward");
        CacheEntry ce = std::move(cache_.back());
        cache_.pop_back();

        if (ce.need_vae) {
            require(grad_maps.vae.size() == 3, "latent encoder backward: need 3 vae-level grads");
            head_vae0_.backward(grad_maps.vae[2]);
            head_vae1_.backward(grad_maps.vae[1]);
            head_vae2_.backward(grad_maps.vae[0]);
        }
        if (!ce.need_unet) return TensorT<T>();
        require(grad_maps.unet.size() == 2, "latent encoder backward: need 2 unet-level grads");
        TensorT<T> g_pb = down_.backward(head_unet1_.backward(grad_maps.unet[0]));
        g_pb += head_unet0_.backward(grad_maps.unet[1]);
        TensorT<T> g_base = gelu_backward(g_pb, ce.base);
        TensorT<T> g = stem2_.backward(g_base);
        return stem1_.backward(gelu_backward(g, ce.b));
    }

    void collect(ParamRefsT<T>& out, const std::string& stem_prefix, const std::string& unet_adapt_prefix,
                 const std::string& vae_adapt_prefix) {
        stem1_.collect(out, stem_prefix + ".stem1");
        stem2_.collect(out, stem_prefix + ".stem2");
        down_.collect(out, stem_prefix + ".down");
        head_unet1_.collect(out, unet_adapt_prefix + ".gproj1");
        head_unet0_.collect(out, unet_adapt_prefix + ".gproj0");
        head_vae2_.collect(out, vae_adapt_prefix + ".gproj2");
        head_vae1_.collect(out, vae_adapt_prefix + ".gproj1");
        head_vae0_.collect(out, vae_adapt_prefix + ".gproj0");
    }

private:
    struct CacheEntry {
        TensorT<T> b, base;
        bool need_unet = true, need_vae = true;
    };
    Config cfg_;
    Conv2dLayerT<T> stem1_, stem2_, down_;
    Conv2dLayerT<T> head_unet1_, head_unet0_, head_vae2_, head_vae1_, head_vae0_;
    std::vector<CacheEntry> cache_;
};

}  // namespace vsr
