// SPDX-License-Identifier: Apache-2.0
//
// Video upscaler: two temporal self-attention blocks over tubelets of
// short frame groups, then a tail conv to C*r^2 channels and a pixel
// shuffle. A parameter-free bicubic x4 skip carries the interpolation
// baseline so the network only has to learn residual detail.

#pragma once

#include "../core/pixel_shuffle.hpp"
#include "../data/bicubic.hpp"
#include "../tubelet.hpp"
#include "layers.hpp"
#include "mha.hpp"

namespace vsr {

struct UpscalerConfig {
    int width = 32;
    int window = 8;
    int heads = 4;
    int frame_group = 2;  // frames linked per attention tubelet
    int factor = 4;
};

template <class T>
class UpscalerT {
public:
    UpscalerConfig cfg;

    void init(const UpscalerConfig& c, Rng& rng) {
        cfg = c;
        head_.init(3, 3, cfg.width, 1, 1, rng);
        for (auto* b : {&b0_, &b1_}) {
            b->qkv.init(1, 1, cfg.width, 3 * cfg.width, 1, 0, rng);
            b->out_proj.init_zero(1, 1, cfg.width, cfg.width);
            b->ffn1.init(1, cfg.width, 2 * cfg.width, 1, 0, rng);
            b->ffn2.init_const(1, 2 * cfg.width, cfg.width, 1, 0, T(0), T(0));
        }
        tail_.init(3, cfg.width, 3 * cfg.factor * cfg.factor, 1, 1, rng);
    }

    // X_L: (L, H, W, 3) -> (L, factor*H, factor*W, 3)
    TensorT<T> forward(const TensorT<T>& x, bool cache) {
        require_rank(x, 4, "upscaler input");
        require(x.shape[3] == 3, "upscaler: expected 3 input channels, got " + shape_str(x.shape));
        TensorT<T> h = head_.forward(x, cache);
        h = block_forward(b0_, h, cache);
        h = block_forward(b1_, h, cache);
        TensorT<T> tail_out = tail_.forward(h, cache);

        const int L = x.shape[0];
        TensorT<T> shuffled;
        for (int f = 0; f < L; ++f) {
            TensorT<T> sf = pixel_shuffle(frame_of(tail_out, f), cfg.factor);
            if (f == 0) shuffled = TensorT<T>({L, sf.shape[0], sf.shape[1], sf.shape[2]});
            set_frame(shuffled, f, sf);
        }
        shuffled += bicubic_up(x, cfg.factor);
        if (cache) input_cache_.push_back(x.shape);
        return shuffled;
    }

    TensorT<T> backward(const TensorT<T>& grad_out) {
        require(!input_cache_.empty(), "upscaler: backward without cached forward");
        const std::vector<int> in_shape = input_cache_.back();
        input_cache_.pop_back();

        const int L = grad_out.shape[0];
        TensorT<T> g_tail;
        for (int f = 0; f < L; ++f) {
            TensorT<T> gf = pixel_shuffle_backward(frame_of(grad_out, f), cfg.factor);
            if (f == 0) g_tail = TensorT<T>({L, gf.shape[0], gf.shape[1], gf.shape[2]});
            set_frame(g_tail, f, gf);
        }
        TensorT<T> g = tail_.backward(g_tail);
        g = block_backward(b1_, g);
        g = block_backward(b0_, g);
        TensorT<T> grad_x = head_.backward(g);
        grad_x += bicubic_resize_adjoint(grad_out, in_shape);
        return grad_x;
    }

    void collect(ParamRefsT<T>& out, const std::string& prefix) {
        head_.collect(out, prefix + ".head");
        block_collect(b0_, out, prefix + ".block0");
        block_collect(b1_, out, prefix + ".block1");
        tail_.collect(out, prefix + ".tail");
    }

private:
    struct GroupAttn {
        TubeletBatchT<T> geom;  // zeroed tubelets, geometry only
        std::vector<TensorT<T>> Q, K, V;
        std::vector<std::vector<AttentionCache<T>>> heads;
        int f0 = 0, f1 = 0;
    };
    struct Block {
        Conv3dLayerT<T> qkv;       // width -> 3*width
        Conv3dLayerT<T> out_proj;  // width -> width, zero-initialized
        Conv2dLayerT<T> ffn1, ffn2;
        std::vector<std::vector<GroupAttn>> attn_cache;
        std::vector<TensorT<T>> ffn_pre_cache;
    };

    Conv2dLayerT<T> head_, tail_;
    Block b0_, b1_;
    std::vector<std::vector<int>> input_cache_;

    static TensorT<T> slice_frames(const TensorT<T>& x, int f0, int f1) {
        TensorT<T> out({f1 - f0, x.shape[1], x.shape[2], x.shape[3]});
        for (int f = f0; f < f1; ++f) set_frame(out, f - f0, frame_of(x, f));
        return out;
    }

    static TensorT<T> as_vol(const TensorT<T>& mat) {
        TensorT<T> v = mat;
        v.shape = {mat.shape[0], 1, 1, mat.shape[1]};
        return v;
    }
    static TensorT<T> as_mat(const TensorT<T>& vol) {
        TensorT<T> m = vol;
        m.shape = {vol.shape[0], vol.shape[3]};
        return m;
    }

    TensorT<T> block_forward(Block& b, const TensorT<T>& x, bool cache) {
        const int L = x.shape[0];
        TensorT<T> attn_out = x;
        std::vector<GroupAttn> groups;
        for (int f0 = 0; f0 < L; f0 += cfg.frame_group) {
            const int f1 = std::min(f0 + cfg.frame_group, L);
            TensorT<T> part = slice_frames(x, f0, f1);
            TubeletBatchT<T> tub = tubelet_partition(part, WindowSpec{cfg.window, cfg.window});
            GroupAttn ga;
            ga.f0 = f0;
            ga.f1 = f1;
            TubeletBatchT<T> out_tub = tub;
            for (int i = 0; i < tub.count(); ++i) {
                const TensorT<T>& tok = tub.tubelets[static_cast<size_t>(i)];
                TensorT<T> qkv_out = as_mat(b.qkv.forward(as_vol(tok), cache));
                TensorT<T> Q, K, V;
                mat_split3(qkv_out, Q, K, V);
                std::vector<AttentionCache<T>> hc;
                TensorT<T> A = mha(Q, K, V, cfg.heads, cache ? &hc : nullptr);
                TensorT<T> P = as_mat(b.out_proj.forward(as_vol(A), cache));
                out_tub.tubelets[static_cast<size_t>(i)] = add(tok, P);
                if (cache) {
                    ga.Q.push_back(std::move(Q));
                    ga.K.push_back(std::move(K));
                    ga.V.push_back(std::move(V));
                    ga.heads.push_back(std::move(hc));
                }
            }
            TensorT<T> merged = tubelet_merge(out_tub);
            for (int f = f0; f < f1; ++f) set_frame(attn_out, f, frame_of(merged, f - f0));
            if (cache) {
                for (auto& t : tub.tubelets) t.zero();
                ga.geom = std::move(tub);
                groups.push_back(std::move(ga));
            }
        }
        if (cache) b.attn_cache.push_back(std::move(groups));

        TensorT<T> pre = b.ffn1.forward(attn_out, cache);
        TensorT<T> post = b.ffn2.forward(gelu(pre), cache);
        if (cache) b.ffn_pre_cache.push_back(pre);
        TensorT<T> out = attn_out;
        out += post;
        return out;
    }

    TensorT<T> block_backward(Block& b, const TensorT<T>& grad_out) {
        require(!b.ffn_pre_cache.empty(), "upscaler block: backward without cached forward");
        TensorT<T> pre = std::move(b.ffn_pre_cache.back());
        b.ffn_pre_cache.pop_back();
        TensorT<T> g_post = b.ffn2.backward(grad_out);
        TensorT<T> g_attn = b.ffn1.backward(gelu_backward(g_post, pre));
        g_attn += grad_out;  // FFN residual

        std::vector<GroupAttn> groups = std::move(b.attn_cache.back());
        b.attn_cache.pop_back();
        TensorT<T> grad_x = g_attn;
        for (int gi = static_cast<int>(groups.size()) - 1; gi >= 0; --gi) {
            GroupAttn& ga = groups[static_cast<size_t>(gi)];
            TensorT<T> g_part = slice_frames(g_attn, ga.f0, ga.f1);
            TubeletBatchT<T> g_tub = tubelet_merge_adjoint(g_part, ga.geom);
            TubeletBatchT<T> g_in = ga.geom;
            for (int i = g_tub.count() - 1; i >= 0; --i) {
                const TensorT<T>& g = g_tub.tubelets[static_cast<size_t>(i)];
                TensorT<T> gA = as_mat(b.out_proj.backward(as_vol(g)));
                TensorT<T> dQ, dK, dV;
                mha_backward(gA, ga.Q[static_cast<size_t>(i)], ga.K[static_cast<size_t>(i)],
                             ga.V[static_cast<size_t>(i)], cfg.heads, ga.heads[static_cast<size_t>(i)], dQ, dK, dV);
                TensorT<T> dqkv = mat_join<T>({&dQ, &dK, &dV});
                TensorT<T> dtok = as_mat(b.qkv.backward(as_vol(dqkv)));
                dtok += g;  // attention residual
                g_in.tubelets[static_cast<size_t>(i)] = std::move(dtok);
            }
            TensorT<T> g_frames = tubelet_partition_adjoint(g_in);
            for (int f = ga.f0; f < ga.f1; ++f) set_frame(grad_x, f, frame_of(g_frames, f - ga.f0));
        }
        return grad_x;
    }

    void block_collect(Block& b, ParamRefsT<T>& out, const std::string& prefix) {
        b.qkv.collect(out, prefix + ".qkv");
        b.out_proj.collect(out, prefix + ".out");
        b.ffn1.collect(out, prefix + ".ffn1");
        b.ffn2.collect(out, prefix + ".ffn2");
    }
};

}  // namespace vsr
