// SPDX-License-Identifier: Apache-2.0
//
// Temporal feature alignment over tubelets. Stage one runs multi-head
// self-attention over the L*h*w tokens of each feature tubelet; stage two
// cross-attends the result against the matching guidance tubelet (queries
// from features, keys/values from guidance). All projections are pointwise
// 3D convolutions; both stages carry residual connections and
// zero-initialized output projections so a fresh module is an exact
// identity.

#pragma once

#include <utility>
#include <vector>

#include "nets/layers.hpp"
#include "nets/mha.hpp"
#include "tubelet.hpp"

namespace vsr {

struct TfaConfig {
    int heads = 4;
    bool residual = true;
    bool out_proj = true;
};

template <class T>
class TfaT {
public:
    Conv3dLayerT<T> qkv;        // C -> 3C
    Conv3dLayerT<T> self_out;   // C -> C, zero-initialized
    Conv3dLayerT<T> q_proj;     // C -> C
    Conv3dLayerT<T> kv_proj;    // C -> 2C
    Conv3dLayerT<T> cross_out;  // C -> C, zero-initialized
    TfaConfig cfg;

    void init(int channels, Rng& rng, TfaConfig c = {}) {
        cfg = c;
        require(channels % cfg.heads == 0, "tfa: heads " + std::to_string(cfg.heads) + " must divide channels " +
                                               std::to_string(channels));
        qkv.init(1, 1, channels, 3 * channels, 1, 0, rng);
        q_proj.init(1, 1, channels, channels, 1, 0, rng);
        kv_proj.init(1, 1, channels, 2 * channels, 1, 0, rng);
        self_out.init_zero(1, 1, channels, channels);
        cross_out.init_zero(1, 1, channels, channels);
        channels_ = channels;
    }

    int channels() const { return channels_; }

    // Self-attention within each tubelet.
    TubeletBatchT<T> self_stage(const TubeletBatchT<T>& F_tub, bool cache) {
        StageCache sc;
        TubeletBatchT<T> out = F_tub;
        for (int i = 0; i < F_tub.count(); ++i) {
            const TensorT<T>& x = F_tub.tubelets[static_cast<size_t>(i)];
            TensorT<T> qkv_out = as_mat(qkv.forward(as_vol(x), cache));
            TubeletAttn ta;
            mat_split3(qkv_out, ta.Q, ta.K, ta.V);
            TensorT<T> A = mha(ta.Q, ta.K, ta.V, cfg.heads, cache ? &ta.heads : nullptr);
            TensorT<T> P = cfg.out_proj ? as_mat(self_out.forward(as_vol(A), cache)) : A;
            out.tubelets[static_cast<size_t>(i)] = cfg.residual ? add(x, P) : P;
            if (cache) sc.per_tubelet.push_back(std::move(ta));
        }
        if (cache) self_cache_.push_back(std::move(sc));
        return out;
    }

    TubeletBatchT<T> self_backward(const TubeletBatchT<T>& grad_out) {
        require(!self_cache_.empty(), "tfa self: backward without cached forward");
        StageCache sc = std::move(self_cache_.back());
        self_cache_.pop_back();
        TubeletBatchT<T> grad_x = grad_out;
        for (int i = grad_out.count() - 1; i >= 0; --i) {
            const TensorT<T>& g = grad_out.tubelets[static_cast<size_t>(i)];
            TubeletAttn& ta = sc.per_tubelet[static_cast<size_t>(i)];
            TensorT<T> gA = cfg.out_proj ? as_mat(self_out.backward(as_vol(g))) : g;
            TensorT<T> dQ, dK, dV;
            mha_backward(gA, ta.Q, ta.K, ta.V, cfg.heads, ta.heads, dQ, dK, dV);
            TensorT<T> dqkv = mat_join<T>({&dQ, &dK, &dV});
            TensorT<T> dx = as_mat(qkv.backward(as_vol(dqkv)));
            if (cfg.residual) dx += g;
            grad_x.tubelets[static_cast<size_t>(i)] = std::move(dx);
        }
        return grad_x;
    }

    // Cross-attention: queries from the (already self-attended) feature
    // tubelets, keys/values from the guidance tubelets.
    TubeletBatchT<T> cross_stage(const TubeletBatchT<T>& F_hat, const TubeletBatchT<T>& G_tub, bool cache) {
        require(F_hat.count() == G_tub.count() && F_hat.source_shape == G_tub.source_shape &&
                    F_hat.spec.h == G_tub.spec.h && F_hat.spec.w == G_tub.spec.w,
                "tfa cross: feature/guidance tubelet geometry mismatch");
        StageCache sc;
        TubeletBatchT<T> out = F_hat;
        for (int i = 0; i < F_hat.count(); ++i) {
            const TensorT<T>& x = F_hat.tubelets[static_cast<size_t>(i)];
            const TensorT<T>& g = G_tub.tubelets[static_cast<size_t>(i)];
            TubeletAttn ta;
            ta.Q = as_mat(q_proj.forward(as_vol(x), cache));
            TensorT<T> kv_out = as_mat(kv_proj.forward(as_vol(g), cache));
            mat_split2(kv_out, ta.K, ta.V);
            TensorT<T> A = mha(ta.Q, ta.K, ta.V, cfg.heads, cache ? &ta.heads : nullptr);
            TensorT<T> P = cfg.out_proj ? as_mat(cross_out.forward(as_vol(A), cache)) : A;
            out.tubelets[static_cast<size_t>(i)] = cfg.residual ? add(x, P) : P;
            if (cache) sc.per_tubelet.push_back(std::move(ta));
        }
        if (cache) cross_cache_.push_back(std::move(sc));
        return out;
    }

    // Returns grad wrt F_hat; accumulates grad wrt G tubelets into grad_G.
    TubeletBatchT<T> cross_backward(const TubeletBatchT<T>& grad_out, TubeletBatchT<T>& grad_G) {
        require(!cross_cache_.empty(), "tfa cross: backward without cached forward");
        StageCache sc = std::move(cross_cache_.back());
        cross_cache_.pop_back();
        TubeletBatchT<T> grad_x = grad_out;
        for (int i = grad_out.count() - 1; i >= 0; --i) {
            const TensorT<T>& g = grad_out.tubelets[static_cast<size_t>(i)];
            TubeletAttn& ta = sc.per_tubelet[static_cast<size_t>(i)];
            TensorT<T> gA = cfg.out_proj ? as_mat(cross_out.backward(as_vol(g))) : g;
            TensorT<T> dQ, dK, dV;
            mha_backward(gA, ta.Q, ta.K, ta.V, cfg.heads, ta.heads, dQ, dK, dV);
            TensorT<T> dkv = mat_join<T>({&dK, &dV});
            grad_G.tubelets[static_cast<size_t>(i)] += as_mat(kv_proj.backward(as_vol(dkv)));
            TensorT<T> dx = as_mat(q_proj.backward(as_vol(dQ)));
            if (cfg.residual) dx += g;
            grad_x.tubelets[static_cast<size_t>(i)] = std::move(dx);
        }
        return grad_x;
    }

    // Full module: partition -> self -> cross -> merge.
    TensorT<T> forward(const TensorT<T>& F, const TensorT<T>& G, WindowSpec spec, bool cache) {
        require(F.same_shape(G),
                "tfa forward: feature/guidance shape mismatch " + shape_str(F.shape) + " vs " + shape_str(G.shape));
        TubeletBatchT<T> F_tub = tubelet_partition(F, spec);
        TubeletBatchT<T> G_tub = tubelet_partition(G, spec);
        TubeletBatchT<T> F_hat = self_stage(F_tub, cache);
        TubeletBatchT<T> F_bar = cross_stage(F_hat, G_tub, cache);
        if (cache) {
            for (auto& t : F_tub.tubelets) t.zero();
            geom_cache_.push_back(std::move(F_tub));
        }
        return tubelet_merge(F_bar);
    }

    std::pair<TensorT<T>, TensorT<T>> backward(const TensorT<T>& grad_out) {
        require(!geom_cache_.empty(), "tfa: backward without cached forward");
        TubeletBatchT<T> zeros = std::move(geom_cache_.back());
        geom_cache_.pop_back();

        TubeletBatchT<T> g_bar = tubelet_merge_adjoint(grad_out, zeros);
        TubeletBatchT<T> g_G = zeros;
        TubeletBatchT<T> g_hat = cross_backward(g_bar, g_G);
        TubeletBatchT<T> g_F = self_backward(g_hat);
        return {tubelet_partition_adjoint(g_F), tubelet_partition_adjoint(g_G)};
    }

    void collect(ParamRefsT<T>& out, const std::string& prefix) {
        qkv.collect(out, prefix + ".qkv");
        self_out.collect(out, prefix + ".self_out");
        q_proj.collect(out, prefix + ".q");
        kv_proj.collect(out, prefix + ".kv");
        cross_out.collect(out, prefix + ".cross_out");
    }

private:
    struct TubeletAttn {
        TensorT<T> Q, K, V;
        std::vector<AttentionCache<T>> heads;
    };
    struct StageCache {
        std::vector<TubeletAttn> per_tubelet;
    };

    int channels_ = 0;
    std::vector<StageCache> self_cache_, cross_cache_;
    std::vector<TubeletBatchT<T>> geom_cache_;

    // token matrix (n x C) <-> conv3d volume (n x 1 x 1 x C)
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
};

using Tfa = TfaT<float>;

}  // namespace vsr
