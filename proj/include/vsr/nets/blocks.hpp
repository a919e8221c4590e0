// SPDX-License-Identifier: Apache-2.0
//
// Conditioning slot appended to each decoder block of the UNet and the
// VAE decoder. Four wirings:
//   plain     - per-frame channel normalization only (the bare backbone)
//   zero_conv - normalization plus a zero-initialized conv of the guidance
//               added onto the features (baseline adapter)
//   sfa       - spatial feature adaptation
//   sfa_tfa   - spatial feature adaptation followed by temporal feature
//               alignment (the full module pair)
// Every wiring equals `plain` at fresh initialization, so insertion into a
// pretrained backbone does not change its function.

#pragma once

#include <optional>

#include "../sfa.hpp"
#include "../tfa.hpp"
#include "layers.hpp"

namespace vsr {

enum class CondMode { plain, zero_conv, sfa, sfa_tfa };

inline const char* cond_mode_name(CondMode m) {
    switch (m) {
        case CondMode::plain: return "plain";
        case CondMode::zero_conv: return "zero_conv";
        case CondMode::sfa: return "sfa";
        case CondMode::sfa_tfa: return "sfa_tfa";
    }
    return "?";
}

template <class T>
class CondSlotT {
public:
    CondMode mode = CondMode::plain;
    std::optional<Conv2dLayerT<T>> zconv;
    std::optional<SfaT<T>> sfa;
    std::optional<TfaT<T>> tfa;
    WindowSpec window;

    void init(int channels, CondMode m, Rng& rng, WindowSpec win, SfaConfig sfa_cfg = {}, TfaConfig tfa_cfg = {}) {
        mode = m;
        window = win;
        if (mode == CondMode::zero_conv) {
            zconv.emplace();
            zconv->init_const(3, channels, channels, 1, 1, T(0), T(0));
        }
        if (mode == CondMode::sfa || mode == CondMode::sfa_tfa) {
            sfa.emplace();
            sfa->init(channels, sfa_cfg);
        }
        if (mode == CondMode::sfa_tfa) {
            tfa.emplace();
            tfa->init(channels, rng, tfa_cfg);
        }
    }

    bool wants_guidance() const { return mode != CondMode::plain; }

    TensorT<T> forward(const TensorT<T>& h, const TensorT<T>* g, bool cache) {
        if (wants_guidance()) {
            require(g != nullptr, "cond slot: guidance map required for mode " + std::string(cond_mode_name(mode)));
            require(h.same_shape(*g), "cond slot: guidance shape " + shape_str(g->shape) +
                                          " does not match features " + shape_str(h.shape));
        }
        switch (mode) {
            case CondMode::plain:
                return normalize_frames(h, cache);
            case CondMode::zero_conv: {
                TensorT<T> out = normalize_frames(h, cache);
                out += zconv->forward(*g, cache);
                return out;
            }
            case CondMode::sfa:
                return sfa->forward(h, *g, cache);
            case CondMode::sfa_tfa: {
                TensorT<T> mid = sfa->forward(h, *g, cache);
                return tfa->forward(mid, *g, window, cache);
            }
        }
        throw std::logic_error("cond slot: unknown mode");
    }

    // Returns (grad_h, grad_g); grad_g is zeros for the plain wiring.
    std::pair<TensorT<T>, TensorT<T>> backward(const TensorT<T>& grad_out) {
        switch (mode) {
            case CondMode::plain:
                return {normalize_frames_backward(grad_out), TensorT<T>(grad_out.shape)};
            case CondMode::zero_conv: {
                TensorT<T> grad_g = zconv->backward(grad_out);
                return {normalize_frames_backward(grad_out), std::move(grad_g)};
            }
            case CondMode::sfa:
                return sfa->backward(grad_out);
            case CondMode::sfa_tfa: {
                auto [g_mid, g_g1] = tfa->backward(grad_out);
                auto [g_h, g_g2] = sfa->backward(g_mid);
                g_g2 += g_g1;
                return {std::move(g_h), std::move(g_g2)};
            }
        }
        throw std::logic_error("cond slot: unknown mode");
    }

    void collect(ParamRefsT<T>& out, const std::string& prefix) {
        if (zconv) zconv->collect(out, prefix + ".zconv");
        if (sfa) sfa->collect(out, prefix + ".sfa");
        if (tfa) tfa->collect(out, prefix + ".tfa");
    }

private:
    std::vector<std::vector<NormalizeCache<T>>> norm_cache_;

    TensorT<T> normalize_frames(const TensorT<T>& h, bool cache) {
        const int L = h.shape[0];
        TensorT<T> out(h.shape);
        std::vector<NormalizeCache<T>> norms(static_cast<size_t>(L));
        for (int f = 0; f < L; ++f)
            set_frame(out, f, normalize_spatial(frame_of(h, f), &norms[static_cast<size_t>(f)]));
        if (cache) norm_cache_.push_back(std::move(norms));
        return out;
    }

    TensorT<T> normalize_frames_backward(const TensorT<T>& grad_out) {
        require(!norm_cache_.empty(), "cond slot: backward without cached forward");
        std::vector<NormalizeCache<T>> norms = std::move(norm_cache_.back());
        norm_cache_.pop_back();
        const int L = grad_out.shape[0];
        TensorT<T> grad(grad_out.shape);
        for (int f = 0; f < L; ++f)
            set_frame(grad, f, normalize_spatial_backward(frame_of(grad_out, f), norms[static_cast<size_t>(f)]));
        return grad;
    }
};

// Sinusoidal timestep embedding, sin half then cos half.
template <class T>
TensorT<T> timestep_embedding(int t, int dim) {
    const int half = dim / 2;
    TensorT<T> emb({dim});
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
        emb[i] = static_cast<T>(std::sin(t * freq));
        emb[half + i] = static_cast<T>(std::cos(t * freq));
    }
    return emb;
}

}  // namespace vsr
