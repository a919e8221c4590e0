// SPDX-License-Identifier: Apache-2.0
//
// Parameter container and the small layer set the networks are built
// from. Layers keep a stack of cached forward inputs: call backward in
// reverse order of the forwards that requested caching (cache=true), each
// backward pops one entry. Frozen parameters receive no gradient
// accumulation.

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "../core/activation.hpp"
#include "../core/conv.hpp"
#include "../core/rng.hpp"
#include "../core/tensor.hpp"

namespace vsr {

template <class T>
struct ParameterT {
    TensorT<T> value;
    TensorT<T> grad;
    bool frozen = false;

    void init(TensorT<T> v) {
        value = std::move(v);
        grad = TensorT<T>(value.shape);
    }
    void zero_grad() { grad.zero(); }
    TensorT<T>* grad_sink() { return frozen ? nullptr : &grad; }
};

template <class T>
using ParamRefsT = std::vector<std::pair<std::string, ParameterT<T>*>>;

using Parameter = ParameterT<float>;
using ParamRefs = ParamRefsT<float>;

namespace detail {
template <class T>
inline void pop_cache(std::vector<TensorT<T>>& cache, const char* who) {
    require(!cache.empty(), std::string(who) + ": backward called without a cached forward");
    cache.pop_back();
}
}  // namespace detail

// 2D convolution with shared weights over the frame axis: input is
// (L, H, W, Cin), output (L, Ho, Wo, Cout).
template <class T>
class Conv2dLayerT {
public:
    ParameterT<T> weight;  // k x k x Cin x Cout
    ParameterT<T> bias;    // Cout (empty when bias disabled)
    int stride = 1, padding = 0;

    void init(int k, int cin, int cout, int stride_, int padding_, Rng& rng, double weight_scale = -1) {
        stride = stride_;
        padding = padding_;
        if (weight_scale < 0) weight_scale = std::sqrt(2.0 / (static_cast<double>(k) * k * cin));
        weight.init(rng.template randn<T>({k, k, cin, cout}, weight_scale));
        bias.init(TensorT<T>({cout}));
    }

    void init_const(int k, int cin, int cout, int stride_, int padding_, T weight_value, T bias_value) {
        stride = stride_;
        padding = padding_;
        weight.init(TensorT<T>::full({k, k, cin, cout}, weight_value));
        bias.init(TensorT<T>::full({cout}, bias_value));
    }

    int out_channels() const { return weight.value.shape[3]; }

    TensorT<T> forward(const TensorT<T>& x, bool cache) {
        require_rank(x, 4, "Conv2dLayer input");
        const int L = x.shape[0];
        TensorT<T> out;
        for (int f = 0; f < L; ++f) {
            TensorT<T> of = conv2d(frame_of(x, f), weight.value, bias.value, stride, padding);
            if (f == 0) out = TensorT<T>({L, of.shape[0], of.shape[1], of.shape[2]});
            set_frame(out, f, of);
        }
        if (cache) cache_.push_back(x);
        return out;
    }

    TensorT<T> backward(const TensorT<T>& grad_out) {
        require(!cache_.empty(), "Conv2dLayer: backward without cached forward");
        const TensorT<T>& x = cache_.back();
        const int L = x.shape[0];
        TensorT<T> grad_x(x.shape);
        for (int f = 0; f < L; ++f) {
            TensorT<T> gin;
            conv2d_backward(frame_of(grad_out, f), frame_of(x, f), weight.value, stride, padding, &gin,
                            weight.grad_sink(), bias.grad_sink(), /*accumulate=*/true);
            set_frame(grad_x, f, gin);
        }
        detail::pop_cache(cache_, "Conv2dLayer");
        return grad_x;
    }

    void collect(ParamRefsT<T>& out, const std::string& prefix) {
        out.emplace_back(prefix + ".weight", &weight);
        out.emplace_back(prefix + ".bias", &bias);
    }

private:
    std::vector<TensorT<T>> cache_;
};

// 3D convolution layer over (L, H, W, Cin) volumes.
template <class T>
class Conv3dLayerT {
public:
    ParameterT<T> weight;  // kt x k x k x Cin x Cout
    ParameterT<T> bias;    // Cout
    int stride = 1, padding = 0;

    void init(int kt, int k, int cin, int cout, int stride_, int padding_, Rng& rng, double weight_scale = -1) {
        stride = stride_;
        padding = padding_;
        if (weight_scale < 0) weight_scale = std::sqrt(2.0 / (static_cast<double>(kt) * k * k * cin));
        weight.init(rng.template randn<T>({kt, k, k, cin, cout}, weight_scale));
        bias.init(TensorT<T>({cout}));
    }

    void init_zero(int kt, int k, int cin, int cout, int stride_ = 1, int padding_ = 0) {
        stride = stride_;
        padding = padding_;
        weight.init(TensorT<T>({kt, k, k, cin, cout}));
        bias.init(TensorT<T>({cout}));
    }

    TensorT<T> forward(const TensorT<T>& x, bool cache) {
        TensorT<T> out = conv3d(x, weight.value, bias.value, stride, padding);
        if (cache) cache_.push_back(x);
        return out;
    }

    TensorT<T> backward(const TensorT<T>& grad_out) {
        require(!cache_.empty(), "Conv3dLayer: backward without cached forward");
        const TensorT<T>& x = cache_.back();
        TensorT<T> grad_x;
        conv3d_backward(grad_out, x, weight.value, stride, padding, &grad_x, weight.grad_sink(), bias.grad_sink(),
                        /*accumulate=*/true);
        detail::pop_cache(cache_, "Conv3dLayer");
        return grad_x;
    }

    void collect(ParamRefsT<T>& out, const std::string& prefix) {
        out.emplace_back(prefix + ".weight", &weight);
        out.emplace_back(prefix + ".bias", &bias);
    }

private:
    std::vector<TensorT<T>> cache_;
};

// Dense layer on rank-1 vectors.
template <class T>
class LinearT {
public:
    ParameterT<T> weight;  // in x out
    ParameterT<T> bias;    // out

    void init(int in, int out, Rng& rng, double weight_scale = -1) {
        if (weight_scale < 0) weight_scale = std::sqrt(2.0 / in);
        weight.init(rng.template randn<T>({in, out}, weight_scale));
        bias.init(TensorT<T>({out}));
    }

    TensorT<T> forward(const TensorT<T>& x, bool cache) {
        require_rank(x, 1, "Linear input");
        const int in = weight.value.shape[0], out_dim = weight.value.shape[1];
        require(x.shape[0] == in, "Linear: input dim mismatch");
        TensorT<T> y({out_dim});
        for (int o = 0; o < out_dim; ++o) y[o] = bias.value[o];
        for (int i = 0; i < in; ++i) {
            const T a = x[i];
            for (int o = 0; o < out_dim; ++o) y[o] += a * weight.value.at2(i, o);
        }
        if (cache) cache_.push_back(x);
        return y;
    }

    TensorT<T> backward(const TensorT<T>& grad_out) {
        require(!cache_.empty(), "Linear: backward without cached forward");
        const TensorT<T>& x = cache_.back();
        const int in = weight.value.shape[0], out_dim = weight.value.shape[1];
        TensorT<T> grad_x({in});
        for (int i = 0; i < in; ++i) {
            T acc = 0;
            for (int o = 0; o < out_dim; ++o) {
                acc += grad_out[o] * weight.value.at2(i, o);
                if (!weight.frozen) weight.grad.at2(i, o) += grad_out[o] * x[i];
            }
            grad_x[i] = acc;
        }
        if (!bias.frozen)
            for (int o = 0; o < out_dim; ++o) bias.grad[o] += grad_out[o];
        detail::pop_cache(cache_, "Linear");
        return grad_x;
    }

    void collect(ParamRefsT<T>& out, const std::string& prefix) {
        out.emplace_back(prefix + ".weight", &weight);
        out.emplace_back(prefix + ".bias", &bias);
    }

private:
    std::vector<TensorT<T>> cache_;
};

// ---- parameter-free resampling helpers -----------------------------------

template <class T>
TensorT<T> nearest_up2(const TensorT<T>& x) {
    require_rank(x, 4, "nearest_up2 input");
    const int L = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
    TensorT<T> out({L, H * 2, W * 2, C});
    for (int f = 0; f < L; ++f)
        for (int y = 0; y < 2 * H; ++y)
            for (int xx = 0; xx < 2 * W; ++xx)
                for (int c = 0; c < C; ++c) out.at4(f, y, xx, c) = x.at4(f, y / 2, xx / 2, c);
    return out;
}

template <class T>
TensorT<T> nearest_up2_backward(const TensorT<T>& grad_out) {
    const int L = grad_out.shape[0], H2 = grad_out.shape[1], W2 = grad_out.shape[2], C = grad_out.shape[3];
    TensorT<T> grad({L, H2 / 2, W2 / 2, C});
    for (int f = 0; f < L; ++f)
        for (int y = 0; y < H2; ++y)
            for (int xx = 0; xx < W2; ++xx)
                for (int c = 0; c < C; ++c) grad.at4(f, y / 2, xx / 2, c) += grad_out.at4(f, y, xx, c);
    return grad;
}

// ---- residual block -------------------------------------------------------

// gelu -> conv3x3 -> (+ time embedding) -> gelu -> conv3x3, plus identity
// or 1x1-projected skip.
template <class T>
class ResBlockT {
public:
    Conv2dLayerT<T> conv1, conv2;
    std::optional<Conv2dLayerT<T>> skip_proj;
    std::optional<LinearT<T>> temb_proj;

    void init(int cin, int cout, Rng& rng, int temb_dim = 0) {
        conv1.init(3, cin, cout, 1, 1, rng);
        conv2.init(3, cout, cout, 1, 1, rng);
        if (cin != cout) {
            skip_proj.emplace();
            skip_proj->init(1, cin, cout, 1, 0, rng);
        }
        if (temb_dim > 0) {
            temb_proj.emplace();
            temb_proj->init(temb_dim, cout, rng);
        }
    }

    TensorT<T> forward(const TensorT<T>& x, const TensorT<T>* temb, bool cache) {
        TensorT<T> a = gelu(x);
        TensorT<T> h = conv1.forward(a, cache);
        if (temb_proj) {
            require(temb != nullptr, "ResBlock: time embedding expected");
            TensorT<T> tp = temb_proj->forward(*temb, cache);
            const int C = h.shape[3];
            for (long long i = 0; i < h.numel(); ++i) h[i] += tp[static_cast<int>(i % C)];
        }
        TensorT<T> h2 = conv2.forward(gelu(h), cache);
        TensorT<T> skip = skip_proj ? skip_proj->forward(x, cache) : x;
        TensorT<T> out = add(skip, h2);
        if (cache) {
            cache_x_.push_back(x);
            cache_h_.push_back(std::move(h));
        }
        return out;
    }

    // Returns grad wrt x; grad wrt temb accumulates into *grad_temb if given.
    TensorT<T> backward(const TensorT<T>& grad_out, TensorT<T>* grad_temb = nullptr) {
        require(!cache_x_.empty(), "ResBlock: backward without cached forward");
        const TensorT<T> x = cache_x_.back();
        const TensorT<T> h = cache_h_.back();
        cache_x_.pop_back();
        cache_h_.pop_back();

        TensorT<T> grad_x = skip_proj ? skip_proj->backward(grad_out) : grad_out;
        TensorT<T> gh_post = conv2.backward(grad_out);
        TensorT<T> gh = gelu_backward(gh_post, h);
        if (temb_proj) {
            const int C = gh.shape[3];
            TensorT<T> gtp({C});
            for (long long i = 0; i < gh.numel(); ++i) gtp[static_cast<int>(i % C)] += gh[i];
            TensorT<T> gt = temb_proj->backward(gtp);
            if (grad_temb) *grad_temb += gt;
        }
        TensorT<T> ga = conv1.backward(gh);
        grad_x += gelu_backward(ga, x);
        return grad_x;
    }

    void collect(ParamRefsT<T>& out, const std::string& prefix) {
        conv1.collect(out, prefix + ".conv1");
        conv2.collect(out, prefix + ".conv2");
        if (skip_proj) skip_proj->collect(out, prefix + ".skip");
        if (temb_proj) temb_proj->collect(out, prefix + ".temb");
    }

private:
    std::vector<TensorT<T>> cache_x_, cache_h_;
};

}  // namespace vsr
