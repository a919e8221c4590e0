// SPDX-License-Identifier: Apache-2.0
//
// Video refiner:  X_H = w*X_u + (1-w)*X_d + ResBlock([X_u, X_d]).
// The residual block is conv3x3 -> gelu -> conv3x3 with the final conv
// zero-initialized, so at initialization the output is exactly the convex
// blend.

#pragma once

#include "layers.hpp"

namespace vsr {

template <class T>
class RefinerT {
public:
    double w = 0.5;
    Conv2dLayerT<T> c1, c2;

    void init(double w_, Rng& rng, int hidden = 16) {
        require(w_ >= 0.0 && w_ <= 1.0, "refiner: w must lie in [0, 1]");
        w = w_;
        c1.init(3, 6, hidden, 1, 1, rng);
        c2.init_const(3, hidden, 3, 1, 1, T(0), T(0));
    }

    // X_d, X_u: (L, H, W, 3) with equal shapes.
    TensorT<T> forward(const TensorT<T>& x_d, const TensorT<T>& x_u, bool cache) {
        require(x_d.same_shape(x_u),
                "refiner: decoded/upscaled shape mismatch " + shape_str(x_d.shape) + " vs " + shape_str(x_u.shape));
        TensorT<T> cat = concat_channels(x_u, x_d);
        TensorT<T> h = c1.forward(cat, cache);
        TensorT<T> res = c2.forward(gelu(h), cache);
        if (cache) pre_cache_.push_back(h);
        TensorT<T> out(x_d.shape);
        const T wu = static_cast<T>(w), wd = static_cast<T>(1.0 - w);
        for (long long i = 0; i < out.numel(); ++i) out[i] = wu * x_u[i] + wd * x_d[i] + res[i];
        return out;
    }

    // Returns (grad_x_d, grad_x_u).
    std::pair<TensorT<T>, TensorT<T>> backward(const TensorT<T>& grad_out) {
        require(!pre_cache_.empty(), "refiner: backward without cached forward");
        TensorT<T> h = std::move(pre_cache_.back());
        pre_cache_.pop_back();
        TensorT<T> g_h = c2.backward(grad_out);
        TensorT<T> g_cat = c1.backward(gelu_backward(g_h, h));
        TensorT<T> g_xu, g_xd;
        split_channels(g_cat, g_xu, g_xd, 3);
        const T wu = static_cast<T>(w), wd = static_cast<T>(1.0 - w);
        for (long long i = 0; i < grad_out.numel(); ++i) {
            g_xu[i] += wu * grad_out[i];
            g_xd[i] += wd * grad_out[i];
        }
        return {std::move(g_xd), std::move(g_xu)};
    }

    void collect(ParamRefsT<T>& out, const std::string& prefix) {
        c1.collect(out, prefix + ".c1");
        c2.collect(out, prefix + ".c2");
    }

private:
    std::vector<TensorT<T>> pre_cache_;
};

}  // namespace vsr
