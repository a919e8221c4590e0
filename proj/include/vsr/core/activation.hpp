// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "tensor.hpp"

namespace vsr {

// Smooth GELU (tanh form). gelu(0) == 0, which several structural
// identities in this library rely on.
template <class T>
inline T gelu(T x) {
    const double xd = static_cast<double>(x);
    const double u = 0.7978845608028654 * (xd + 0.044715 * xd * xd * xd);
    return static_cast<T>(0.5 * xd * (1.0 + std::tanh(u)));
}

template <class T>
inline T gelu_grad(T x) {
    const double xd = static_cast<double>(x);
    const double u = 0.7978845608028654 * (xd + 0.044715 * xd * xd * xd);
    const double t = std::tanh(u);
    const double du = 0.7978845608028654 * (1.0 + 3.0 * 0.044715 * xd * xd);
    return static_cast<T>(0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * du);
}

template <class T>
inline TensorT<T> gelu(const TensorT<T>& x) {
    TensorT<T> out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = gelu(x.data[i]);
    return out;
}

// grad wrt x given upstream grad and the pre-activation input
template <class T>
inline TensorT<T> gelu_backward(const TensorT<T>& grad_out, const TensorT<T>& x) {
    TensorT<T> g(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) g.data[i] = grad_out.data[i] * gelu_grad(x.data[i]);
    return g;
}

}  // namespace vsr
