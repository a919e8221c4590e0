// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "tensor.hpp"

namespace vsr {

// Smooth robust loss: mean over elements of sqrt((x-y)^2 + eps^2).
// Differentiable everywhere, including x == y where it evaluates to eps.
template <class T>
double charbonnier(const TensorT<T>& x, const TensorT<T>& y, double eps) {
    require(x.same_shape(y), "charbonnier: shape mismatch " + shape_str(x.shape) + " vs " + shape_str(y.shape));
    require(eps > 0, "charbonnier: eps must be positive");
    double acc = 0;
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double d = static_cast<double>(x.data[i]) - static_cast<double>(y.data[i]);
        acc += std::sqrt(d * d + eps * eps);
    }
    return acc / static_cast<double>(x.numel());
}

template <class T>
TensorT<T> charbonnier_backward(const TensorT<T>& x, const TensorT<T>& y, double eps) {
    TensorT<T> grad(x.shape);
    const double n = static_cast<double>(x.numel());
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double d = static_cast<double>(x.data[i]) - static_cast<double>(y.data[i]);
        grad.data[i] = static_cast<T>(d / (n * std::sqrt(d * d + eps * eps)));
    }
    return grad;
}

template <class T>
double mse(const TensorT<T>& x, const TensorT<T>& y) {
    require(x.same_shape(y), "mse: shape mismatch " + shape_str(x.shape) + " vs " + shape_str(y.shape));
    double acc = 0;
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double d = static_cast<double>(x.data[i]) - static_cast<double>(y.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(x.numel());
}

template <class T>
TensorT<T> mse_backward(const TensorT<T>& x, const TensorT<T>& y) {
    TensorT<T> grad(x.shape);
    const double n = static_cast<double>(x.numel());
    for (size_t i = 0; i < x.data.size(); ++i)
        grad.data[i] = static_cast<T>(2.0 * (static_cast<double>(x.data[i]) - static_cast<double>(y.data[i])) / n);
    return grad;
}

}  // namespace vsr
