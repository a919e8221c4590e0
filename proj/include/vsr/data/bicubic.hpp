// SPDX-License-Identifier: Apache-2.0
//
// Separable bicubic resampling with the Catmull-Rom kernel (a = -0.5),
// half-pixel centered sampling, edge clamp. Down by an integer factor is
// the degradation protocol; up by an integer factor serves as the
// interpolation baseline.

#pragma once

#include <cmath>

#include "../core/tensor.hpp"

namespace vsr {

inline double bicubic_kernel(double x, double a = -0.5) {
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

namespace detail {

// Resample one axis of length n_in to n_out where the map from output
// to input coordinates is x_in = (j + 0.5) * n_in / n_out - 0.5.
struct BicubicTaps {
    int idx[4];
    double w[4];
};

inline BicubicTaps bicubic_taps(int j, int n_in, int n_out) {
    const double x = (j + 0.5) * static_cast<double>(n_in) / n_out - 0.5;
    const int x0 = static_cast<int>(std::floor(x));
    BicubicTaps t{};
    for (int k = 0; k < 4; ++k) {
        const int src = x0 - 1 + k;
        t.idx[k] = std::min(std::max(src, 0), n_in - 1);
        t.w[k] = bicubic_kernel(x - src);
    }
    return t;
}

}  // namespace detail

// Per-frame separable bicubic resize of a (L, H, W, C) video to
// (L, Ho, Wo, C).
template <class T>
TensorT<T> bicubic_resize(const TensorT<T>& x, int Ho, int Wo) {
    require_rank(x, 4, "bicubic_resize input");
    require(Ho >= 1 && Wo >= 1, "bicubic_resize: output dims must be positive");
    const int L = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];

    std::vector<detail::BicubicTaps> row_taps(static_cast<size_t>(Ho)), col_taps(static_cast<size_t>(Wo));
    for (int j = 0; j < Ho; ++j) row_taps[static_cast<size_t>(j)] = detail::bicubic_taps(j, H, Ho);
    for (int j = 0; j < Wo; ++j) col_taps[static_cast<size_t>(j)] = detail::bicubic_taps(j, W, Wo);

    TensorT<T> tmp({L, Ho, W, C});
    for (int f = 0; f < L; ++f)
        for (int y = 0; y < Ho; ++y) {
            const auto& t = row_taps[static_cast<size_t>(y)];
            for (int xx = 0; xx < W; ++xx)
                for (int c = 0; c < C; ++c) {
                    double acc = 0;
                    for (int k = 0; k < 4; ++k) acc += t.w[k] * x.at4(f, t.idx[k], xx, c);
                    tmp.at4(f, y, xx, c) = static_cast<T>(acc);
                }
        }
    TensorT<T> out({L, Ho, Wo, C});
    for (int f = 0; f < L; ++f)
        for (int y = 0; y < Ho; ++y)
            for (int xx = 0; xx < Wo; ++xx) {
                const auto& t = col_taps[static_cast<size_t>(xx)];
                for (int c = 0; c < C; ++c) {
                    double acc = 0;
                    for (int k = 0; k < 4; ++k) acc += t.w[k] * tmp.at4(f, y, t.idx[k], c);
                    out.at4(f, y, xx, c) = static_cast<T>(acc);
                }
            }
    return out;
}

// Adjoint of the upsampling resize: scatter with the same taps. in_shape
// is the shape the forward resize consumed.
template <class T>
TensorT<T> bicubic_resize_adjoint(const TensorT<T>& grad_out, const std::vector<int>& in_shape) {
    const int L = in_shape[0], H = in_shape[1], W = in_shape[2], C = in_shape[3];
    const int Ho = grad_out.shape[1], Wo = grad_out.shape[2];
    std::vector<detail::BicubicTaps> row_taps(static_cast<size_t>(Ho)), col_taps(static_cast<size_t>(Wo));
    for (int j = 0; j < Ho; ++j) row_taps[static_cast<size_t>(j)] = detail::bicubic_taps(j, H, Ho);
    for (int j = 0; j < Wo; ++j) col_taps[static_cast<size_t>(j)] = detail::bicubic_taps(j, W, Wo);

    TensorT<T> tmp({L, Ho, W, C});  // adjoint of the column pass
    for (int f = 0; f < L; ++f)
        for (int y = 0; y < Ho; ++y)
            for (int xx = 0; xx < Wo; ++xx) {
                const auto& t = col_taps[static_cast<size_t>(xx)];
                for (int c = 0; c < C; ++c) {
                    const T g = grad_out.at4(f, y, xx, c);
                    for (int k = 0; k < 4; ++k) tmp.at4(f, y, t.idx[k], c) += static_cast<T>(t.w[k]) * g;
                }
            }
    TensorT<T> grad({L, H, W, C});
    for (int f = 0; f < L; ++f)
        for (int y = 0; y < Ho; ++y) {
            const auto& t = row_taps[static_cast<size_t>(y)];
            for (int xx = 0; xx < W; ++xx)
                for (int c = 0; c < C; ++c) {
                    const T g = tmp.at4(f, y, xx, c);
                    for (int k = 0; k < 4; ++k) grad.at4(f, t.idx[k], xx, c) += static_cast<T>(t.w[k]) * g;
                }
        }
    return grad;
}

// x4 (or xN) bicubic degradation.
template <class T>
TensorT<T> bicubic_down(const TensorT<T>& x, int factor = 4) {
    require(factor >= 1, "bicubic_down: factor must be >= 1");
    require(x.shape[1] % factor == 0 && x.shape[2] % factor == 0,
            "bicubic_down: spatial dims " + shape_str(x.shape) + " not divisible by factor " + std::to_string(factor));
    return bicubic_resize(x, x.shape[1] / factor, x.shape[2] / factor);
}

template <class T>
TensorT<T> bicubic_up(const TensorT<T>& x, int factor = 4) {
    require(factor >= 1, "bicubic_up: factor must be >= 1");
    return bicubic_resize(x, x.shape[1] * factor, x.shape[2] * factor);
}

}  // namespace vsr
