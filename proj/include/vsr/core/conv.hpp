// SPDX-License-Identifier: Apache-2.0
//
// Direct 2D/3D convolutions with analytic backward passes. Layout: feature
// maps are HxWxC (or LxHxWxC), weights are kxkxCinxCout (kt x k x k x Cin x
// Cout for 3D). Zero padding; temporal padding of conv3d is fixed to
// (kt-1)/2 so the frame count is preserved.

#pragma once

#include "tensor.hpp"

namespace vsr {

template <class T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias, int stride = 1,
                  int padding = 0) {
    require_rank(input, 3, "conv2d input");
    require_rank(weight, 4, "conv2d weight");
    const int H = input.shape[0], W = input.shape[1], Cin = input.shape[2];
    const int k = weight.shape[0], Cinw = weight.shape[2], Cout = weight.shape[3];
    require(weight.shape[1] == k, "conv2d: weight must be square, got " + shape_str(weight.shape));
    require(k % 2 == 1, "conv2d: kernel size must be odd, got " + std::to_string(k));
    require(Cin == Cinw, "conv2d: input channels " + shape_str(input.shape) + " do not match weight " +
                             shape_str(weight.shape));
    const bool has_bias = bias.numel() > 0;
    if (has_bias) require(bias.rank() == 1 && bias.shape[0] == Cout, "conv2d: bias shape mismatch");
    require(stride >= 1, "conv2d: stride must be >= 1");
    const int Ho = (H + 2 * padding - k) / stride + 1;
    const int Wo = (W + 2 * padding - k) / stride + 1;
    require(Ho >= 1 && Wo >= 1, "conv2d: output would be empty for input " + shape_str(input.shape));

    TensorT<T> out({Ho, Wo, Cout});
    for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
            T* orow = &out.at3(oy, ox, 0);
            if (has_bias)
                for (int co = 0; co < Cout; ++co) orow[co] = bias[co];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - padding;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - padding;
                    if (ix < 0 || ix >= W) continue;
                    const T* irow = &input.at3(iy, ix, 0);
                    for (int ci = 0; ci < Cin; ++ci) {
                        const T a = irow[ci];
                        const T* wrow = &weight.at4(ky, kx, ci, 0);
                        for (int co = 0; co < Cout; ++co) orow[co] += a * wrow[co];
                    }
                }
            }
        }
    return out;
}

// Accumulates into grad_weight / grad_bias when accumulate=true (shared
// weights applied over several frames). grad_input is always overwritten.
template <class T>
void conv2d_backward(const TensorT<T>& grad_out, const TensorT<T>& input, const TensorT<T>& weight, int stride,
                     int padding, TensorT<T>* grad_input, TensorT<T>* grad_weight, TensorT<T>* grad_bias,
                     bool accumulate = false) {
    const int H = input.shape[0], W = input.shape[1], Cin = input.shape[2];
    const int k = weight.shape[0], Cout = weight.shape[3];
    const int Ho = grad_out.shape[0], Wo = grad_out.shape[1];
    if (grad_input) {
        *grad_input = TensorT<T>({H, W, Cin});
    }
    if (grad_weight && !accumulate) *grad_weight = TensorT<T>(weight.shape);
    if (grad_bias && !accumulate) *grad_bias = TensorT<T>({Cout});

    for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
            const T* grow = &grad_out.at3(oy, ox, 0);
            if (grad_bias)
                for (int co = 0; co < Cout; ++co) (*grad_bias)[co] += grow[co];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - padding;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - padding;
                    if (ix < 0 || ix >= W) continue;
                    const T* irow = &input.at3(iy, ix, 0);
                    T* girow = grad_input ? &grad_input->at3(iy, ix, 0) : nullptr;
                    for (int ci = 0; ci < Cin; ++ci) {
                        const T* wrow = &weight.at4(ky, kx, ci, 0);
                        T* gwrow = grad_weight ? &grad_weight->at4(ky, kx, ci, 0) : nullptr;
                        T acc = 0;
                        const T a = irow[ci];
                        for (int co = 0; co < Cout; ++co) {
                            const T g = grow[co];
                            acc += g * wrow[co];
                            if (gwrow) gwrow[co] += g * a;
                        }
                        if (girow) girow[ci] += acc;
                    }
                }
            }
        }
}

template <class T>
TensorT<T> conv3d(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias, int stride = 1,
                  int padding = 0) {
    require_rank(input, 4, "conv3d input");
    require_rank(weight, 5, "conv3d weight");
    const int L = input.shape[0], H = input.shape[1], W = input.shape[2], Cin = input.shape[3];
    const int kt = weight.shape[0], k = weight.shape[1], Cinw = weight.shape[3], Cout = weight.shape[4];
    require(weight.shape[2] == k, "conv3d: weight spatial kernel must be square");
    require(k % 2 == 1 && kt % 2 == 1, "conv3d: kernel sizes must be odd");
    require(Cin == Cinw, "conv3d: input channels " + shape_str(input.shape) + " do not match weight " +
                             shape_str(weight.shape));
    const bool has_bias = bias.numel() > 0;
    if (has_bias) require(bias.rank() == 1 && bias.shape[0] == Cout, "conv3d: bias shape mismatch");
    const int pt = (kt - 1) / 2;
    const int Ho = (H + 2 * padding - k) / stride + 1;
    const int Wo = (W + 2 * padding - k) / stride + 1;
    require(Ho >= 1 && Wo >= 1, "conv3d: output would be empty for input " + shape_str(input.shape));

    TensorT<T> out({L, Ho, Wo, Cout});
    for (int of = 0; of < L; ++of)
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
                T* orow = &out.at4(of, oy, ox, 0);
                if (has_bias)
                    for (int co = 0; co < Cout; ++co) orow[co] = bias[co];
                for (int kf = 0; kf < kt; ++kf) {
                    const int f = of + kf - pt;
                    if (f < 0 || f >= L) continue;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - padding;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - padding;
                            if (ix < 0 || ix >= W) continue;
                            const T* irow = &input.at4(f, iy, ix, 0);
                            for (int ci = 0; ci < Cin; ++ci) {
                                const T a = irow[ci];
                                const T* wrow = &weight.at5(kf, ky, kx, ci, 0);
                                for (int co = 0; co < Cout; ++co) orow[co] += a * wrow[co];
                            }
                        }
                    }
                }
            }
    return out;
}

template <class T>
void conv3d_backward(const TensorT<T>& grad_out, const TensorT<T>& input, const TensorT<T>& weight, int stride,
                     int padding, TensorT<T>* grad_input, TensorT<T>* grad_weight, TensorT<T>* grad_bias,
                     bool accumulate = false) {
    const int L = input.shape[0], H = input.shape[1], W = input.shape[2], Cin = input.shape[3];
    const int kt = weight.shape[0], k = weight.shape[1], Cout = weight.shape[4];
    const int pt = (kt - 1) / 2;
    const int Ho = grad_out.shape[1], Wo = grad_out.shape[2];
    if (grad_input) *grad_input = TensorT<T>(input.shape);
    if (grad_weight && !accumulate) *grad_weight = TensorT<T>(weight.shape);
    if (grad_bias && !accumulate) *grad_bias = TensorT<T>({Cout});

    for (int of = 0; of < L; ++of)
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
                const T* grow = &grad_out.at4(of, oy, ox, 0);
                if (grad_bias)
                    for (int co = 0; co < Cout; ++co) (*grad_bias)[co] += grow[co];
                for (int kf = 0; kf < kt; ++kf) {
                    const int f = of + kf - pt;
                    if (f < 0 || f >= L) continue;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - padding;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - padding;
                            if (ix < 0 || ix >= W) continue;
                            const T* irow = &input.at4(f, iy, ix, 0);
                            T* girow = grad_input ? &grad_input->at4(f, iy, ix, 0) : nullptr;
                            for (int ci = 0; ci < Cin; ++ci) {
                                const T* wrow = &weight.at5(kf, ky, kx, ci, 0);
                                T* gwrow = grad_weight ? &grad_weight->at5(kf, ky, kx, ci, 0) : nullptr;
                                T acc = 0;
                                const T a = irow[ci];
                                for (int co = 0; co < Cout; ++co) {
                                    const T g = grow[co];
                                    acc += g * wrow[co];
                                    if (gwrow) gwrow[co] += g * a;
                                }
                                if (girow) girow[ci] += acc;
                            }
                        }
                    }
                }
            }
}

}  // namespace vsr
