// SPDX-License-Identifier: Apache-2.0
//
// Sub-pixel rearrangement: HxWx(C*r^2) -> (rH)x(rW)xC with
// out(y*r+dy, x*r+dx, c) = in(y, x, c*r^2 + dy*r + dx). The inverse is the
// adjoint rearrangement, which is also the backward pass.

#pragma once

#include "tensor.hpp"

namespace vsr {

template <class T>
TensorT<T> pixel_shuffle(const TensorT<T>& input, int r) {
    require_rank(input, 3, "pixel_shuffle input");
    require(r >= 1, "pixel_shuffle: factor must be >= 1");
    const int H = input.shape[0], W = input.shape[1], Cr2 = input.shape[2];
    require(Cr2 % (r * r) == 0, "pixel_shuffle: channel count " + std::to_string(Cr2) +
                                    " not divisible by r^2 = " + std::to_string(r * r));
    const int C = Cr2 / (r * r);
    TensorT<T> out({H * r, W * r, C});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c)
                for (int dy = 0; dy < r; ++dy)
                    for (int dx = 0; dx < r; ++dx)
                        out.at3(y * r + dy, x * r + dx, c) = input.at3(y, x, c * r * r + dy * r + dx);
    return out;
}

template <class T>
TensorT<T> pixel_unshuffle(const TensorT<T>& input, int r) {
    require_rank(input, 3, "pixel_unshuffle input");
    require(r >= 1, "pixel_unshuffle: factor must be >= 1");
    const int Hr = input.shape[0], Wr = input.shape[1], C = input.shape[2];
    require(Hr % r == 0 && Wr % r == 0, "pixel_unshuffle: spatial dims not divisible by r");
    const int H = Hr / r, W = Wr / r;
    TensorT<T> out({H, W, C * r * r});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c)
                for (int dy = 0; dy < r; ++dy)
                    for (int dx = 0; dx < r; ++dx)
                        out.at3(y, x, c * r * r + dy * r + dx) = input.at3(y * r + dy, x * r + dx, c);
    return out;
}

// Backward of pixel_shuffle is the inverse rearrangement of the gradient.
template <class T>
TensorT<T> pixel_shuffle_backward(const TensorT<T>& grad_out, int r) {
    return pixel_unshuffle(grad_out, r);
}

}  // namespace vsr
