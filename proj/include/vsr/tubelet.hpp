// SPDX-License-Identifier: Apache-2.0
//
// Tubelets: the same h x w spatial window linked across all L frames of a
// feature stack, flattened to (L*h*w) tokens. partition/merge are exact
// inverses; spatial extents that do not divide the window are
// replicate-padded on the bottom/right and cropped back on merge.
//
// Token order inside a tubelet is frame-major, then row, then column:
//   token = (f*h + r)*w + c

#pragma once

#include <utility>
#include <vector>

#include "core/tensor.hpp"

namespace vsr {

struct WindowSpec {
    int h = 8;
    int w = 8;
};

template <class T>
struct TubeletBatchT {
    std::vector<TensorT<T>> tubelets;           // each (L*h*w) x C
    std::vector<std::pair<int, int>> origin;    // (row, col) of window top-left in the padded plane
    std::array<int, 4> source_shape{};          // L, H, W, C
    std::pair<int, int> pad{0, 0};              // rows, cols added bottom/right
    WindowSpec spec;

    int count() const { return static_cast<int>(tubelets.size()); }
    int tokens() const { return source_shape[0] * spec.h * spec.w; }
};

using TubeletBatch = TubeletBatchT<float>;

template <class T>
TubeletBatchT<T> tubelet_partition(const TensorT<T>& F, WindowSpec spec) {
    require_rank(F, 4, "tubelet_partition input");
    require(spec.h >= 1 && spec.w >= 1, "tubelet_partition: window must be at least 1x1");
    const int L = F.shape[0], H = F.shape[1], W = F.shape[2], C = F.shape[3];
    require(L >= 1, "tubelet_partition: need at least one frame");

    const int nh = (H + spec.h - 1) / spec.h;
    const int nw = (W + spec.w - 1) / spec.w;
    const int Hp = nh * spec.h, Wp = nw * spec.w;

    TubeletBatchT<T> batch;
    batch.spec = spec;
    batch.source_shape = {L, H, W, C};
    batch.pad = {Hp - H, Wp - W};
    batch.tubelets.reserve(static_cast<size_t>(nh) * nw);
    batch.origin.reserve(static_cast<size_t>(nh) * nw);

    for (int wy = 0; wy < nh; ++wy)
        for (int wx = 0; wx < nw; ++wx) {
            TensorT<T> tub({L * spec.h * spec.w, C});
            for (int f = 0; f < L; ++f)
                for (int r = 0; r < spec.h; ++r) {
                    const int ys = std::min(wy * spec.h + r, H - 1);  // replicate pad
                    for (int c = 0; c < spec.w; ++c) {
                        const int xs = std::min(wx * spec.w + c, W - 1);
                        const int token = (f * spec.h + r) * spec.w + c;
                        for (int ch = 0; ch < C; ++ch) tub.at2(token, ch) = F.at4(f, ys, xs, ch);
                    }
                }
            batch.tubelets.push_back(std::move(tub));
            batch.origin.emplace_back(wy * spec.h, wx * spec.w);
        }
    return batch;
}

template <class T>
void tubelet_check_consistent(const TubeletBatchT<T>& batch) {
    const auto [L, H, W, C] = batch.source_shape;
    const int nh = (H + batch.spec.h - 1) / batch.spec.h;
    const int nw = (W + batch.spec.w - 1) / batch.spec.w;
    require(batch.count() == nh * nw, "tubelet merge: expected " + std::to_string(nh * nw) + " tubelets, got " +
                                          std::to_string(batch.count()));
    std::vector<char> seen(static_cast<size_t>(nh) * nw, 0);
    for (const auto& [oy, ox] : batch.origin) {
        require(oy % batch.spec.h == 0 && ox % batch.spec.w == 0 && oy / batch.spec.h < nh && ox / batch.spec.w < nw &&
                    oy >= 0 && ox >= 0,
                "tubelet merge: origin (" + std::to_string(oy) + "," + std::to_string(ox) + ") off the window grid");
        char& s = seen[static_cast<size_t>(oy / batch.spec.h) * nw + ox / batch.spec.w];
        require(!s, "tubelet merge: duplicate origin (" + std::to_string(oy) + "," + std::to_string(ox) + ")");
        s = 1;
    }
    const int rows = L * batch.spec.h * batch.spec.w;
    for (const auto& t : batch.tubelets)
        require(t.rank() == 2 && t.shape[0] == rows && t.shape[1] == C, "tubelet merge: tubelet shape mismatch");
}

template <class T>
TensorT<T> tubelet_merge(const TubeletBatchT<T>& batch) {
    tubelet_check_consistent(batch);
    const auto [L, H, W, C] = batch.source_shape;
    const int h = batch.spec.h, w = batch.spec.w;
    TensorT<T> F({L, H, W, C});
    for (int i = 0; i < batch.count(); ++i) {
        const auto [oy, ox] = batch.origin[i];
        const TensorT<T>& tub = batch.tubelets[i];
        for (int f = 0; f < L; ++f)
            for (int r = 0; r < h; ++r) {
                const int y = oy + r;
                if (y >= H) continue;  // crop padding
                for (int c = 0; c < w; ++c) {
                    const int x = ox + c;
                    if (x >= W) continue;
                    const int token = (f * h + r) * w + c;
                    for (int ch = 0; ch < C; ++ch) F.at4(f, y, x, ch) = tub.at2(token, ch);
                }
            }
    }
    return F;
}

// Adjoint of partition: fold tubelet gradients back onto the source grid.
// Padded rows/cols accumulate into the replicated source position.
template <class T>
TensorT<T> tubelet_partition_adjoint(const TubeletBatchT<T>& grad_batch) {
    const auto [L, H, W, C] = grad_batch.source_shape;
    const int h = grad_batch.spec.h, w = grad_batch.spec.w;
    TensorT<T> grad_F({L, H, W, C});
    for (int i = 0; i < grad_batch.count(); ++i) {
        const auto [oy, ox] = grad_batch.origin[i];
        const TensorT<T>& tub = grad_batch.tubelets[i];
        for (int f = 0; f < L; ++f)
            for (int r = 0; r < h; ++r) {
                const int y = std::min(oy + r, H - 1);
                for (int c = 0; c < w; ++c) {
                    const int x = std::min(ox + c, W - 1);
                    const int token = (f * h + r) * w + c;
                    for (int ch = 0; ch < C; ++ch) grad_F.at4(f, y, x, ch) += tub.at2(token, ch);
                }
            }
    }
    return grad_F;
}

// Adjoint of merge: scatter a full-grid gradient into tubelet-token
// gradients; positions that were cropped on merge receive zero.
template <class T>
TubeletBatchT<T> tubelet_merge_adjoint(const TensorT<T>& grad_F, const TubeletBatchT<T>& like) {
    const auto [L, H, W, C] = like.source_shape;
    const int h = like.spec.h, w = like.spec.w;
    TubeletBatchT<T> grad_batch;
    grad_batch.spec = like.spec;
    grad_batch.source_shape = like.source_shape;
    grad_batch.pad = like.pad;
    grad_batch.origin = like.origin;
    grad_batch.tubelets.reserve(like.tubelets.size());
    for (int i = 0; i < like.count(); ++i) {
        const auto [oy, ox] = like.origin[i];
        TensorT<T> tub({L * h * w, C});
        for (int f = 0; f < L; ++f)
            for (int r = 0; r < h; ++r) {
                const int y = oy + r;
                for (int c = 0; c < w; ++c) {
                    const int x = ox + c;
                    if (y >= H || x >= W) continue;
                    const int token = (f * h + r) * w + c;
                    for (int ch = 0; ch < C; ++ch) tub.at2(token, ch) = grad_F.at4(f, y, x, ch);
                }
            }
        grad_batch.tubelets.push_back(std::move(tub));
    }
    return grad_batch;
}

}  // namespace vsr
