// SPDX-License-Identifier: Apache-2.0
//
// Multi-head wrapper over the single-head attention op, plus the column
// split/join helpers used by fused QKV projections. Token matrices are
// (n x C); heads split the channel axis.

#pragma once

#include <vector>

#include "../core/attention.hpp"

namespace vsr {

template <class T>
TensorT<T> mat_cols(const TensorT<T>& m, int c0, int c1) {
    const int n = m.shape[0];
    TensorT<T> out({n, c1 - c0});
    for (int i = 0; i < n; ++i)
        for (int j = c0; j < c1; ++j) out.at2(i, j - c0) = m.at2(i, j);
    return out;
}

template <class T>
void mat_add_cols(TensorT<T>& m, const TensorT<T>& part, int c0) {
    const int n = m.shape[0], w = part.shape[1];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j) m.at2(i, c0 + j) += part.at2(i, j);
}

template <class T>
void mat_split3(const TensorT<T>& joint, TensorT<T>& a, TensorT<T>& b, TensorT<T>& c) {
    const int C = joint.shape[1] / 3;
    a = mat_cols(joint, 0, C);
    b = mat_cols(joint, C, 2 * C);
    c = mat_cols(joint, 2 * C, 3 * C);
}

template <class T>
void mat_split2(const TensorT<T>& joint, TensorT<T>& a, TensorT<T>& b) {
    const int C = joint.shape[1] / 2;
    a = mat_cols(joint, 0, C);
    b = mat_cols(joint, C, 2 * C);
}

template <class T>
TensorT<T> mat_join(const std::vector<const TensorT<T>*>& parts) {
    const int n = parts[0]->shape[0];
    int C = 0;
    for (auto* p : parts) C += p->shape[1];
    TensorT<T> joint({n, C});
    int c0 = 0;
    for (auto* p : parts) {
        mat_add_cols(joint, *p, c0);
        c0 += p->shape[1];
    }
    return joint;
}

template <class T>
TensorT<T> mha(const TensorT<T>& Q, const TensorT<T>& K, const TensorT<T>& V, int heads,
               std::vector<AttentionCache<T>>* caches) {
    const int n = Q.shape[0], C = Q.shape[1];
    require(C % heads == 0, "mha: heads " + std::to_string(heads) + " must divide channels " + std::to_string(C));
    const int dh = C / heads;
    TensorT<T> out({n, C});
    for (int h = 0; h < heads; ++h) {
        AttentionCache<T> ac;
        TensorT<T> oh = attention(mat_cols(Q, h * dh, (h + 1) * dh), mat_cols(K, h * dh, (h + 1) * dh),
                                  mat_cols(V, h * dh, (h + 1) * dh), caches ? &ac : nullptr);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dh; ++j) out.at2(i, h * dh + j) = oh.at2(i, j);
        if (caches) caches->push_back(std::move(ac));
    }
    return out;
}

template <class T>
void mha_backward(const TensorT<T>& grad_out, const TensorT<T>& Q, const TensorT<T>& K, const TensorT<T>& V,
                  int heads, const std::vector<AttentionCache<T>>& caches, TensorT<T>& dQ, TensorT<T>& dK,
                  TensorT<T>& dV) {
    const int C = Q.shape[1];
    const int dh = C / heads;
    dQ = TensorT<T>(Q.shape);
    dK = TensorT<T>(K.shape);
    dV = TensorT<T>(V.shape);
    for (int h = 0; h < heads; ++h) {
        TensorT<T> dqh, dkh, dvh;
        attention_backward(mat_cols(grad_out, h * dh, (h + 1) * dh), mat_cols(Q, h * dh, (h + 1) * dh),
                           mat_cols(K, h * dh, (h + 1) * dh), mat_cols(V, h * dh, (h + 1) * dh),
                           caches[static_cast<size_t>(h)], dqh, dkh, dvh);
        mat_add_cols(dQ, dqh, h * dh);
        mat_add_cols(dK, dkh, h * dh);
        mat_add_cols(dV, dvh, h * dh);
    }
}

}  // namespace vsr
