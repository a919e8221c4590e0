// SPDX-License-Identifier: Apache-2.0
//
// Scaled dot-product attention on token matrices, single head. Multi-head
// splitting lives with the alignment module. Inner loops run along the
// token axis via transposed copies of K/V; summation orders match the
// textbook triple loops exactly.

#pragma once

#include <cmath>

#include "tensor.hpp"

namespace vsr {

// Row-wise softmax weights cached for backward.
template <class T>
struct AttentionCache {
    TensorT<T> weights;  // n x m, rows sum to 1
};

namespace detail {
template <class T>
TensorT<T> transposed(const TensorT<T>& m) {
    TensorT<T> t({m.shape[1], m.shape[0]});
    for (int i = 0; i < m.shape[0]; ++i)
        for (int j = 0; j < m.shape[1]; ++j) t.at2(j, i) = m.at2(i, j);
    return t;
}
}  // namespace detail

// Q: n x d, K: m x d, V: m x d  ->  n x d
template <class T>
TensorT<T> attention(const TensorT<T>& Q, const TensorT<T>& K, const TensorT<T>& V, AttentionCache<T>* cache = nullptr) {
    require_rank(Q, 2, "attention Q");
    require_rank(K, 2, "attention K");
    require_rank(V, 2, "attention V");
    const int n = Q.shape[0], d = Q.shape[1];
    const int m = K.shape[0];
    require(d > 0, "attention: feature dimension must be positive");
    require(m > 0, "attention: empty key set");
    require(K.shape[1] == d, "attention: K feature dim " + shape_str(K.shape) + " vs Q " + shape_str(Q.shape));
    require(V.shape[0] == m, "attention: V row count " + shape_str(V.shape) + " vs K " + shape_str(K.shape));
    const int dv = V.shape[1];

    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    const TensorT<T> KT = detail::transposed(K);

    TensorT<T> W({n, m});
    for (int i = 0; i < n; ++i) {
        T* wrow = &W.at2(i, 0);
        const T* qrow = &Q.at2(i, 0);
        for (int c = 0; c < d; ++c) {
            const T q = qrow[c];
            const T* ktrow = &KT.at2(c, 0);
            for (int j = 0; j < m; ++j) wrow[j] += q * ktrow[j];
        }
        T mx = wrow[0] * inv_sqrt_d;
        for (int j = 0; j < m; ++j) {
            wrow[j] *= inv_sqrt_d;
            mx = std::max(mx, wrow[j]);
        }
        T denom = 0;
        for (int j = 0; j < m; ++j) {
            wrow[j] = std::exp(wrow[j] - mx);
            denom += wrow[j];
        }
        for (int j = 0; j < m; ++j) wrow[j] /= denom;
    }

    TensorT<T> out({n, dv});
    for (int i = 0; i < n; ++i) {
        T* orow = &out.at2(i, 0);
        const T* wrow = &W.at2(i, 0);
        for (int j = 0; j < m; ++j) {
            const T w = wrow[j];
            const T* vrow = &V.at2(j, 0);
            for (int c = 0; c < dv; ++c) orow[c] += w * vrow[c];
        }
    }
    if (cache) cache->weights = std::move(W);
    return out;
}

template <class T>
void attention_backward(const TensorT<T>& grad_out, const TensorT<T>& Q, const TensorT<T>& K, const TensorT<T>& V,
                        const AttentionCache<T>& cache, TensorT<T>& grad_Q, TensorT<T>& grad_K, TensorT<T>& grad_V) {
    const int n = Q.shape[0], d = Q.shape[1], m = K.shape[0], dv = V.shape[1];
    const TensorT<T>& W = cache.weights;
    const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

    grad_Q = TensorT<T>(Q.shape);
    grad_V = TensorT<T>(V.shape);

    // dV = W^T * grad_out;  dW = grad_out * V^T
    const TensorT<T> VT = detail::transposed(V);
    TensorT<T> dW({n, m});
    for (int i = 0; i < n; ++i) {
        const T* grow = &grad_out.at2(i, 0);
        const T* wrow = &W.at2(i, 0);
        T* dwrow = &dW.at2(i, 0);
        for (int c = 0; c < dv; ++c) {
            const T g = grow[c];
            const T* vtrow = &VT.at2(c, 0);
            for (int j = 0; j < m; ++j) dwrow[j] += g * vtrow[j];
        }
        for (int j = 0; j < m; ++j) {
            const T w = wrow[j];
            T* gvrow = &grad_V.at2(j, 0);
            for (int c = 0; c < dv; ++c) gvrow[c] += w * grow[c];
        }
    }

    // softmax backward per row: dS_j = W_j * (dW_j - sum_k dW_k W_k)
    for (int i = 0; i < n; ++i) {
        const T* wrow = &W.at2(i, 0);
        T* dwrow = &dW.at2(i, 0);
        T inner = 0;
        for (int j = 0; j < m; ++j) inner += dwrow[j] * wrow[j];
        for (int j = 0; j < m; ++j) dwrow[j] = wrow[j] * (dwrow[j] - inner) * inv_sqrt_d;
    }

    // scores = Q K^T / sqrt(d):  dQ = dS * K, dK = dS^T * Q (scale folded in)
    const TensorT<T> KT = detail::transposed(K);
    for (int i = 0; i < n; ++i) {
        const T* dwrow = &dW.at2(i, 0);
        T* gqrow = &grad_Q.at2(i, 0);
        for (int c = 0; c < d; ++c) {
            const T* ktrow = &KT.at2(c, 0);
            T acc = 0;
            for (int j = 0; j < m; ++j) acc += dwrow[j] * ktrow[j];
            gqrow[c] += acc;
        }
    }
    TensorT<T> gKT({d, m});
    const TensorT<T> QT = detail::transposed(Q);
    for (int c = 0; c < d; ++c) {
        const T* qtrow = &QT.at2(c, 0);
        T* gktrow = &gKT.at2(c, 0);
        for (int i = 0; i < n; ++i) {
            const T q = qtrow[i];
            const T* dwrow = &dW.at2(i, 0);
            for (int j = 0; j < m; ++j) gktrow[j] += dwrow[j] * q;
        }
    }
    grad_K = detail::transposed(gKT);
}

}  // namespace vsr
