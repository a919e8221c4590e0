// SPDX-License-Identifier: Apache-2.0
//
// Per-channel spatial statistics and the normalization they induce.
// sigma carries a variance floor so constant maps stay differentiable.

#pragma once

#include <cmath>

#include "tensor.hpp"

namespace vsr {

inline constexpr double kEpsStat = 1e-5;

// f: HxWxC. per_channel=true -> mu/sigma of shape [C] over spatial
// positions; per_channel=false -> whole-map scalars of shape [1].
template <class T>
void channel_stats(const TensorT<T>& f, TensorT<T>& mu, TensorT<T>& sigma, bool per_channel = true) {
    require_rank(f, 3, "channel_stats input");
    const int H = f.shape[0], W = f.shape[1], C = f.shape[2];
    require(H * W >= 1, "channel_stats: empty spatial extent");
    const int groups = per_channel ? C : 1;
    const long long N = per_channel ? static_cast<long long>(H) * W : static_cast<long long>(H) * W * C;
    mu = TensorT<T>({groups});
    sigma = TensorT<T>({groups});

    std::vector<double> sum(groups, 0.0), sumsq(groups, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                const double v = static_cast<double>(f.at3(y, x, c));
                const int g = per_channel ? c : 0;
                sum[g] += v;
                sumsq[g] += v * v;
            }
    for (int g = 0; g < groups; ++g) {
        const double m = sum[g] / static_cast<double>(N);
        double var = sumsq[g] / static_cast<double>(N) - m * m;
        if (var < 0) var = 0;  // guard float cancellation
        mu[g] = static_cast<T>(m);
        sigma[g] = static_cast<T>(std::sqrt(var + kEpsStat));
    }
}

// Gradient of (mu, sigma) with respect to f.
template <class T>
TensorT<T> channel_stats_backward(const TensorT<T>& f, const TensorT<T>& mu, const TensorT<T>& sigma,
                                  const TensorT<T>& grad_mu, const TensorT<T>& grad_sigma, bool per_channel = true) {
    const int H = f.shape[0], W = f.shape[1], C = f.shape[2];
    const long long N = per_channel ? static_cast<long long>(H) * W : static_cast<long long>(H) * W * C;
    TensorT<T> grad_f(f.shape);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                const int g = per_channel ? c : 0;
                // d mu/d f = 1/N;  d sigma/d f = (f - mu) / (N * sigma)
                const T centered = f.at3(y, x, c) - mu[g];
                grad_f.at3(y, x, c) =
                    grad_mu[g] / static_cast<T>(N) + grad_sigma[g] * centered / (static_cast<T>(N) * sigma[g]);
            }
    return grad_f;
}

template <class T>
struct NormalizeCache {
    TensorT<T> normalized;  // (f - mu) / sigma
    TensorT<T> sigma;       // [C] or [1]
    bool per_channel = true;
};

// (f - mu) / sigma with stats from channel_stats.
template <class T>
TensorT<T> normalize_spatial(const TensorT<T>& f, NormalizeCache<T>* cache = nullptr, bool per_channel = true) {
    TensorT<T> mu, sigma;
    channel_stats(f, mu, sigma, per_channel);
    const int H = f.shape[0], W = f.shape[1], C = f.shape[2];
    TensorT<T> out(f.shape);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                const int g = per_channel ? c : 0;
                out.at3(y, x, c) = (f.at3(y, x, c) - mu[g]) / sigma[g];
            }
    if (cache) {
        cache->normalized = out;
        cache->sigma = std::move(sigma);
        cache->per_channel = per_channel;
    }
    return out;
}

template <class T>
TensorT<T> normalize_spatial_backward(const TensorT<T>& grad_out, const NormalizeCache<T>& cache) {
    const TensorT<T>& xh = cache.normalized;
    const int H = xh.shape[0], W = xh.shape[1], C = xh.shape[2];
    const bool per_channel = cache.per_channel;
    const int groups = per_channel ? C : 1;
    const double N = per_channel ? static_cast<double>(H) * W : static_cast<double>(H) * W * C;

    std::vector<double> mean_g(groups, 0.0), mean_gxh(groups, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                const int g = per_channel ? c : 0;
                mean_g[g] += static_cast<double>(grad_out.at3(y, x, c));
                mean_gxh[g] += static_cast<double>(grad_out.at3(y, x, c)) * static_cast<double>(xh.at3(y, x, c));
            }
    for (int g = 0; g < groups; ++g) {
        mean_g[g] /= N;
        mean_gxh[g] /= N;
    }

    TensorT<T> grad_f(xh.shape);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                const int g = per_channel ? c : 0;
                const double gi = static_cast<double>(grad_out.at3(y, x, c));
                const double xi = static_cast<double>(xh.at3(y, x, c));
                grad_f.at3(y, x, c) =
                    static_cast<T>((gi - mean_g[g] - xi * mean_gxh[g]) / static_cast<double>(cache.sigma[g]));
            }
    return grad_f;
}

}  // namespace vsr
