// SPDX-License-Identifier: Apache-2.0
//
// Full-reference quality metrics over video pairs: PSNR, single-scale
// SSIM on channel-mean grayscale, and a temporal-consistency score (mean
// absolute error between adjacent-frame difference fields - lower is
// better). Each returns per-frame values plus the clip mean.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace vsr {

struct MetricReport {
    std::string metric;
    std::string clip_id, model_id;
    std::vector<double> per_frame;
    double clip_mean = 0;

    void finalize() {
        double s = 0;
        for (double v : per_frame) s += v;
        clip_mean = per_frame.empty() ? 0 : s / static_cast<double>(per_frame.size());
    }
};

inline constexpr double kPsnrCap = 100.0;

inline MetricReport psnr(const Video& x, const Video& y, double max_val = 1.0) {
    require_rank(x, 4, "psnr");
    require(x.same_shape(y), "psnr: shape mismatch " + shape_str(x.shape) + " vs " + shape_str(y.shape));
    MetricReport r;
    r.metric = "psnr";
    const int L = x.shape[0];
    const long long per = x.numel() / L;
    for (int f = 0; f < L; ++f) {
        double acc = 0;
        for (long long i = f * per; i < (f + 1) * per; ++i) {
            const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
            acc += d * d;
        }
        const double mse_f = acc / static_cast<double>(per);
        const double v = mse_f <= 0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(max_val * max_val / mse_f));
        r.per_frame.push_back(v);
    }
    r.finalize();
    return r;
}

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<size_t>(size));
    const int half = size / 2;
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        w[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[static_cast<size_t>(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// channel-mean grayscale of one frame -> H x W doubles
inline std::vector<double> to_gray(const Video& v, int f) {
    const int H = v.shape[1], W = v.shape[2], C = v.shape[3];
    std::vector<double> g(static_cast<size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double s = 0;
            for (int c = 0; c < C; ++c) s += v.at4(f, y, x, c);
            g[static_cast<size_t>(y) * W + x] = s / C;
        }
    return g;
}

// separable "valid" filtering: rows then columns
inline std::vector<double> filter_valid(const std::vector<double>& img, int H, int W, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int Wv = W - n + 1, Hv = H - n + 1;
    std::vector<double> tmp(static_cast<size_t>(H) * Wv, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < Wv; ++x) {
            double acc = 0;
            for (int i = 0; i < n; ++i) acc += k[static_cast<size_t>(i)] * img[static_cast<size_t>(y) * W + x + i];
            tmp[static_cast<size_t>(y) * Wv + x] = acc;
        }
    std::vector<double> out(static_cast<size_t>(Hv) * Wv, 0.0);
    for (int y = 0; y < Hv; ++y)
        for (int x = 0; x < Wv; ++x) {
            double acc = 0;
            for (int i = 0; i < n; ++i) acc += k[static_cast<size_t>(i)] * tmp[static_cast<size_t>(y + i) * Wv + x];
            out[static_cast<size_t>(y) * Wv + x] = acc;
        }
    return out;
}

}  // namespace detail

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01, k2 = 0.03;
    double max_val = 1.0;
};

inline MetricReport ssim(const Video& x, const Video& y, const SsimParams& p = {}) {
    require_rank(x, 4, "ssim");
    require(x.same_shape(y), "ssim: shape mismatch " + shape_str(x.shape) + " vs " + shape_str(y.shape));
    const int L = x.shape[0], H = x.shape[1], W = x.shape[2];
    require(H >= p.window && W >= p.window, "ssim: frame " + std::to_string(H) + "x" + std::to_string(W) +
                                                " smaller than window " + std::to_string(p.window));
    MetricReport r;
    r.metric = "ssim";
    const std::vector<double> kernel = detail::gaussian_window(p.window, p.sigma);
    const double c1 = (p.k1 * p.max_val) * (p.k1 * p.max_val);
    const double c2 = (p.k2 * p.max_val) * (p.k2 * p.max_val);

    for (int f = 0; f < L; ++f) {
        const std::vector<double> gx = detail::to_gray(x, f);
        const std::vector<double> gy = detail::to_gray(y, f);
        std::vector<double> gx2(gx.size()), gy2(gx.size()), gxy(gx.size());
        for (size_t i = 0; i < gx.size(); ++i) {
            gx2[i] = gx[i] * gx[i];
            gy2[i] = gy[i] * gy[i];
            gxy[i] = gx[i] * gy[i];
        }
        const auto mu_x = detail::filter_valid(gx, H, W, kernel);
        const auto mu_y = detail::filter_valid(gy, H, W, kernel);
        const auto m_x2 = detail::filter_valid(gx2, H, W, kernel);
        const auto m_y2 = detail::filter_valid(gy2, H, W, kernel);
        const auto m_xy = detail::filter_valid(gxy, H, W, kernel);
        double acc = 0;
        for (size_t i = 0; i < mu_x.size(); ++i) {
            const double var_x = m_x2[i] - mu_x[i] * mu_x[i];
            const double var_y = m_y2[i] - mu_y[i] * mu_y[i];
            const double cov = m_xy[i] - mu_x[i] * mu_y[i];
            const double num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2);
            const double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (var_x + var_y + c2);
            acc += num / den;
        }
        r.per_frame.push_back(acc / static_cast<double>(mu_x.size()));
    }
    r.finalize();
    return r;
}

inline MetricReport temporal_consistency(const Video& x, const Video& y) {
    require_rank(x, 4, "temporal_consistency");
    require(x.same_shape(y), "temporal_consistency: shape mismatch " + shape_str(x.shape) + " vs " +
                                 shape_str(y.shape));
    const int L = x.shape[0];
    require(L >= 2, "temporal_consistency: need at least 2 frames, got " + std::to_string(L));
    MetricReport r;
    r.metric = "tc";
    const long long per = x.numel() / L;
    for (int f = 0; f + 1 < L; ++f) {
        double acc = 0;
        for (long long i = 0; i < per; ++i) {
            const double dx = static_cast<double>(x[(f + 1) * per + i]) - static_cast<double>(x[f * per + i]);
            const double dy = static_cast<double>(y[(f + 1) * per + i]) - static_cast<double>(y[f * per + i]);
            acc += std::abs(dx - dy);
        }
        r.per_frame.push_back(acc / static_cast<double>(per));
    }
    r.finalize();
    return r;
}

}  // namespace vsr
