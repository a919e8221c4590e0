// SPDX-License-Identifier: Apache-2.0
//
// Independent single-scale SSIM reference: double precision, direct
// non-separable window sums, valid-region mean. Used only by tests to pin
// expected values; deliberately shares no code with the production metric.

#pragma once

#include <cmath>
#include <vector>

#include <vsr/core/tensor.hpp>

namespace vsrtest {

// frame: H x W grayscale doubles
inline double ssim_reference_frame(const std::vector<double>& a, const std::vector<double>& b, int H, int W,
                                   int win = 11, double sigma = 1.5, double k1 = 0.01, double k2 = 0.03,
                                   double max_val = 1.0) {
    const int half = win / 2;
    std::vector<double> g(static_cast<size_t>(win) * win);
    double gsum = 0;
    for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
            const double dy = y - half, dx = x - half;
            g[static_cast<size_t>(y) * win + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            gsum += g[static_cast<size_t>(y) * win + x];
        }
    for (auto& v : g) v /= gsum;

    const double c1 = (k1 * max_val) * (k1 * max_val);
    const double c2 = (k2 * max_val) * (k2 * max_val);
    double total = 0;
    int count = 0;
    for (int y0 = 0; y0 + win <= H; ++y0)
        for (int x0 = 0; x0 + win <= W; ++x0) {
            double mx = 0, my = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    const double w = g[static_cast<size_t>(y) * win + x];
                    mx += w * a[static_cast<size_t>(y0 + y) * W + x0 + x];
                    my += w * b[static_cast<size_t>(y0 + y) * W + x0 + x];
                }
            double vx = 0, vy = 0, cov = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    const double w = g[static_cast<size_t>(y) * win + x];
                    const double da = a[static_cast<size_t>(y0 + y) * W + x0 + x] - mx;
                    const double db = b[static_cast<size_t>(y0 + y) * W + x0 + x] - my;
                    vx += w * da * da;
                    vy += w * db * db;
                    cov += w * da * db;
                }
            total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / count;
}

// rank-4 video, channel-mean grayscale, mean over frames
inline double ssim_reference(const vsr::Video& x, const vsr::Video& y) {
    const int L = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
    double acc = 0;
    for (int f = 0; f < L; ++f) {
        std::vector<double> a(static_cast<size_t>(H) * W), b(a.size());
        for (int yy = 0; yy < H; ++yy)
            for (int xx = 0; xx < W; ++xx) {
                double sa = 0, sb = 0;
                for (int c = 0; c < C; ++c) {
                    sa += x.at4(f, yy, xx, c);
                    sb += y.at4(f, yy, xx, c);
                }
                a[static_cast<size_t>(yy) * W + xx] = sa / C;
                b[static_cast<size_t>(yy) * W + xx] = sb / C;
            }
        acc += ssim_reference_frame(a, b, H, W);
    }
    return acc / L;
}

}  // namespace vsrtest
