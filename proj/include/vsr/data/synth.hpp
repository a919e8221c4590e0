// SPDX-License-Identifier: Apache-2.0
//
// Synthetic video clips for training and evaluation. Three motion models;
// every clip is deterministic given its seed, values lie in [0, 1], and
// spatial frequencies reach half Nyquist so x4 downsampling genuinely
// destroys detail that temporal aggregation can recover.

#pragma once

#include <cmath>

#include "../core/rng.hpp"
#include "../core/tensor.hpp"

namespace vsr {

enum class MotionModel { translating_texture, rotating_gradient, bouncing_shapes };

inline MotionModel motion_from_name(const std::string& s) {
    if (s == "translating-texture") return MotionModel::translating_texture;
    if (s == "rotating-gradient") return MotionModel::rotating_gradient;
    if (s == "bouncing-shapes") return MotionModel::bouncing_shapes;
    throw std::invalid_argument("unknown motion model '" + s + "'");
}

inline const char* motion_name(MotionModel m) {
    switch (m) {
        case MotionModel::translating_texture: return "translating-texture";
        case MotionModel::rotating_gradient: return "rotating-gradient";
        case MotionModel::bouncing_shapes: return "bouncing-shapes";
    }
    return "?";
}

struct SynthConfig {
    uint64_t seed = 0;
    int frames = 6;
    int height = 32, width = 32;
    MotionModel motion = MotionModel::translating_texture;
    int max_velocity = 2;  // pixels per frame, integer
};

namespace detail {

constexpr double kTau = 6.283185307179586476925287;

// Periodic band-limited texture: integer wavenumbers up to extent/4
// (half Nyquist), amplitudes normalized so the sum stays in [-1, 1].
struct SinusoidStack {
    struct Wave {
        int kx, ky;
        double amp, phase;
    };
    std::vector<Wave> waves;
    double norm = 1;

    static SinusoidStack random(Rng& rng, int H, int W, int count, int vx, int vy) {
        SinusoidStack s;
        const int kmax_x = std::max(1, W / 4);
        const int kmax_y = std::max(1, H / 4);
        for (int i = 0; i < count; ++i) {
            Wave w;
            w.kx = static_cast<int>(rng.uniform_int(-kmax_x, kmax_x));
            w.ky = static_cast<int>(rng.uniform_int(-kmax_y, kmax_y));
            if (w.kx == 0 && w.ky == 0) w.kx = 1;
            if (i == 0) w.kx = kmax_x;  // keep energy at half Nyquist
            const double k = std::hypot(w.kx, w.ky);
            w.amp = rng.uniform(0.4, 1.0) / (1.0 + 0.25 * k * k);
            w.phase = rng.uniform(0.0, kTau);
            s.waves.push_back(w);
        }
        // enforce the adjacent-frame correlation invariant: damp waves whose
        // per-frame phase advance decorrelates them until NCC clears 0.85
        auto ncc = [&]() {
            double num = 0, den = 0;
            for (const auto& w : s.waves) {
                const double dphi = kTau * (static_cast<double>(w.kx) * vx / W + static_cast<double>(w.ky) * vy / H);
                num += w.amp * w.amp * std::cos(dphi);
                den += w.amp * w.amp;
            }
            return num / den;
        };
        for (int iter = 0; iter < 40 && ncc() < 0.85; ++iter) {
            for (auto& w : s.waves) {
                const double dphi = kTau * (static_cast<double>(w.kx) * vx / W + static_cast<double>(w.ky) * vy / H);
                if (std::cos(dphi) < 0.6) w.amp *= 0.7;
            }
        }
        double total = 0;
        for (const auto& w : s.waves) total += w.amp;
        s.norm = total > 0 ? total : 1;
        return s;
    }

    double eval(double x, double y, int W, int H) const {
        double v = 0;
        for (const auto& w : waves) v += w.amp * std::sin(kTau * (w.kx * x / W + w.ky * y / H) + w.phase);
        return v / norm;  // in [-1, 1]
    }
};

}  // namespace detail

inline Video synth_clip(const SynthConfig& cfg) {
    require(cfg.frames >= 1, "synth_clip: need at least one frame");
    require(cfg.height >= 8 && cfg.width >= 8,
            "synth_clip: degenerate size " + std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
    require(cfg.max_velocity >= 0, "synth_clip: negative velocity range");

    const int L = cfg.frames, H = cfg.height, W = cfg.width;
    Video clip({L, H, W, 3});
    Rng rng(splitmix64(cfg.seed ^ 0x73796e7468ULL));

    switch (cfg.motion) {
        case MotionModel::translating_texture: {
            const int vmax = std::max(1, cfg.max_velocity);
            const int vx = static_cast<int>(rng.uniform_int(1, vmax));
            const int vy = static_cast<int>(rng.uniform_int(0, vmax));
            detail::SinusoidStack tex[3];
            for (auto& t : tex) t = detail::SinusoidStack::random(rng, H, W, 12, vx, vy);
            for (int f = 0; f < L; ++f)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        for (int c = 0; c < 3; ++c)
                            clip.at4(f, y, x, c) = static_cast<float>(
                                0.5 + 0.5 * tex[c].eval(x - static_cast<double>(vx) * f,
                                                        y - static_cast<double>(vy) * f, W, H));
            break;
        }
        case MotionModel::rotating_gradient: {
            // slow rotation of a low-frequency wave keeps adjacent frames
            // strongly correlated while still moving
            const double k0 = rng.uniform(1.0, 2.0);
            const double theta0 = rng.uniform(0.0, detail::kTau);
            const double dtheta = rng.uniform(0.03, 0.08);
            const double phase[3] = {rng.uniform(0.0, detail::kTau), rng.uniform(0.0, detail::kTau),
                                     rng.uniform(0.0, detail::kTau)};
            for (int f = 0; f < L; ++f) {
                const double th = theta0 + dtheta * f;
                const double kx = k0 * std::cos(th), ky = k0 * std::sin(th);
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        for (int c = 0; c < 3; ++c)
                            clip.at4(f, y, x, c) = static_cast<float>(
                                0.5 + 0.5 * std::sin(detail::kTau * (kx * x / W + ky * y / H) + phase[c]));
            }
            break;
        }
        case MotionModel::bouncing_shapes: {
            struct Blob {
                double x, y, vx, vy, sigma, amp[3];
            };
            std::vector<Blob> blobs(4);
            for (auto& b : blobs) {
                b.x = rng.uniform(0.2 * W, 0.8 * W);
                b.y = rng.uniform(0.2 * H, 0.8 * H);
                const double vm = std::max(0.5, static_cast<double>(cfg.max_velocity));
                b.vx = rng.uniform(-vm, vm);
                b.vy = rng.uniform(-vm, vm);
                b.sigma = rng.uniform(std::min(W, H) / 16.0, std::min(W, H) / 6.0);
                for (auto& a : b.amp) a = rng.uniform(0.3, 0.8);
            }
            for (int f = 0; f < L; ++f) {
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        for (int c = 0; c < 3; ++c) {
                            double v = 0.08;
                            for (const auto& b : blobs) {
                                // reflect position into [0, extent)
                                auto reflect = [](double p, double extent) {
                                    const double period = 2.0 * extent;
                                    double m = std::fmod(p, period);
                                    if (m < 0) m += period;
                                    return m < extent ? m : period - m;
                                };
                                const double bx = reflect(b.x + b.vx * f, W - 1);
                                const double by = reflect(b.y + b.vy * f, H - 1);
                                const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                                v += b.amp[c] * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
                            }
                            clip.at4(f, y, x, c) = static_cast<float>(std::min(1.0, std::max(0.0, v)));
                        }
            }
            break;
        }
    }
    return clip;
}

}  // namespace vsr
