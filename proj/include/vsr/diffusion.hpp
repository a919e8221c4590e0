// SPDX-License-Identifier: Apache-2.0
//
// Linear-beta noise schedule, forward noising, epsilon-prediction loss and
// the two reverse samplers (ancestral and deterministic). Timesteps are
// 1-indexed; t = 0 means clean, with alpha_bar(0) == 1. Schedule tables
// are kept in double and cast at the point of use.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace vsr {

enum class BetaSpace { linear, sqrt_linear };

struct SchedulerConfig {
    double beta_1 = 0.00085;
    double beta_T = 0.0120;
    int T = 1000;
    BetaSpace space = BetaSpace::linear;
};

struct NoiseSchedule {
    SchedulerConfig cfg;
    std::vector<double> betas, alphas, alpha_bars;  // index i holds t = i+1

    int T() const { return cfg.T; }
    double beta(int t) const { return betas[check(t)]; }
    double alpha(int t) const { return alphas[check(t)]; }
    double alpha_bar(int t) const {
        if (t == 0) return 1.0;
        return alpha_bars[check(t)];
    }

private:
    size_t check(int t) const {
        require(t >= 1 && t <= cfg.T,
                "timestep t=" + std::to_string(t) + " outside [1, " + std::to_string(cfg.T) + "]");
        return static_cast<size_t>(t - 1);
    }
};

inline NoiseSchedule build_schedule(const SchedulerConfig& cfg) {
    require(cfg.T >= 1, "scheduler: T must be >= 1");
    require(cfg.beta_1 > 0 && cfg.beta_1 <= cfg.beta_T && cfg.beta_T < 1,
            "scheduler: need 0 < beta_1 <= beta_T < 1");
    NoiseSchedule s;
    s.cfg = cfg;
    s.betas.resize(static_cast<size_t>(cfg.T));
    s.alphas.resize(static_cast<size_t>(cfg.T));
    s.alpha_bars.resize(static_cast<size_t>(cfg.T));
    double prod = 1.0;
    for (int t = 1; t <= cfg.T; ++t) {
        const double frac = cfg.T == 1 ? 0.0 : static_cast<double>(t - 1) / (cfg.T - 1);
        double b;
        if (cfg.space == BetaSpace::linear) {
            b = cfg.beta_1 + frac * (cfg.beta_T - cfg.beta_1);
        } else {
            const double r = std::sqrt(cfg.beta_1) + frac * (std::sqrt(cfg.beta_T) - std::sqrt(cfg.beta_1));
            b = r * r;
        }
        s.betas[static_cast<size_t>(t - 1)] = b;
        s.alphas[static_cast<size_t>(t - 1)] = 1.0 - b;
        prod *= 1.0 - b;
        s.alpha_bars[static_cast<size_t>(t - 1)] = prod;
    }
    return s;
}

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
template <class T>
TensorT<T> add_noise(const TensorT<T>& z0, const TensorT<T>& eps, int t, const NoiseSchedule& sched) {
    require(z0.same_shape(eps), "add_noise: z0/eps shape mismatch");
    require(t >= 1 && t <= sched.T(),
            "add_noise: timestep t=" + std::to_string(t) + " outside [1, " + std::to_string(sched.T()) + "]");
    const double ab = sched.alpha_bar(t);
    const T a = static_cast<T>(std::sqrt(ab));
    const T b = static_cast<T>(std::sqrt(1.0 - ab));
    TensorT<T> out(z0.shape);
    for (long long i = 0; i < out.numel(); ++i) out[i] = a * z0[i] + b * eps[i];
    return out;
}

// One ancestral reverse step. No noise is injected at t = 1.
template <class T>
TensorT<T> ddpm_step(const TensorT<T>& z_t, const TensorT<T>& eps_hat, int t, const NoiseSchedule& sched, Rng& rng) {
    require(z_t.same_shape(eps_hat), "ddpm_step: z/eps shape mismatch");
    const double beta = sched.beta(t);
    const double ab = sched.alpha_bar(t);
    const T coef = static_cast<T>(beta / std::sqrt(1.0 - ab));
    const T inv_sqrt_alpha = static_cast<T>(1.0 / std::sqrt(sched.alpha(t)));
    TensorT<T> out(z_t.shape);
    for (long long i = 0; i < out.numel(); ++i) out[i] = inv_sqrt_alpha * (z_t[i] - coef * eps_hat[i]);
    if (t > 1) {
        const T sigma = static_cast<T>(std::sqrt(beta));
        for (auto& v : out.data) v += sigma * static_cast<T>(rng.normal());
    }
    return out;
}

// Strictly decreasing timestep subsequence from t_start down, ending just
// above 0.
inline std::vector<int> ddim_timesteps(int steps, int t_start) {
    require(steps >= 1 && steps <= t_start, "ddim: steps must be in [1, t_start]");
    std::vector<int> ts(static_cast<size_t>(steps));
    for (int i = 0; i < steps; ++i)
        ts[static_cast<size_t>(i)] = t_start - static_cast<int>(static_cast<long long>(i) * t_start / steps);
    return ts;
}

// Deterministic sampler (eta = 0). eps_fn(z_t, t) predicts the noise.
// t_start < T runs only the tail of the reverse process (the input must
// then be a sample of q(z_{t_start} | .)).
template <class T>
TensorT<T> ddim_sample(const TensorT<T>& z_T, const std::function<TensorT<T>(const TensorT<T>&, int)>& eps_fn,
                       int steps, const NoiseSchedule& sched, int t_start = -1) {
    if (t_start < 0) t_start = sched.T();
    require(t_start >= 1 && t_start <= sched.T(), "ddim: t_start out of range");
    const std::vector<int> ts = ddim_timesteps(steps, t_start);
    TensorT<T> z = z_T;
    for (size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const int t_prev = (i + 1 < ts.size()) ? ts[i + 1] : 0;
        const double ab = sched.alpha_bar(t);
        const double ab_prev = sched.alpha_bar(t_prev);
        const T inv_sqrt_ab = static_cast<T>(1.0 / std::sqrt(ab));
        const T sq1m = static_cast<T>(std::sqrt(1.0 - ab));
        const T sq_abp = static_cast<T>(std::sqrt(ab_prev));
        const T sq1m_prev = static_cast<T>(std::sqrt(1.0 - ab_prev));
        TensorT<T> eps_hat = eps_fn(z, t);
        require(eps_hat.same_shape(z), "ddim: eps_fn returned wrong shape");
        for (long long e = 0; e < z.numel(); ++e) {
            const T z0_pred = inv_sqrt_ab * (z[e] - sq1m * eps_hat[e]);
            z[e] = sq_abp * z0_pred + sq1m_prev * eps_hat[e];
        }
    }
    return z;
}

// Epsilon-prediction training objective: t uniform in [1, T], unit
// Gaussian eps, squared error between predicted and injected noise.
// grad_eps_hat is the gradient of the loss wrt the prediction, ready to
// feed a network backward pass.
template <class T>
struct DiffusionLossSample {
    double loss = 0;
    int t = 0;
    TensorT<T> eps, z_t, eps_hat, grad_eps_hat;
};

template <class T>
DiffusionLossSample<T> diffusion_loss(const std::function<TensorT<T>(const TensorT<T>&, int)>& eps_fn,
                                      const TensorT<T>& z0, Rng& rng, const NoiseSchedule& sched) {
    DiffusionLossSample<T> out;
    out.t = static_cast<int>(rng.uniform_int(1, sched.T()));
    out.eps = rng.template randn<T>(z0.shape);
    out.z_t = add_noise(z0, out.eps, out.t, sched);
    out.eps_hat = eps_fn(out.z_t, out.t);
    require(out.eps_hat.same_shape(z0), "diffusion_loss: eps_fn returned wrong shape");
    double acc = 0;
    out.grad_eps_hat = TensorT<T>(z0.shape);
    const double n = static_cast<double>(z0.numel());
    for (long long i = 0; i < z0.numel(); ++i) {
        const double d = static_cast<double>(out.eps_hat[i]) - static_cast<double>(out.eps[i]);
        acc += d * d;
        out.grad_eps_hat[i] = static_cast<T>(2.0 * d / n);
    }
    out.loss = acc / n;
    return out;
}

}  // namespace vsr
