// SPDX-License-Identifier: Apache-2.0
//
// Deterministic evaluation helpers shared by the pipeline tests and the
// acceptance suite: fixed-draw loss measurements so before/after training
// comparisons are free of sampling noise, plus dataset construction.

#pragma once

#include <vsr/vsr.hpp>

namespace vsrtest {

using namespace vsr;

inline Dataset make_synth_dataset(int clips, int hr_size, int frames, uint64_t seed,
                                  MotionModel motion = MotionModel::translating_texture) {
    Dataset data;
    for (int i = 0; i < clips; ++i) {
        SynthConfig cfg;
        cfg.seed = splitmix64(seed + 1000003ULL * static_cast<uint64_t>(i));
        cfg.frames = frames;
        cfg.height = hr_size;
        cfg.width = hr_size;
        cfg.motion = motion;
        ClipPair clip;
        clip.name = "clip" + std::to_string(i);
        clip.gt = synth_clip(cfg);
        clip.lr = bicubic_down(clip.gt, 4);
        data.push_back(std::move(clip));
    }
    return data;
}

// mean Charbonnier of the upscaler against ground truth
inline double eval_upscaler_loss(Model& m, const Dataset& data, double eps = 1e-3) {
    double acc = 0;
    for (const auto& clip : data) acc += charbonnier(m.upscaler.forward(clip.lr, false), clip.gt, eps);
    return acc / static_cast<double>(data.size());
}

// mean Charbonnier of the plain autoencoder round trip
inline double eval_autoencoder_loss(Model& m, const Dataset& data, double eps = 1e-3) {
    double acc = 0;
    for (const auto& clip : data) {
        auto enc = m.vae_enc.forward(clip.gt, false);
        std::vector<Tensor> g;
        if (m.vae_dec.mode() != CondMode::plain) {
            const int L = enc.latent.shape[0], Hl = enc.latent.shape[1], Wl = enc.latent.shape[2];
            g.emplace_back(std::vector<int>{L, Hl, Wl, m.vae_dec.guidance_channels(0)});
            g.emplace_back(std::vector<int>{L, 2 * Hl, 2 * Wl, m.vae_dec.guidance_channels(1)});
            g.emplace_back(std::vector<int>{L, 4 * Hl, 4 * Wl, m.vae_dec.guidance_channels(2)});
        }
        acc += charbonnier(m.vae_dec.forward(enc.latent, g, false), clip.gt, eps);
    }
    return acc / static_cast<double>(data.size());
}

// epsilon-prediction loss over a fixed trailing set of (t, eps) draws;
// optionally with guidance zeroed to measure its contribution
inline double eval_diffusion_loss(Model& m, const Dataset& data, int draws_per_clip, uint64_t seed,
                                  bool zero_guidance = false) {
    Rng rng(splitmix64(seed ^ 0x6576616cULL));
    double acc = 0;
    int n = 0;
    for (const auto& clip : data) {
        Tensor z0 = m.vae_enc.forward(clip.gt, false).latent;
        z0 *= static_cast<float>(m.cfg.latent_scale);
        GuidanceMaps G;
        if (m.unet.mode() != CondMode::plain) {
            Tensor z_u = m.vae_enc.forward(m.upscaler.forward(clip.lr, false), false).latent;
            G = m.latenc.forward(z_u, nullptr, false, true, false);
            if (zero_guidance)
                for (auto& g : G.unet) g.zero();
        }
        for (int d = 0; d < draws_per_clip; ++d) {
            const int t = static_cast<int>(rng.uniform_int(1, m.sched.T()));
            Tensor eps = rng.randn<float>(z0.shape);
            Tensor z_t = add_noise(z0, eps, t, m.sched);
            Tensor eps_hat = m.unet.forward(z_t, t, G.unet, false);
            acc += mse(eps_hat, eps);
            ++n;
        }
    }
    return acc / n;
}

// mean Charbonnier of guided reconstruction from ground-truth latents
inline double eval_guided_recon_loss(Model& m, const Dataset& data, double eps = 1e-3) {
    double acc = 0;
    for (const auto& clip : data) {
        auto enc_u = m.vae_enc.forward(m.upscaler.forward(clip.lr, false), false);
        GuidanceMaps G = m.latenc.forward(enc_u.latent, &enc_u.features, false, false, true);
        Tensor z_gt = m.vae_enc.forward(clip.gt, false).latent;
        acc += charbonnier(m.vae_dec.forward(z_gt, G.vae, false), clip.gt, eps);
    }
    return acc / static_cast<double>(data.size());
}

// mean PSNR of full inference over a dataset
inline double eval_pipeline_psnr(Model& m, const Dataset& data, int steps, uint64_t seed) {
    double acc = 0;
    for (size_t i = 0; i < data.size(); ++i)
        acc += psnr(infer(m, data[i].lr, steps, seed + i).x_h, data[i].gt).clip_mean;
    return acc / static_cast<double>(data.size());
}

inline double eval_pipeline_tc(Model& m, const Dataset& data, int steps, uint64_t seed) {
    double acc = 0;
    for (size_t i = 0; i < data.size(); ++i)
        acc += temporal_consistency(infer(m, data[i].lr, steps, seed + i).x_h, data[i].gt).clip_mean;
    return acc / static_cast<double>(data.size());
}

// mean PSNR of the bicubic interpolation baseline
inline double eval_bicubic_psnr(const Dataset& data) {
    double acc = 0;
    for (const auto& clip : data) acc += psnr(bicubic_up(clip.lr, 4), clip.gt).clip_mean;
    return acc / static_cast<double>(data.size());
}

inline double eval_bicubic_tc(const Dataset& data) {
    double acc = 0;
    for (const auto& clip : data) acc += temporal_consistency(bicubic_up(clip.lr, 4), clip.gt).clip_mean;
    return acc / static_cast<double>(data.size());
}

}  // namespace vsrtest
