// SPDX-License-Identifier: Apache-2.0
//
// Training orchestration. Stages:
//   0  backbone pretraining (toy stand-in for a pretrained model): first
//      the autoencoder on reconstruction, then the UNet on unconditional
//      latent denoising, both with conditioning slots at identity init
//   1  video upscaler, Charbonnier loss against ground truth
//   2  UNet-side adapters + latent encoder, epsilon-prediction loss with
//      guidance from the upscaled-LR latent path
//   3  VAE-decoder-side adapters, guided reconstruction of GT latents
//   4  video refiner on (decoded, upscaled, GT) triples from full inference
// Each stage freezes every parameter group except its own; checkpoints
// carry parameters, optimizer state and the trainer RNG so a resumed run
// reproduces the uninterrupted trajectory.

#pragma once

#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <set>

#include "core/loss.hpp"
#include "data/checkpoint.hpp"
#include "errors.hpp"
#include "nets/model.hpp"

namespace vsr {

struct StageConfig {
    int stage = 1;
    int steps = 200;
    int batch_clips = 1;
    double lr = 5e-5;
    uint64_t seed = 0;
    double charbonnier_eps = 1e-3;
    int infer_steps = 50;  // sampling steps when stage 4 builds its decoded inputs
    double weight_decay = 0.0;
    bool augment_flips = true;  // random dihedral flips of (GT, LR) pairs
};

struct ClipPair {
    std::string name;
    Video gt, lr;
};
using Dataset = std::vector<ClipPair>;

struct FreezeMask {
    std::set<ParamGroup> trainable;
};

// Phase matters only for stage 0 (0 = autoencoder, 1 = unconditional UNet).
inline FreezeMask stage_freeze_mask(int stage, int phase = 0) {
    switch (stage) {
        case 0: return {phase == 0 ? std::set<ParamGroup>{ParamGroup::vae_backbone}
                                   : std::set<ParamGroup>{ParamGroup::unet_backbone}};
        case 1: return {{ParamGroup::upscaler}};
        case 2: return {{ParamGroup::unet_adapters, ParamGroup::latent_encoder}};
        case 3: return {{ParamGroup::vae_adapters}};
        case 4: return {{ParamGroup::refiner}};
    }
    throw std::invalid_argument("unknown training stage " + std::to_string(stage));
}

// ---- optimizer ------------------------------------------------------------

// Adam with decoupled weight decay (decay defaults to zero).
template <class T>
class AdamWT {
public:
    double lr = 5e-5, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
    long long step_count = 0;

    void step(ParamRefsT<T>& params) {
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (auto& [name, p] : params) {
            if (p->frozen) continue;
            auto& [m, v] = slot(name, p->value.shape);
            for (long long i = 0; i < p->value.numel(); ++i) {
                const double g = static_cast<double>(p->grad[i]);
                const double mi = beta1 * m[i] + (1.0 - beta1) * g;
                const double vi = beta2 * v[i] + (1.0 - beta2) * g * g;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps);
                double val = static_cast<double>(p->value[i]);
                val -= lr * update + lr * weight_decay * val;
                p->value[i] = static_cast<T>(val);
            }
        }
    }

    std::map<std::string, std::pair<TensorT<T>, TensorT<T>>>& state() { return state_; }

private:
    std::map<std::string, std::pair<TensorT<T>, TensorT<T>>> state_;

    std::pair<TensorT<T>, TensorT<T>>& slot(const std::string& name, const std::vector<int>& shape) {
        auto it = state_.find(name);
        if (it == state_.end())
            it = state_.emplace(name, std::make_pair(TensorT<T>(shape), TensorT<T>(shape))).first;
        return it->second;
    }
};

using AdamW = AdamWT<float>;

// ---- inference ------------------------------------------------------------

struct InferResult {
    Video x_h, x_u, x_d;
};

inline InferResult infer(Model& model, const Video& x_lr, int steps, uint64_t seed) {
    require_rank(x_lr, 4, "infer input");
    InferResult out;
    out.x_u = model.upscaler.forward(x_lr, false);
    auto enc = model.vae_enc.forward(out.x_u, false);
    GuidanceMaps G;
    const bool unet_g = model.unet.mode() != CondMode::plain;
    const bool vae_g = model.vae_dec.mode() != CondMode::plain;
    if (unet_g || vae_g) G = model.latenc.forward(enc.latent, &enc.features, false, unet_g, vae_g);

    Rng rng(splitmix64(seed ^ 0x696e666572ULL));
    // noise the LR-path latent to noise_strength of the schedule and
    // restore from there
    const int t_start = std::max(1, static_cast<int>(std::lround(model.cfg.noise_strength * model.sched.T())));
    Tensor z_seed = scale(enc.latent, static_cast<float>(model.cfg.latent_scale));
    Tensor z_start = add_noise(z_seed, rng.randn<float>(z_seed.shape), t_start, model.sched);
    auto eps_fn = [&](const Tensor& z, int t) { return model.unet.forward(z, t, G.unet, false); };
    Tensor z0 = ddim_sample<float>(z_start, eps_fn, std::min(steps, t_start), model.sched, t_start);
    z0 *= static_cast<float>(1.0 / model.cfg.latent_scale);  // back to raw latent units
    out.x_d = model.vae_dec.forward(z0, G.vae, false);
    out.x_h = model.refiner.forward(out.x_d, out.x_u, false);
    return out;
}

// Unit-variance scale for the diffusion latent space, estimated over the
// dataset with the current (pretrained) encoder.
inline double estimate_latent_scale(Model& model, const Dataset& data) {
    double sum = 0, sumsq = 0;
    long long n = 0;
    const size_t clips = std::min<size_t>(data.size(), 8);
    for (size_t i = 0; i < clips; ++i) {
        Tensor z = model.vae_enc.forward(data[i].gt, false).latent;
        for (float v : z.data) {
            sum += v;
            sumsq += static_cast<double>(v) * v;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sumsq / static_cast<double>(n) - mean * mean;
    return 1.0 / std::sqrt(std::max(var, 1e-12));
}

// ---- trainer ---------------------------------------------------------------

struct TrainLogEntry {
    int step = 0, stage = 0;
    double loss = 0, wall_ms = 0;
};

class Trainer {
public:
    Model& model;
    StageConfig cfg;
    AdamW opt;
    Rng rng;
    int step_index = 0;
    std::vector<TrainLogEntry> log;

    Trainer(Model& m, const StageConfig& c) : model(m), cfg(c), rng(splitmix64(c.seed ^ 0x747261696eULL)) {
        opt.lr = c.lr;
        opt.weight_decay = c.weight_decay;
    }

    // Runs the whole stage. Stage 0 splits its budget between the two
    // pretraining phases. Returns the final checkpoint.
    Checkpoint run(const Dataset& data, std::ostream* log_stream = nullptr) {
        require(!data.empty(), "train: empty dataset");
        validate_dataset(data);
        if (cfg.stage == 0) {
            // Backbone pretraining happens before module insertion, so run
            // it on a plain-slot twin (identical function and gradients at
            // identity init, none of the attention overhead) and copy the
            // trained groups back.
            ModelConfig pcfg = model.cfg;
            pcfg.unet_mode = CondMode::plain;
            pcfg.vae_mode = CondMode::plain;
            Model twin;
            twin.init(pcfg, 0);
            {
                std::map<std::string, Tensor> cur;
                for (auto& [name, p] : model.params()) cur.emplace(name, p->value);
                twin.load_matching(cur);
            }
            const int steps_a = cfg.steps / 2;
            run_phase(twin, data, 0, steps_a, log_stream);
            twin.cfg.latent_scale = estimate_latent_scale(twin, data);
            run_phase(twin, data, 1, cfg.steps - steps_a, log_stream);
            {
                std::map<std::string, Tensor> trained;
                for (auto& [name, p] : twin.params()) trained.emplace(name, p->value);
                model.load_matching(trained);
            }
            model.cfg.latent_scale = twin.cfg.latent_scale;
            model.set_trainable_groups(stage_freeze_mask(0, 1).trainable);
        } else if (cfg.stage == 4) {
            prepare_stage4(data);
            run_phase(model, data, 0, cfg.steps, log_stream);
        } else {
            if (cfg.stage == 2 && model.cfg.latent_scale == 1.0)
                model.cfg.latent_scale = estimate_latent_scale(model, data);
            run_phase(model, data, 0, cfg.steps, log_stream);
        }
        return snapshot();
    }

    Checkpoint snapshot() {
        Checkpoint ckpt;
        ckpt.stage = cfg.stage;
        ckpt.config = model.cfg.to_kv();
        ckpt.config["trainer.step"] = std::to_string(step_index);
        ckpt.config["trainer.rng.seed"] = std::to_string(rng.state().seed);
        ckpt.config["trainer.rng.counter"] = std::to_string(rng.state().counter);
        ckpt.config["opt.step"] = std::to_string(opt.step_count);
        for (auto& [name, p] : model.params()) {
            ckpt.tensors.emplace_back(name, p->value);
            ckpt.frozen[name] = p->frozen;
        }
        for (const auto& [name, mv] : opt.state()) {
            ckpt.tensors.emplace_back("opt.m." + name, mv.first);
            ckpt.tensors.emplace_back("opt.v." + name, mv.second);
        }
        return ckpt;
    }

    // Restores optimizer/rng/step state saved mid-stage by snapshot().
    void resume_from(const Checkpoint& ckpt) {
        auto getc = [&](const char* k) -> std::string {
            auto it = ckpt.config.find(k);
            require(it != ckpt.config.end(), std::string("resume: checkpoint lacks '") + k + "'");
            return it->second;
        };
        step_index = std::stoi(getc("trainer.step"));
        rng.set_state({std::stoull(getc("trainer.rng.seed")), std::stoull(getc("trainer.rng.counter"))});
        opt.step_count = std::stoll(getc("opt.step"));
        for (const auto& [name, t] : ckpt.tensors) {
            if (name.rfind("opt.m.", 0) == 0) opt.state()[name.substr(6)].first = t;
            else if (name.rfind("opt.v.", 0) == 0) opt.state()[name.substr(6)].second = t;
        }
    }

private:
    std::vector<InferResult> stage4_inputs_;

    void validate_dataset(const Dataset& data) const {
        for (const auto& clip : data) {
            require(clip.gt.rank() == 4 && clip.lr.rank() == 4, "train: clips must be rank-4 videos");
            require(clip.gt.shape[0] == model.cfg.frames,
                    "train: clip '" + clip.name + "' has " + std::to_string(clip.gt.shape[0]) + " frames, expected " +
                        std::to_string(model.cfg.frames));
            require(clip.lr.shape[0] == clip.gt.shape[0], "train: clip '" + clip.name + "' frame-count mismatch");
            require(clip.lr.shape[1] * model.cfg.upscaler.factor == clip.gt.shape[1] &&
                        clip.lr.shape[2] * model.cfg.upscaler.factor == clip.gt.shape[2],
                    "train: clip '" + clip.name + "' LR/GT sizes inconsistent with factor");
        }
    }

    // joint horizontal/vertical flips of a (GT, LR) pair; cheap synthetic
    // augmentation, drawn from the trainer RNG so runs stay reproducible
    static Video flip_video(const Video& v, bool flip_y, bool flip_x) {
        if (!flip_y && !flip_x) return v;
        const int L = v.shape[0], H = v.shape[1], W = v.shape[2], C = v.shape[3];
        Video out(v.shape);
        for (int f = 0; f < L; ++f)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    for (int c = 0; c < C; ++c)
                        out.at4(f, flip_y ? H - 1 - y : y, flip_x ? W - 1 - x : x, c) = v.at4(f, y, x, c);
        return out;
    }

    void run_phase(Model& m, const Dataset& data, int phase, int steps, std::ostream* log_stream) {
        m.set_trainable_groups(stage_freeze_mask(cfg.stage, phase).trainable);
        ParamRefsT<float> refs = m.params();
        const bool augment = cfg.augment_flips && cfg.stage != 4;  // stage 4 reuses fixed decoded inputs
        for (int s = 0; s < steps; ++s) {
            const auto t0 = std::chrono::steady_clock::now();
            m.zero_grad();
            double loss = 0;
            for (int b = 0; b < cfg.batch_clips; ++b) {
                const int idx = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(data.size()) - 1));
                if (augment) {
                    const bool fy = rng.uniform() < 0.5, fx = rng.uniform() < 0.5;
                    if (fy || fx) {
                        ClipPair flipped;
                        flipped.name = data[static_cast<size_t>(idx)].name;
                        flipped.gt = flip_video(data[static_cast<size_t>(idx)].gt, fy, fx);
                        flipped.lr = flip_video(data[static_cast<size_t>(idx)].lr, fy, fx);
                        loss += step_loss(m, flipped, idx, phase);
                        continue;
                    }
                }
                loss += step_loss(m, data[static_cast<size_t>(idx)], idx, phase);
            }
            loss /= cfg.batch_clips;
            opt.step(refs);
            ++step_index;
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            log.push_back({step_index, cfg.stage, loss, ms});
            if (log_stream)
                (*log_stream) << "step=" << step_index << " stage=" << cfg.stage << " loss=" << loss
                              << " ms=" << ms << "\n";
        }
    }

    double step_loss(Model& m, const ClipPair& clip, int clip_index, int phase) {
        switch (cfg.stage) {
            case 0: return phase == 0 ? stage0_vae(m, clip) : stage0_unet(m, clip);
            case 1: return stage1(m, clip);
            case 2: return stage2(m, clip);
            case 3: return stage3(m, clip);
            case 4: return stage4(m, clip, clip_index);
        }
        throw std::invalid_argument("unknown training stage " + std::to_string(cfg.stage));
    }

    double stage0_vae(Model& m, const ClipPair& clip) {
        auto enc = m.vae_enc.forward(clip.gt, true);
        Tensor x_rec = m.vae_dec.forward(enc.latent, zero_vae_guidance(m, enc.latent), true);
        const double loss = charbonnier(x_rec, clip.gt, cfg.charbonnier_eps);
        auto [g_z, g_G] = m.vae_dec.backward(charbonnier_backward(x_rec, clip.gt, cfg.charbonnier_eps));
        m.vae_enc.backward(g_z);
        return loss;
    }

    double stage0_unet(Model& m, const ClipPair& clip) {
        Tensor z0 = m.vae_enc.forward(clip.gt, false).latent;
        z0 *= static_cast<float>(m.cfg.latent_scale);
        auto eps_fn = [&](const Tensor& z, int t) { return m.unet.forward(z, t, zero_unet_guidance(m, z), true); };
        auto sample = diffusion_loss<float>(eps_fn, z0, rng, m.sched);
        m.unet.backward(sample.grad_eps_hat);
        return sample.loss;
    }

    double stage1(Model& m, const ClipPair& clip) {
        Tensor x_u = m.upscaler.forward(clip.lr, true);
        const double loss = charbonnier(x_u, clip.gt, cfg.charbonnier_eps);
        m.upscaler.backward(charbonnier_backward(x_u, clip.gt, cfg.charbonnier_eps));
        return loss;
    }

    double stage2(Model& m, const ClipPair& clip) {
        Tensor x_u = m.upscaler.forward(clip.lr, false);
        Tensor z_u = m.vae_enc.forward(x_u, false).latent;
        GuidanceMaps G = m.latenc.forward(z_u, nullptr, true, /*need_unet=*/true, /*need_vae=*/false);
        Tensor z0 = m.vae_enc.forward(clip.gt, false).latent;
        z0 *= static_cast<float>(m.cfg.latent_scale);
        auto eps_fn = [&](const Tensor& z, int t) { return m.unet.forward(z, t, G.unet, true); };
        auto sample = diffusion_loss<float>(eps_fn, z0, rng, m.sched);
        auto [g_z, g_G] = m.unet.backward(sample.grad_eps_hat);
        GuidanceMaps grads;
        grads.unet = std::move(g_G);
        m.latenc.backward(grads);
        return sample.loss;
    }

    double stage3(Model& m, const ClipPair& clip) {
        Tensor x_u = m.upscaler.forward(clip.lr, false);
        auto enc_u = m.vae_enc.forward(x_u, false);
        GuidanceMaps G = m.latenc.forward(enc_u.latent, &enc_u.features, true, /*need_unet=*/false,
                                              /*need_vae=*/true);
        Tensor z_gt = m.vae_enc.forward(clip.gt, false).latent;
        Tensor x_dec = m.vae_dec.forward(z_gt, G.vae, true);
        const double loss = charbonnier(x_dec, clip.gt, cfg.charbonnier_eps);
        auto [g_z, g_G] = m.vae_dec.backward(charbonnier_backward(x_dec, clip.gt, cfg.charbonnier_eps));
        GuidanceMaps grads;
        grads.vae = std::move(g_G);
        m.latenc.backward(grads);
        return loss;
    }

    void prepare_stage4(const Dataset& data) {
        stage4_inputs_.clear();
        stage4_inputs_.reserve(data.size());
        for (size_t i = 0; i < data.size(); ++i)
            stage4_inputs_.push_back(infer(model, data[i].lr, cfg.infer_steps, cfg.seed + i));
    }

    double stage4(Model& m, const ClipPair& clip, int clip_index) {
        const InferResult& in = stage4_inputs_[static_cast<size_t>(clip_index)];
        Tensor x_h = model.refiner.forward(in.x_d, in.x_u, true);
        const double loss = charbonnier(x_h, clip.gt, cfg.charbonnier_eps);
        model.refiner.backward(charbonnier_backward(x_h, clip.gt, cfg.charbonnier_eps));
        return loss;
    }

    static std::vector<Tensor> zero_vae_guidance(const Model& m, const Tensor& z) {
        if (m.vae_dec.mode() == CondMode::plain) return {};
        const int L = z.shape[0], Hl = z.shape[1], Wl = z.shape[2];
        std::vector<Tensor> g;
        g.emplace_back(std::vector<int>{L, Hl, Wl, m.vae_dec.guidance_channels(0)});
        g.emplace_back(std::vector<int>{L, 2 * Hl, 2 * Wl, m.vae_dec.guidance_channels(1)});
        g.emplace_back(std::vector<int>{L, 4 * Hl, 4 * Wl, m.vae_dec.guidance_channels(2)});
        return g;
    }
    static std::vector<Tensor> zero_unet_guidance(const Model& m, const Tensor& z) {
        if (m.unet.mode() == CondMode::plain) return {};
        const int L = z.shape[0], Hl = z.shape[1], Wl = z.shape[2];
        std::vector<Tensor> g;
        g.emplace_back(std::vector<int>{L, Hl / 2, Wl / 2, m.unet.guidance_channels(0)});
        g.emplace_back(std::vector<int>{L, Hl, Wl, m.unet.guidance_channels(1)});
        return g;
    }
};

// ---- stage orchestration over checkpoint files -----------------------------

inline std::string stage_ckpt_path(const std::string& dir, int stage) {
    return dir + "/stage" + std::to_string(stage) + ".ckpt";
}

// Stages form a chain; every checkpoint carries the cumulative model state.
inline int stage_prerequisite(int stage) {
    require(stage >= 0 && stage <= 4, "unknown training stage " + std::to_string(stage));
    return stage - 1;
}

inline Checkpoint require_stage_checkpoint(const std::string& dir, int stage) {
    const std::string path = stage_ckpt_path(dir, stage);
    std::ifstream probe(path, std::ios::binary);
    if (!probe)
        throw PrereqError("missing stage " + std::to_string(stage) + " checkpoint (expected '" + path + "')");
    return load_checkpoint(path);
}

// Builds the model for a stage run: fresh for stages 0/1, loaded from the
// prerequisite checkpoints otherwise.
inline Model prepare_stage_model(int stage, const std::string& ckpt_dir, const ModelConfig& cfg, uint64_t seed) {
    Model model;
    model.init(cfg, seed);
    const int prereq = stage_prerequisite(stage);
    if (prereq >= 0) {
        Checkpoint prev = require_stage_checkpoint(ckpt_dir, prereq);
        model.load_matching(prev.tensor_map());
    }
    return model;
}

}  // namespace vsr
