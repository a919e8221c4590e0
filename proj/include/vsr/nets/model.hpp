// SPDX-License-Identifier: Apache-2.0
//
// Aggregate of all networks plus the parameter registry. Parameters are
// addressed by name; the name prefix assigns each to one of the seven
// groups the training stages freeze or train as a unit.

#pragma once

#include <map>
#include <set>
#include <string>

#include "../diffusion.hpp"
#include "latent_encoder.hpp"
#include "refiner.hpp"
#include "unet.hpp"
#include "upscaler.hpp"
#include "vae.hpp"

namespace vsr {

enum class ParamGroup { upscaler, vae_backbone, unet_backbone, latent_encoder, unet_adapters, vae_adapters, refiner };

inline const char* group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::upscaler: return "upscaler";
        case ParamGroup::vae_backbone: return "vae_backbone";
        case ParamGroup::unet_backbone: return "unet_backbone";
        case ParamGroup::latent_encoder: return "latent_encoder";
        case ParamGroup::unet_adapters: return "unet_adapters";
        case ParamGroup::vae_adapters: return "vae_adapters";
        case ParamGroup::refiner: return "refiner";
    }
    return "?";
}

inline ParamGroup group_of(const std::string& name) {
    if (name.rfind("upscaler.", 0) == 0) return ParamGroup::upscaler;
    if (name.rfind("vae.enc.", 0) == 0 || name.rfind("vae.dec.bb.", 0) == 0) return ParamGroup::vae_backbone;
    if (name.rfind("vae.dec.adapt.", 0) == 0) return ParamGroup::vae_adapters;
    if (name.rfind("unet.bb.", 0) == 0) return ParamGroup::unet_backbone;
    if (name.rfind("unet.adapt.", 0) == 0) return ParamGroup::unet_adapters;
    if (name.rfind("latenc.", 0) == 0) return ParamGroup::latent_encoder;
    if (name.rfind("refiner.", 0) == 0) return ParamGroup::refiner;
    throw std::invalid_argument("unknown parameter group for '" + name + "'");
}

struct ModelConfig {
    int frames = 6;
    UpscalerConfig upscaler;
    VaeConfig vae;
    int unet_base = 32;
    int temb_dim = 64;
    WindowSpec window{8, 8};
    SfaConfig sfa;
    TfaConfig tfa;
    CondMode unet_mode = CondMode::sfa_tfa;
    CondMode vae_mode = CondMode::sfa_tfa;
    double refiner_w = 0.5;
    SchedulerConfig sched;
    int infer_steps = 50;
    // diffusion operates on latents scaled to unit variance; estimated
    // from data after backbone pretraining and carried in checkpoints
    double latent_scale = 1.0;
    // inference noises the LR-path latent to this fraction of the schedule
    // and restores from there (1.0 = noise to the very end of the schedule)
    double noise_strength = 0.5;

    static ModelConfig variant(char v) {
        ModelConfig c;
        switch (v) {
            case 'A': c.unet_mode = CondMode::zero_conv; c.vae_mode = CondMode::zero_conv; break;
            case 'B': c.unet_mode = CondMode::sfa; c.vae_mode = CondMode::zero_conv; break;
            case 'C': c.unet_mode = CondMode::sfa_tfa; c.vae_mode = CondMode::zero_conv; break;
            case 'D': break;  // full model
            default: throw std::invalid_argument(std::string("unknown model variant '") + v + "'");
        }
        return c;
    }

    std::map<std::string, std::string> to_kv() const {
        std::map<std::string, std::string> kv;
        kv["frames"] = std::to_string(frames);
        kv["upscaler.width"] = std::to_string(upscaler.width);
        kv["upscaler.window"] = std::to_string(upscaler.window);
        kv["upscaler.heads"] = std::to_string(upscaler.heads);
        kv["upscaler.frame_group"] = std::to_string(upscaler.frame_group);
        kv["upscaler.factor"] = std::to_string(upscaler.factor);
        kv["vae.latent_channels"] = std::to_string(vae.latent_channels);
        kv["vae.c0"] = std::to_string(vae.c0);
        kv["vae.c1"] = std::to_string(vae.c1);
        kv["vae.c2"] = std::to_string(vae.c2);
        kv["unet.base"] = std::to_string(unet_base);
        kv["unet.temb_dim"] = std::to_string(temb_dim);
        kv["window.h"] = std::to_string(window.h);
        kv["window.w"] = std::to_string(window.w);
        kv["sfa.per_channel"] = sfa.per_channel_stats ? "1" : "0";
        kv["tfa.heads"] = std::to_string(tfa.heads);
        kv["tfa.residual"] = tfa.residual ? "1" : "0";
        kv["tfa.out_proj"] = tfa.out_proj ? "1" : "0";
        kv["unet_mode"] = cond_mode_name(unet_mode);
        kv["vae_mode"] = cond_mode_name(vae_mode);
        kv["refiner_w"] = std::to_string(refiner_w);
        kv["sched.beta_1"] = std::to_string(sched.beta_1);
        kv["sched.beta_T"] = std::to_string(sched.beta_T);
        kv["sched.T"] = std::to_string(sched.T);
        kv["sched.space"] = sched.space == BetaSpace::linear ? "linear" : "sqrt_linear";
        kv["infer_steps"] = std::to_string(infer_steps);
        {
            std::ostringstream os;
            os.precision(17);
            os << latent_scale;
            kv["latent_scale"] = os.str();
        }
        kv["noise_strength"] = std::to_string(noise_strength);
        return kv;
    }

    static CondMode mode_from_name(const std::string& s) {
        if (s == "plain") return CondMode::plain;
        if (s == "zero_conv") return CondMode::zero_conv;
        if (s == "sfa") return CondMode::sfa;
        if (s == "sfa_tfa") return CondMode::sfa_tfa;
        throw std::invalid_argument("unknown conditioning mode '" + s + "'");
    }

    static ModelConfig from_kv(const std::map<std::string, std::string>& kv) {
        ModelConfig c;
        auto geti = [&](const char* k, int dflt) { auto it = kv.find(k); return it == kv.end() ? dflt : std::stoi(it->second); };
        auto getd = [&](const char* k, double dflt) { auto it = kv.find(k); return it == kv.end() ? dflt : std::stod(it->second); };
        auto gets = [&](const char* k, std::string dflt) { auto it = kv.find(k); return it == kv.end() ? dflt : it->second; };
        c.frames = geti("frames", c.frames);
        c.upscaler.width = geti("upscaler.width", c.upscaler.width);
        c.upscaler.window = geti("upscaler.window", c.upscaler.window);
        c.upscaler.heads = geti("upscaler.heads", c.upscaler.heads);
        c.upscaler.frame_group = geti("upscaler.frame_group", c.upscaler.frame_group);
        c.upscaler.factor = geti("upscaler.factor", c.upscaler.factor);
        c.vae.latent_channels = geti("vae.latent_channels", c.vae.latent_channels);
        c.vae.c0 = geti("vae.c0", c.vae.c0);
        c.vae.c1 = geti("vae.c1", c.vae.c1);
        c.vae.c2 = geti("vae.c2", c.vae.c2);
        c.unet_base = geti("unet.base", c.unet_base);
        c.temb_dim = geti("unet.temb_dim", c.temb_dim);
        c.window.h = geti("window.h", c.window.h);
        c.window.w = geti("window.w", c.window.w);
        c.sfa.per_channel_stats = geti("sfa.per_channel", 1) != 0;
        c.tfa.heads = geti("tfa.heads", c.tfa.heads);
        c.tfa.residual = geti("tfa.residual", 1) != 0;
        c.tfa.out_proj = geti("tfa.out_proj", 1) != 0;
        c.unet_mode = mode_from_name(gets("unet_mode", "sfa_tfa"));
        c.vae_mode = mode_from_name(gets("vae_mode", "sfa_tfa"));
        c.refiner_w = getd("refiner_w", c.refiner_w);
        c.sched.beta_1 = getd("sched.beta_1", c.sched.beta_1);
        c.sched.beta_T = getd("sched.beta_T", c.sched.beta_T);
        c.sched.T = geti("sched.T", c.sched.T);
        c.sched.space = gets("sched.space", "linear") == "linear" ? BetaSpace::linear : BetaSpace::sqrt_linear;
        c.infer_steps = geti("infer_steps", c.infer_steps);
        c.latent_scale = getd("latent_scale", c.latent_scale);
        c.noise_strength = getd("noise_strength", c.noise_strength);
        return c;
    }
};

template <class T>
struct ModelT {
    ModelConfig cfg;
    UpscalerT<T> upscaler;
    VaeEncoderT<T> vae_enc;
    VaeDecoderT<T> vae_dec;
    LatentEncoderT<T> latenc;
    UnetT<T> unet;
    RefinerT<T> refiner;
    NoiseSchedule sched;

    // Every submodule draws from its own stream, and conditioning slots
    // from yet another, so the backbone weights for a given seed are
    // identical across variant wirings.
    void init(const ModelConfig& config, uint64_t seed) {
        cfg = config;
        sched = build_schedule(cfg.sched);
        Rng r_up(splitmix64(seed ^ 0x75707363ULL));
        Rng r_venc(splitmix64(seed ^ 0x76656e63ULL));
        Rng r_vdec(splitmix64(seed ^ 0x76646563ULL));
        Rng r_latenc(splitmix64(seed ^ 0x6c656e63ULL));
        Rng r_unet(splitmix64(seed ^ 0x756e6574ULL));
        Rng r_refiner(splitmix64(seed ^ 0x72656669ULL));
        Rng r_slots(splitmix64(seed ^ 0x736c6f74ULL));

        upscaler.init(cfg.upscaler, r_up);
        vae_enc.init(cfg.vae, r_venc);
        vae_dec.init(cfg.vae, cfg.vae_mode, r_vdec, r_slots, cfg.window, cfg.sfa, cfg.tfa);
        typename LatentEncoderT<T>::Config lc;
        lc.latent_channels = cfg.vae.latent_channels;
        lc.unet_c1 = 2 * cfg.unet_base;
        lc.unet_c0 = cfg.unet_base;
        lc.vae_c2 = cfg.vae.c2;
        lc.vae_c1 = cfg.vae.c1;
        lc.vae_c0 = cfg.vae.c0;
        lc.enc_c2 = cfg.vae.c2;
        lc.enc_c1 = cfg.vae.c1;
        lc.enc_c0 = cfg.vae.c0;
        latenc.init(lc, r_latenc);
        UnetConfig uc;
        uc.latent_channels = cfg.vae.latent_channels;
        uc.base = cfg.unet_base;
        uc.temb_dim = cfg.temb_dim;
        uc.T = cfg.sched.T;
        unet.init(uc, cfg.unet_mode, r_unet, r_slots, cfg.window, cfg.sfa, cfg.tfa);
        refiner.init(cfg.refiner_w, r_refiner);
    }

    ParamRefsT<T> params() {
        ParamRefsT<T> refs;
        upscaler.collect(refs, "upscaler");
        vae_enc.collect(refs, "vae.enc");
        vae_dec.collect_backbone(refs, "vae.dec.bb");
        vae_dec.collect_adapters(refs, "vae.dec.adapt");
        unet.collect_backbone(refs, "unet.bb");
        unet.collect_adapters(refs, "unet.adapt");
        latenc.collect(refs, "latenc", "unet.adapt.latenc", "vae.dec.adapt.latenc");
        refiner.collect(refs, "refiner");
        return refs;
    }

    void zero_grad() {
        for (auto& [name, p] : params()) p->zero_grad();
    }

    void set_trainable_groups(const std::set<ParamGroup>& trainable) {
        for (auto& [name, p] : params()) p->frozen = trainable.count(group_of(name)) == 0;
    }

    void freeze_all() { set_trainable_groups({}); }

    // Copy values for every parameter whose name exists in `src`.
    // Returns the number of tensors copied.
    int load_matching(const std::map<std::string, TensorT<T>>& src) {
        int n = 0;
        for (auto& [name, p] : params()) {
            auto it = src.find(name);
            if (it == src.end()) continue;
            require(it->second.same_shape(p->value), "load: shape mismatch for '" + name + "': file " +
                                                         shape_str(it->second.shape) + " vs model " +
                                                         shape_str(p->value.shape));
            p->value = it->second;
            ++n;
        }
        return n;
    }
};

using Model = ModelT<float>;

inline uint64_t fnv1a_bytes(const void* data, size_t n, uint64_t h = 1469598103934665603ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

// Hash of every parameter group, in registration order.
template <class T>
std::map<ParamGroup, uint64_t> group_hashes(ModelT<T>& model) {
    std::map<ParamGroup, uint64_t> hashes;
    for (auto& [name, p] : model.params()) {
        const ParamGroup g = group_of(name);
        auto [it, inserted] = hashes.try_emplace(g, 1469598103934665603ULL);
        it->second = fnv1a_bytes(p->value.data.data(), p->value.data.size() * sizeof(T), it->second);
        it->second = fnv1a_bytes(name.data(), name.size(), it->second);
    }
    return hashes;
}

}  // namespace vsr
