// SPDX-License-Identifier: Apache-2.0
//
// vsr - guided latent-diffusion video super-resolution lab.
//
// Subcommands: gen-data, train, infer, eval, ablate, gradcheck.
// Exit codes: 0 success, 2 configuration/usage error, 3 missing
// prerequisite, 4 failed check, 5 I/O error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <vsr/gradsuite.hpp>
#include <vsr/vsr.hpp>

namespace fs = std::filesystem;
using namespace vsr;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPrereq = 3;
constexpr int kExitCheck = 4;
constexpr int kExitIo = 5;

// ---- config file ------------------------------------------------------

// plain key=value lines; '#' starts a comment
std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::map<std::string, std::string> kv;
    if (path.empty()) return kv;
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open '" + path + "'");
    std::string line;
    while (std::getline(f, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
        if (!k.empty()) kv[k] = v;
    }
    return kv;
}

// Precedence: explicit command-line flag > config file > built-in default.
struct Settings {
    std::map<std::string, std::string> file_kv;

    double num(const CLI::Option* opt, double flag_value, const char* key, double dflt) const {
        if (opt && opt->count() > 0) return flag_value;
        auto it = file_kv.find(key);
        if (it != file_kv.end()) return std::stod(it->second);
        return dflt;
    }
    int64_t integer(const CLI::Option* opt, int64_t flag_value, const char* key, int64_t dflt) const {
        if (opt && opt->count() > 0) return flag_value;
        auto it = file_kv.find(key);
        if (it != file_kv.end()) return std::stoll(it->second);
        return dflt;
    }
    std::string str(const CLI::Option* opt, const std::string& flag_value, const char* key,
                    const std::string& dflt) const {
        if (opt && opt->count() > 0) return flag_value;
        auto it = file_kv.find(key);
        if (it != file_kv.end()) return it->second;
        return dflt;
    }
};

void write_manifest(const std::string& path, const std::string& command, const std::vector<std::string>& argv_rec,
                    const std::map<std::string, std::string>& fields) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("manifest: cannot write '" + path + "'");
    f << "command " << command << "\n";
    std::ostringstream cmdline;
    for (const auto& a : argv_rec) cmdline << a << " ";
    f << "argv " << cmdline.str() << "\n";
    for (const auto& [k, v] : fields) f << k << " " << v << "\n";
}

std::string default_ckpt_dir() {
    const char* env = std::getenv("VSR_CKPT_DIR");
    return env ? env : "checkpoints";
}

ModelConfig model_config_from(const Settings& s, char variant) {
    ModelConfig cfg = ModelConfig::variant(variant);
    auto it = s.file_kv.end();
    auto geti = [&](const char* k, int dflt) {
        return (it = s.file_kv.find(k)) != s.file_kv.end() ? std::stoi(it->second) : dflt;
    };
    auto getd = [&](const char* k, double dflt) {
        return (it = s.file_kv.find(k)) != s.file_kv.end() ? std::stod(it->second) : dflt;
    };
    cfg.frames = geti("frames", cfg.frames);
    cfg.window.h = geti("window_h", cfg.window.h);
    cfg.window.w = geti("window_w", cfg.window.w);
    cfg.tfa.heads = geti("heads", cfg.tfa.heads);
    cfg.refiner_w = getd("refiner_w", cfg.refiner_w);
    cfg.sched.beta_1 = getd("beta1", cfg.sched.beta_1);
    cfg.sched.beta_T = getd("betaT", cfg.sched.beta_T);
    cfg.sched.T = geti("T", cfg.sched.T);
    cfg.infer_steps = geti("infer_steps", cfg.infer_steps);
    cfg.unet_base = geti("unet_base", cfg.unet_base);
    cfg.upscaler.width = geti("upscaler_width", cfg.upscaler.width);
    return cfg;
}

Dataset load_dataset(const std::string& dir, int frames) {
    Dataset data;
    std::vector<std::string> gt_files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.size() > 7 && name.substr(name.size() - 7) == "_gt.svt") gt_files.push_back(e.path().string());
    }
    std::sort(gt_files.begin(), gt_files.end());
    for (const auto& gt_path : gt_files) {
        ClipPair clip;
        clip.gt = read_svt(gt_path);
        const std::string lr_path = gt_path.substr(0, gt_path.size() - 7) + "_lr.svt";
        if (!fs::exists(lr_path)) throw IoError("dataset: missing LR pair for '" + gt_path + "'");
        clip.lr = read_svt(lr_path);
        clip.name = fs::path(gt_path).filename().string();
        clip.name = clip.name.substr(0, clip.name.size() - 7);
        require(clip.gt.shape[0] == frames, "dataset: clip '" + clip.name + "' has " +
                                                std::to_string(clip.gt.shape[0]) + " frames, expected " +
                                                std::to_string(frames));
        data.push_back(std::move(clip));
    }
    if (data.empty()) throw IoError("dataset: no *_gt.svt clips found in '" + dir + "'");
    return data;
}

// ---- gen-data ---------------------------------------------------------

int cmd_gen_data(const std::string& out_dir, int clips, const std::string& size, int frames, uint64_t seed,
                 const std::string& motion, bool force, const std::vector<std::string>& argv_rec) {
    int H = 0, W = 0;
    if (std::sscanf(size.c_str(), "%dx%d", &H, &W) != 2 || H <= 0 || W <= 0)
        throw std::invalid_argument("gen-data: --size must look like 32x32");
    require(H % 4 == 0 && W % 4 == 0, "gen-data: size must be divisible by 4");

    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
        throw IoError("gen-data: output directory '" + out_dir + "' is not empty (use --force)");
    fs::create_directories(out_dir);

    for (int i = 0; i < clips; ++i) {
        SynthConfig sc;
        sc.seed = splitmix64(seed + 1000003ULL * static_cast<uint64_t>(i));
        sc.frames = frames;
        sc.height = H;
        sc.width = W;
        sc.motion = motion_from_name(motion);
        Video gt = synth_clip(sc);
        Video lr = bicubic_down(gt, 4);
        std::ostringstream base;
        base << out_dir << "/clip" << std::setw(3) << std::setfill('0') << i;
        write_svt(base.str() + "_gt.svt", gt);
        write_svt(base.str() + "_lr.svt", lr);
    }
    write_manifest(out_dir + "/manifest.txt", "gen-data", argv_rec,
                   {{"seed", std::to_string(seed)},
                    {"clips", std::to_string(clips)},
                    {"size", size},
                    {"frames", std::to_string(frames)},
                    {"motion", motion},
                    {"out", out_dir}});
    std::cout << "wrote " << 2 * clips << " SVT files to " << out_dir << "\n";
    return 0;
}

// ---- train ------------------------------------------------------------

int cmd_train(int stage, const std::string& data_dir, const std::string& ckpt_dir, const StageConfig& scfg,
              const ModelConfig& mcfg_in, const std::string& resume_path, const std::string& config_path,
              const std::vector<std::string>& argv_rec) {
    ModelConfig mcfg = mcfg_in;
    // stages following another stage inherit that checkpoint's model config
    if (stage >= 2) {
        Checkpoint prev = require_stage_checkpoint(ckpt_dir, stage_prerequisite(stage));
        ModelConfig prev_cfg = ModelConfig::from_kv(prev.config);
        prev_cfg.refiner_w = mcfg.refiner_w;  // stage-4 sweeps may override
        mcfg = prev_cfg;
    }
    fs::create_directories(ckpt_dir);
    Dataset data = load_dataset(data_dir, mcfg.frames);
    Model model = prepare_stage_model(stage, ckpt_dir, mcfg, scfg.seed);
    if (stage == 4) model.refiner.w = mcfg.refiner_w;

    Trainer trainer(model, scfg);
    if (!resume_path.empty()) {
        Checkpoint rc = load_checkpoint(resume_path);
        model.load_matching(rc.tensor_map());
        trainer.resume_from(rc);
    }
    const std::string log_path = ckpt_dir + "/train_stage" + std::to_string(stage) + ".log";
    std::ofstream log(log_path, resume_path.empty() ? std::ios::trunc : std::ios::app);
    Checkpoint ckpt = trainer.run(data, &log);
    const std::string out_path = stage_ckpt_path(ckpt_dir, stage);
    save_checkpoint(out_path, ckpt);

    write_manifest(ckpt_dir + "/manifest_stage" + std::to_string(stage) + ".txt", "train", argv_rec,
                   {{"stage", std::to_string(stage)},
                    {"data", data_dir},
                    {"ckpt", out_path},
                    {"config", config_path.empty() ? "-" : config_path},
                    {"seed", std::to_string(scfg.seed)},
                    {"steps", std::to_string(scfg.steps)},
                    {"lr", std::to_string(scfg.lr)},
                    {"log", log_path}});
    const double final_loss = trainer.log.empty() ? 0.0 : trainer.log.back().loss;
    std::cout << "stage " << stage << " done: " << scfg.steps << " steps, final loss " << final_loss << ", wrote "
              << out_path << "\n";
    return 0;
}

// ---- infer ------------------------------------------------------------

int cmd_infer(const std::string& in_path, const std::string& ckpt_dir, int steps, uint64_t seed,
              const std::string& out_path, const std::vector<std::string>& argv_rec) {
    Checkpoint ckpt = require_stage_checkpoint(ckpt_dir, 4);
    ModelConfig cfg = ModelConfig::from_kv(ckpt.config);
    Model model;
    model.init(cfg, seed);
    model.load_matching(ckpt.tensor_map());

    Video x_lr = read_svt(in_path);
    InferResult res = infer(model, x_lr, steps, seed);
    write_svt(out_path, res.x_h);
    write_manifest(out_path + ".manifest", "infer", argv_rec,
                   {{"in", in_path},
                    {"ckpt", stage_ckpt_path(ckpt_dir, 4)},
                    {"steps", std::to_string(steps)},
                    {"seed", std::to_string(seed)},
                    {"out", out_path}});
    std::cout << "wrote " << out_path << " (" << shape_str(res.x_h.shape) << ")\n";
    return 0;
}

// ---- eval -------------------------------------------------------------

struct EvalRow {
    std::string clip;
    std::map<std::string, double> values;
};

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& metrics_csv,
             const std::string& report_path, const std::vector<std::string>& argv_rec) {
    std::vector<std::string> wanted;
    std::istringstream ms(metrics_csv);
    std::string tok;
    while (std::getline(ms, tok, ',')) {
        if (tok != "psnr" && tok != "ssim" && tok != "tc")
            throw std::invalid_argument("eval: unknown metric '" + tok + "' (expected psnr,ssim,tc)");
        wanted.push_back(tok);
    }
    require(!wanted.empty(), "eval: no metrics requested");

    std::vector<std::string> preds;
    for (const auto& e : fs::directory_iterator(pred_dir))
        if (e.path().extension() == ".svt") preds.push_back(e.path().filename().string());
    std::sort(preds.begin(), preds.end());

    std::vector<EvalRow> rows;
    int unpaired = 0;
    for (const auto& name : preds) {
        const std::string gt_path = gt_dir + "/" + name;
        if (!fs::exists(gt_path)) {
            std::cerr << "eval: no ground-truth pair for '" << name << "', skipped\n";
            ++unpaired;
            continue;
        }
        Video pred = read_svt(pred_dir + "/" + name);
        Video gt = read_svt(gt_path);
        EvalRow row;
        row.clip = name;
        for (const auto& m : wanted) {
            if (m == "psnr") row.values["psnr"] = psnr(pred, gt).clip_mean;
            if (m == "ssim") row.values["ssim"] = ssim(pred, gt).clip_mean;
            if (m == "tc") row.values["tc"] = temporal_consistency(pred, gt).clip_mean;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw CheckError("eval: no paired clips (" + std::to_string(unpaired) + " unpaired)");

    std::ostringstream report;
    report << std::fixed << std::setprecision(6);
    std::map<std::string, double> mean;
    for (const auto& row : rows) {
        report << "clip=" << row.clip;
        for (const auto& m : wanted) {
            report << " " << m << "=" << row.values.at(m);
            mean[m] += row.values.at(m);
        }
        report << "\n";
    }
    report << "clip=MEAN";
    for (const auto& m : wanted) report << " " << m << "=" << mean[m] / rows.size();
    report << "\n";

    if (report_path.empty() || report_path == "-") {
        std::cout << report.str();
    } else {
        std::ofstream f(report_path, std::ios::trunc);
        if (!f) throw IoError("eval: cannot write report '" + report_path + "'");
        f << report.str();
        write_manifest(report_path + ".manifest", "eval", argv_rec,
                       {{"pred", pred_dir}, {"gt", gt_dir}, {"metrics", metrics_csv}, {"out", report_path}});
        std::cout << report.str();
    }
    return 0;
}

// ---- gradcheck --------------------------------------------------------

int cmd_gradcheck(const std::string& module, double tol, int instances) {
    const auto& suites = grad_suites();
    std::vector<std::pair<std::string, GradSuiteFn>> to_run;
    if (module == "all") {
        for (const auto& [name, fns] : suites) to_run.insert(to_run.end(), fns.begin(), fns.end());
    } else {
        auto it = suites.find(module);
        if (it == suites.end())
            throw std::invalid_argument("gradcheck: unknown module '" + module +
                                        "' (core|adaptation|alignment|networks|all)");
        to_run = it->second;
    }
    bool all_pass = true;
    for (const auto& [name, fn] : to_run) {
        for (int i = 0; i < instances; ++i) {
            GradCheckReport rep = fn(static_cast<uint64_t>(1000 * i + 17), tol);
            std::cout << name << "[" << i << "] " << rep.summary() << "\n";
            all_pass &= rep.pass;
        }
    }
    if (!all_pass) throw CheckError("gradcheck: failures at tol " + std::to_string(tol));
    return 0;
}

// ---- ablate -----------------------------------------------------------

struct StageBudget {
    int steps0 = 200, steps1 = 300, steps2 = 300, steps3 = 300, steps4 = 120;
    double lr = 1e-3;
    int infer_steps = 25;
};

double eval_model_psnr(Model& model, const Dataset& heldout, int steps, uint64_t seed) {
    double acc = 0;
    for (size_t i = 0; i < heldout.size(); ++i) {
        InferResult r = infer(model, heldout[i].lr, steps, seed + i);
        acc += psnr(r.x_h, heldout[i].gt).clip_mean;
    }
    return acc / static_cast<double>(heldout.size());
}

int run_variant_stages(const std::string& data_dir, const std::string& out_dir, char variant, uint64_t seed,
                       const StageBudget& budget, double refiner_w) {
    ModelConfig mcfg = ModelConfig::variant(variant);
    mcfg.refiner_w = refiner_w;
    mcfg.infer_steps = budget.infer_steps;
    Dataset data = load_dataset(data_dir, mcfg.frames);
    fs::create_directories(out_dir);

    auto stage_cfg = [&](int stage, int steps) {
        StageConfig sc;
        sc.stage = stage;
        sc.steps = steps;
        sc.lr = budget.lr;
        sc.seed = seed + static_cast<uint64_t>(stage);
        sc.infer_steps = budget.infer_steps;
        return sc;
    };
    const int steps_for[5] = {budget.steps0, budget.steps1, budget.steps2, budget.steps3, budget.steps4};
    for (int stage = 0; stage <= 4; ++stage) {
        Model model = prepare_stage_model(stage, out_dir, mcfg, seed);
        if (stage == 4) model.refiner.w = refiner_w;
        Trainer trainer(model, stage_cfg(stage, steps_for[stage]));
        std::ofstream log(out_dir + "/train_stage" + std::to_string(stage) + ".log", std::ios::trunc);
        Checkpoint ckpt = trainer.run(data, &log);
        save_checkpoint(stage_ckpt_path(out_dir, stage), ckpt);
    }
    return 0;
}

int cmd_ablate(const std::string& variant_str, const std::string& data_dir, const std::string& heldout_dir,
               const std::string& out_dir, uint64_t seed, const StageBudget& budget, double refiner_w,
               const std::vector<std::string>& argv_rec) {
    require(variant_str.size() == 1 && variant_str[0] >= 'A' && variant_str[0] <= 'D',
            "ablate: --variant must be one of A, B, C, D");
    const char variant = variant_str[0];
    run_variant_stages(data_dir, out_dir, variant, seed, budget, refiner_w);

    Checkpoint final = require_stage_checkpoint(out_dir, 4);
    Model model;
    model.init(ModelConfig::from_kv(final.config), seed);
    model.load_matching(final.tensor_map());
    Dataset heldout = load_dataset(heldout_dir.empty() ? data_dir : heldout_dir, model.cfg.frames);
    const double p = eval_model_psnr(model, heldout, budget.infer_steps, seed + 998);
    std::ofstream rep(out_dir + "/ablate_report.txt", std::ios::trunc);
    rep << "variant=" << variant << " psnr=" << std::fixed << std::setprecision(4) << p << "\n";
    std::cout << "variant=" << variant << " psnr=" << std::fixed << std::setprecision(4) << p << "\n";
    write_manifest(out_dir + "/manifest_ablate.txt", "ablate", argv_rec,
                   {{"variant", std::string(1, variant)},
                    {"data", data_dir},
                    {"heldout", heldout_dir.empty() ? data_dir : heldout_dir},
                    {"seed", std::to_string(seed)},
                    {"out", out_dir}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> argv_rec(argv, argv + argc);
    CLI::App app{"guided latent-diffusion video super-resolution lab"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "key=value config file (flags override file values)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate paired synthetic clips (GT + x4 bicubic LR)");
    std::string gen_out = "data", gen_size = "32x32", gen_motion = "translating-texture";
    int gen_clips = 8, gen_frames = 6;
    uint64_t gen_seed = 0;
    bool gen_force = false;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--clips", gen_clips, "number of clips");
    auto* gen_size_opt = gen->add_option("--size", gen_size, "GT frame size HxW");
    auto* gen_frames_opt = gen->add_option("--frames", gen_frames, "frames per clip");
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "seed");
    gen->add_option("--motion", gen_motion, "translating-texture|rotating-gradient|bouncing-shapes");
    gen->add_flag("--force", gen_force, "allow writing into a non-empty directory");

    // train
    auto* train = app.add_subcommand("train", "run one training stage (0..4)");
    int train_stage = -1;
    std::string train_data = "data", train_ckpt = default_ckpt_dir(), train_resume;
    int train_steps = 200, train_batch = 1;
    uint64_t train_seed = 0;
    double train_lr = 5e-5, train_w = 0.5, train_eps = 1e-3;
    int train_infer_steps = 50;
    std::string train_variant = "D";
    train->add_option("--stage", train_stage, "training stage 0..4")->required();
    train->add_option("--data", train_data, "dataset directory");
    train->add_option("--ckpt", train_ckpt, "checkpoint directory (env VSR_CKPT_DIR)");
    auto* train_steps_opt = train->add_option("--steps", train_steps, "optimization steps");
    auto* train_seed_opt = train->add_option("--seed", train_seed, "seed");
    auto* train_lr_opt = train->add_option("--lr", train_lr, "learning rate");
    auto* train_batch_opt = train->add_option("--batch", train_batch, "clips per step");
    auto* train_w_opt = train->add_option("--refiner-w", train_w, "refiner trade-off weight");
    auto* train_eps_opt = train->add_option("--charbonnier-eps", train_eps, "loss epsilon");
    auto* train_infer_opt = train->add_option("--infer-steps", train_infer_steps, "sampling steps for stage 4 inputs");
    train->add_option("--variant", train_variant, "model variant A|B|C|D (stages 0..2)");
    train->add_option("--resume", train_resume, "checkpoint to resume from");

    // infer
    auto* inf = app.add_subcommand("infer", "super-resolve one LR clip");
    std::string inf_in, inf_out = "out.svt", inf_ckpt = default_ckpt_dir();
    int inf_steps = 50;
    uint64_t inf_seed = 0;
    inf->add_option("--in", inf_in, "input LR clip (.svt)")->required();
    inf->add_option("--ckpt", inf_ckpt, "checkpoint directory");
    auto* inf_steps_opt = inf->add_option("--steps", inf_steps, "sampling steps");
    auto* inf_seed_opt = inf->add_option("--seed", inf_seed, "seed");
    inf->add_option("--out", inf_out, "output HR clip (.svt)");

    // eval
    auto* ev = app.add_subcommand("eval", "score prediction directory against ground truth");
    std::string ev_pred, ev_gt, ev_metrics = "psnr,ssim,tc", ev_out;
    ev->add_option("--pred", ev_pred, "prediction directory")->required();
    ev->add_option("--gt", ev_gt, "ground-truth directory")->required();
    ev->add_option("--metrics", ev_metrics, "comma list: psnr,ssim,tc");
    ev->add_option("--out", ev_out, "report file (default stdout)");

    // ablate
    auto* ab = app.add_subcommand("ablate", "train and evaluate one model variant");
    std::string ab_variant = "D", ab_data = "data", ab_heldout, ab_out = "ablation";
    uint64_t ab_seed = 0;
    StageBudget ab_budget;
    double ab_w = 0.5;
    ab->add_option("--variant", ab_variant, "A|B|C|D");
    ab->add_option("--data", ab_data, "training dataset directory");
    ab->add_option("--heldout", ab_heldout, "held-out dataset directory (default: training set)");
    ab->add_option("--out", ab_out, "output directory");
    auto* ab_seed_opt = ab->add_option("--seed", ab_seed, "seed");
    ab->add_option("--steps0", ab_budget.steps0, "stage-0 steps");
    ab->add_option("--steps1", ab_budget.steps1, "stage-1 steps");
    ab->add_option("--steps2", ab_budget.steps2, "stage-2 steps");
    ab->add_option("--steps3", ab_budget.steps3, "stage-3 steps");
    ab->add_option("--steps4", ab_budget.steps4, "stage-4 steps");
    ab->add_option("--lr", ab_budget.lr, "learning rate for all stages");
    ab->add_option("--infer-steps", ab_budget.infer_steps, "sampling steps");
    ab->add_option("--refiner-w", ab_w, "refiner trade-off weight");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string gc_module = "all";
    double gc_tol = 1e-3;
    int gc_instances = 5;
    gc->add_option("--module", gc_module, "core|adaptation|alignment|networks|all");
    gc->add_option("--tol", gc_tol, "relative tolerance");
    gc->add_option("--instances", gc_instances, "seeded instances per op");

    try {
        app.parse(argc, argv);
        Settings s;
        s.file_kv = load_config_file(config_path);

        if (*gen) {
            return cmd_gen_data(gen_out, gen_clips, s.str(gen_size_opt, gen_size, "size", gen_size),
                                static_cast<int>(s.integer(gen_frames_opt, gen_frames, "frames", 6)),
                                static_cast<uint64_t>(s.integer(gen_seed_opt, static_cast<int64_t>(gen_seed), "seed", 0)),
                                gen_motion, gen_force, argv_rec);
        }
        if (*train) {
            StageConfig sc;
            sc.stage = train_stage;
            sc.steps = static_cast<int>(s.integer(train_steps_opt, train_steps, "steps", 200));
            sc.batch_clips = static_cast<int>(s.integer(train_batch_opt, train_batch, "batch", 1));
            sc.lr = s.num(train_lr_opt, train_lr, "lr", 5e-5);
            sc.seed = static_cast<uint64_t>(s.integer(train_seed_opt, static_cast<int64_t>(train_seed), "seed", 0));
            sc.charbonnier_eps = s.num(train_eps_opt, train_eps, "charbonnier_eps", 1e-3);
            sc.infer_steps = static_cast<int>(s.integer(train_infer_opt, train_infer_steps, "infer_steps", 50));
            require(train_variant.size() == 1 && train_variant[0] >= 'A' && train_variant[0] <= 'D',
                    "train: --variant must be A|B|C|D");
            ModelConfig mcfg = model_config_from(s, train_variant[0]);
            mcfg.refiner_w = s.num(train_w_opt, train_w, "refiner_w", 0.5);
            return cmd_train(train_stage, train_data, train_ckpt, sc, mcfg, train_resume, config_path, argv_rec);
        }
        if (*inf) {
            return cmd_infer(inf_in, inf_ckpt,
                             static_cast<int>(s.integer(inf_steps_opt, inf_steps, "infer_steps", 50)),
                             static_cast<uint64_t>(s.integer(inf_seed_opt, static_cast<int64_t>(inf_seed), "seed", 0)),
                             inf_out, argv_rec);
        }
        if (*ev) return cmd_eval(ev_pred, ev_gt, ev_metrics, ev_out, argv_rec);
        if (*ab) {
            return cmd_ablate(ab_variant, ab_data, ab_heldout, ab_out,
                              static_cast<uint64_t>(s.integer(ab_seed_opt, static_cast<int64_t>(ab_seed), "seed", 0)),
                              ab_budget, ab_w, argv_rec);
        }
        if (*gc) return cmd_gradcheck(gc_module, gc_tol, gc_instances);
        std::cerr << "no subcommand\n";
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    } catch (const PrereqError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPrereq;
    } catch (const CheckError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheck;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
