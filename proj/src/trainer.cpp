#include "consingan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "consingan/checkpoint.hpp"
#include "consingan/manifest.hpp"
#include "consingan/optim.hpp"
#include "consingan/sha256.hpp"

namespace fs = std::filesystem;

namespace consingan {

double lr_for_depth(int depth, const TrainConfig& cfg) {
    if (depth < 0 || depth >= cfg.window)
        throw InvalidArgumentError("window depth out of range");
    return cfg.eta * std::pow(cfg.delta, depth);
}

std::vector<int> trainable_window(int n, int k) {
    if (n < 0) throw InvalidArgumentError("stage index must be >= 0");
    if (k < 1) throw InvalidArgumentError("window size must be >= 1");
    std::vector<int> out;
    for (int s = std::max(0, n - k + 1); s <= n; ++s) out.push_back(s);
    return out;
}

Tensor sample_generator_input(TaskKind task, const pyramid::ImagePyramid& pyr,
                              const AugmentSpec& aug, RngStream& rng) {
    if (pyr.levels.empty()) throw InvalidArgumentError("empty pyramid");
    const Tensor& x0 = pyr.levels.front();
    if (task == TaskKind::unconditional) {
        Tensor z({3, x0.dim(1), x0.dim(2)});
        for (size_t i = 0; i < z.numel(); ++i) z[i] = rng.normal_f();
        return z;
    }
    const Tensor jittered = random_augment(pyr.levels.back(), aug, rng);
    Tensor out;
    kernels::resize(jittered, x0.dim(1), x0.dim(2), out, kernels::default_exec());
    for (size_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], -1.0f, 1.0f);
    return out;
}

namespace {

void freeze_outside_window(GrowingGenerator& g, const std::vector<int>& window) {
    for (int s = 0; s < g.stage_count(); ++s) {
        const bool trainable = std::find(window.begin(), window.end(), s) != window.end();
        for (auto& p : g.stage_params(s)) p.set_requires_grad(trainable);
    }
    for (auto& p : g.head_params()) p.set_requires_grad(true);
}

void set_requires_grad_all(const std::vector<ag::Var>& params, bool value) {
    for (const auto& p : params) const_cast<ag::Var&>(p).set_requires_grad(value);
}

// One optimization phase over a fixed top stage: d_steps critic updates then
// g_steps generator updates per iteration. adv_input samples the generator
// input for adversarial passes.
void run_stage_loop(GrowingGenerator& g, PatchCritic& d, const pyramid::ImagePyramid& pyr,
                    const TrainConfig& cfg, TrainState& state, int iters,
                    const std::function<Tensor(RngStream&)>& adv_input) {
    const int n = g.stage_count() - 1;
    const auto window = trainable_window(n, cfg.window);
    freeze_outside_window(g, window);

    StageLog log;
    log.stage = n;
    std::vector<ParamGroup> groups;
    for (int s : window) {
        ParamGroup grp;
        grp.params = g.stage_params(s);
        grp.lr = lr_for_depth(n - s, cfg);
        if (s == n) {
            auto head = g.head_params();
            grp.params.insert(grp.params.end(), head.begin(), head.end());
        }
        log.window_lrs.push_back(grp.lr);
        groups.push_back(std::move(grp));
    }
    Adam adam_g(std::move(groups));
    Adam adam_d({ParamGroup{d.params(), cfg.eta}});

    const ScoreFn dfn = critic_score_fn(d);
    const Tensor& x0 = pyr.levels.front();
    const Tensor& xn = pyr.levels[static_cast<size_t>(n)];
    const LossWeights lw{cfg.alpha, cfg.gp_lambda};

    log.iters.reserve(static_cast<size_t>(iters));
    for (int it = 0; it < iters; ++it) {
        IterationLoss il;
        il.iter = it;
        try {
            set_requires_grad_all(adam_d.params(), true);
            for (int step = 0; step < cfg.d_steps; ++step) {
                Tensor input = adv_input(state.rng);
                Tensor fake;
                {
                    ag::NoGradGuard ng;
                    fake = g.forward(input, NoiseMode::sampled, &state.rng).value();
                }
                auto parts = critic_loss(dfn, ag::Var(xn), ag::Var(std::move(fake)),
                                         cfg.gp_lambda, state.rng);
                if (!std::isfinite(parts.total)) throw NumericError("non-finite critic loss");
                adam_d.step(ag::backward(parts.loss, adam_d.params()));
                il.critic = parts.total;
            }
            // critic weights stay fixed during generator updates; gradients
            // still flow through the critic to the fake image
            set_requires_grad_all(adam_d.params(), false);
            for (int step = 0; step < cfg.g_steps; ++step) {
                Tensor input = adv_input(state.rng);
                ag::Var fake = g.forward(input, NoiseMode::sampled, &state.rng);
                ag::Var adv = generator_adv_loss(dfn, fake);
                ag::Var rec = reconstruction_loss(g, x0, xn);
                ag::Var total = generator_total_loss(adv, rec, lw);
                adam_g.step(ag::backward(total, adam_g.params()));
                il.adv = adv.item();
                il.rec = rec.item();
                il.total = total.item();
            }
        } catch (const NumericError& e) {
            set_requires_grad_all(adam_d.params(), true);
            throw NumericError("stage " + std::to_string(n) + " iteration " +
                               std::to_string(it) + ": " + e.what());
        }
        log.iters.push_back(il);
    }
    set_requires_grad_all(adam_d.params(), true);
    state.logs.push_back(std::move(log));
    state.stage = n;
}

std::function<Tensor(RngStream&)> task_input_sampler(const TrainConfig& cfg,
                                                     const pyramid::ImagePyramid& pyr) {
    return [&cfg, &pyr](RngStream& rng) {
        return sample_generator_input(cfg.task, pyr, cfg.augment, rng);
    };
}

void write_loss_csv(const StageLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "# stage " << log.stage << " window_lrs:";
    for (double lr : log.window_lrs) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), " %.9g", lr);
        out << buf;
    }
    out << "\niteration,critic_loss,adv,rec,total\n";
    for (const auto& il : log.iters) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g\n", il.iter, il.critic, il.adv,
                      il.rec, il.total);
        out << buf;
    }
}

void emit_stage_artifacts(const GrowingGenerator& g, const PatchCritic& d,
                          const TrainConfig& cfg, const pyramid::PyramidSpec& spec,
                          const pyramid::ImagePyramid& pyr, TrainState& state,
                          const std::string& out_dir, std::vector<std::string>& ckpt_dirs) {
    if (out_dir.empty()) return;
    const int n = state.stage;
    write_loss_csv(state.logs.back(),
                   (fs::path(out_dir) / ("losses_stage" + std::to_string(n) + ".csv")).string());
    CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.rng_state = state.rng.serialize();
    meta.completed_stage = n;
    meta.spec = spec;
    meta.config = cfg;
    const std::string cdir =
        (fs::path(out_dir) / "checkpoints" / ("stage_" + std::to_string(n))).string();
    save_checkpoint(g, d, meta, pyr.levels.back(), cdir);
    ckpt_dirs.push_back(cdir);
}

void emit_manifest(const TrainConfig& cfg, const pyramid::PyramidSpec& spec,
                   const std::string& out_dir, const std::string& input_path,
                   const Tensor& image, const std::string& started_at) {
    if (out_dir.empty()) return;
    RunManifest m;
    m.config = cfg;
    m.spec = spec;
    m.input_path = input_path;
    m.input_sha256 = input_path.empty()
                         ? sha256_hex(image.data(), image.numel() * sizeof(float))
                         : sha256_file(input_path);
    m.started_at = started_at;
    m.finished_at = iso8601_now();
    save_manifest(m, (fs::path(out_dir) / "manifest.json").string());
}

}  // namespace

void train_stage(GrowingGenerator& g, PatchCritic& d, const pyramid::ImagePyramid& pyr,
                 const TrainConfig& cfg_in, TrainState& state) {
    const TrainConfig cfg = cfg_in.resolved();
    cfg.validate();
    run_stage_loop(g, d, pyr, cfg, state, cfg.iters_per_stage, task_input_sampler(cfg, pyr));
}

Tensor prepare_training_image(const Tensor& image, const TrainConfig& cfg) {
    if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) < 2 || image.dim(2) < 2)
        throw InvalidArgumentError("training image must be {3,H,W} with sides >= 2");
    const auto target = pyramid::clamp_to_max({image.dim(1), image.dim(2)}, cfg.max_size);
    if (target == std::pair<int, int>{image.dim(1), image.dim(2)}) return image;
    Tensor out;
    kernels::resize(image, target.first, target.second, out, kernels::default_exec());
    for (size_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], -1.0f, 1.0f);
    return out;
}

TrainResult train(const Tensor& image, const TrainConfig& cfg_in, const std::string& out_dir,
                  const std::string& input_path) {
    const TrainConfig cfg = cfg_in.resolved();
    cfg.validate();
    const std::string started_at = iso8601_now();

    const Tensor full = prepare_training_image(image, cfg);
    const auto spec = pyramid::make_spec({full.dim(1), full.dim(2)}, cfg.rescale_mode, cfg.r,
                                         cfg.min_size, cfg.max_size, cfg.stages_override);
    auto pyr = pyramid::build_pyramid(full, spec);

    TrainState state;
    state.rng = RngStream(cfg.seed);
    GrowingGenerator g(spec.resolutions, cfg.channels, cfg.noise_amp, state.rng);
    PatchCritic d(cfg.channels, state.rng);

    if (!out_dir.empty()) fs::create_directories(out_dir);
    std::vector<std::string> ckpt_dirs;
    const auto sampler = task_input_sampler(cfg, pyr);
    for (int n = 0; n <= spec.final_stage; ++n) {
        if (n > 0) {
            g.grow(state.rng);
            d = warm_start_critic(d);
        }
        run_stage_loop(g, d, pyr, cfg, state, cfg.iters_per_stage, sampler);
        emit_stage_artifacts(g, d, cfg, spec, pyr, state, out_dir, ckpt_dirs);
    }
    emit_manifest(cfg, spec, out_dir, input_path, full, started_at);
    return TrainResult{std::move(g), std::move(d), std::move(state),
                       spec,        std::move(pyr), std::move(ckpt_dirs)};
}

TrainResult resume(const std::string& ckpt_dir, const std::string& out_dir) {
    LoadedCheckpoint lc = load_checkpoint(ckpt_dir);
    const TrainConfig cfg = lc.meta.config;
    const pyramid::PyramidSpec spec = lc.meta.spec;
    const std::string started_at = iso8601_now();

    const Tensor full = lc.training_image;
    auto pyr = pyramid::build_pyramid(full, spec);

    TrainState state;
    state.rng.deserialize(lc.meta.rng_state);
    state.stage = lc.meta.completed_stage;
    GrowingGenerator g = std::move(lc.generator);
    PatchCritic d = std::move(lc.critic);

    if (!out_dir.empty()) fs::create_directories(out_dir);
    std::vector<std::string> ckpt_dirs;
    const auto sampler = task_input_sampler(cfg, pyr);
    for (int n = lc.meta.completed_stage + 1; n <= spec.final_stage; ++n) {
        g.grow(state.rng);
        d = warm_start_critic(d);
        run_stage_loop(g, d, pyr, cfg, state, cfg.iters_per_stage, sampler);
        emit_stage_artifacts(g, d, cfg, spec, pyr, state, out_dir, ckpt_dirs);
    }
    emit_manifest(cfg, spec, out_dir, "", full, started_at);
    return TrainResult{std::move(g), std::move(d), std::move(state),
                       spec,        std::move(pyr), std::move(ckpt_dirs)};
}

void fine_tune(GrowingGenerator& g, PatchCritic& d, const pyramid::ImagePyramid& pyr,
               const Tensor& naive_image, const TrainConfig& cfg_in, TrainState& state) {
    const TrainConfig cfg = cfg_in.resolved();
    cfg.validate();
    const Tensor& xN = pyr.levels.back();
    if (!naive_image.same_shape(xN))
        throw InvalidArgumentError("fine_tune: composite " + shape_str(naive_image.shape()) +
                                   " does not match the training resolution " +
                                   shape_str(xN.shape()));
    const Tensor& x0 = pyr.levels.front();
    Tensor naive0;
    kernels::resize(naive_image, x0.dim(1), x0.dim(2), naive0, kernels::default_exec());
    for (size_t i = 0; i < naive0.numel(); ++i) naive0[i] = std::clamp(naive0[i], -1.0f, 1.0f);
    run_stage_loop(g, d, pyr, cfg, state, cfg.fine_tune_iters,
                   [&naive0](RngStream&) { return naive0; });
}

}  // namespace consingan
