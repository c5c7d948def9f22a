#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "consingan/checkpoint.hpp"
#include "consingan/image_io.hpp"
#include "consingan/manifest.hpp"
#include "consingan/metrics.hpp"
#include "consingan/trainer.hpp"

namespace fs = std::filesystem;
using namespace consingan;

namespace {

int error_code(const Error& e) {
    const std::string cat = e.category();
    if (cat == "invalid-argument") return 2;
    if (cat == "io") return 3;
    if (cat == "numeric") return 4;
    if (cat == "corruption") return 5;
    if (cat == "incompatibility") return 6;
    return 7;
}

struct TrainFlags {
    std::string input, out, config_path;
    std::string task, rescale_mode;
    double r = 0, lr_scale = 0, alpha = 0, gp_lambda = 0, eta = 0, noise_amp = 0;
    int min_size = 0, max_size = 0, window = 0, iters = 0, stages = 0, channels = 0;
    int d_steps = 0, g_steps = 0;
    uint64_t seed = 0;
};

// defaults < config file < explicit flags
TrainConfig resolve_train_config(const CLI::App* cmd, const TrainFlags& f) {
    TrainConfig cfg;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw IoError("cannot open config " + f.config_path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        cfg = config_from_json(text, cfg);
    }
    auto set_if = [&](const char* flag, auto setter) {
        if (cmd->count(flag) > 0) setter();
    };
    set_if("--task", [&] { cfg.task = task_from_name(f.task); });
    set_if("--r", [&] { cfg.r = f.r; });
    set_if("--min-size", [&] { cfg.min_size = f.min_size; });
    set_if("--max-size", [&] { cfg.max_size = f.max_size; });
    set_if("--stages-window", [&] { cfg.window = f.window; });
    set_if("--lr-scale", [&] { cfg.delta = f.lr_scale; });
    set_if("--iters", [&] { cfg.iters_per_stage = f.iters; });
    set_if("--seed", [&] { cfg.seed = f.seed; });
    set_if("--stages", [&] { cfg.stages_override = f.stages; });
    set_if("--channels", [&] { cfg.channels = f.channels; });
    set_if("--rescale-mode", [&] { cfg.rescale_mode = pyramid::mode_from_name(f.rescale_mode); });
    set_if("--alpha", [&] { cfg.alpha = f.alpha; });
    set_if("--gp-lambda", [&] { cfg.gp_lambda = f.gp_lambda; });
    set_if("--lr", [&] { cfg.eta = f.eta; });
    set_if("--noise-amp", [&] { cfg.noise_amp = f.noise_amp; });
    set_if("--d-steps", [&] { cfg.d_steps = f.d_steps; });
    set_if("--g-steps", [&] { cfg.g_steps = f.g_steps; });
    return cfg;
}

int cmd_train(const CLI::App* cmd, const TrainFlags& f) {
    TrainConfig cfg = resolve_train_config(cmd, f);
    cfg = cfg.resolved();
    cfg.validate();
    const Tensor image = load_image(f.input);
    std::cout << "training " << task_name(cfg.task) << " model on " << f.input << " ("
              << image.dim(1) << "x" << image.dim(2) << ")\n";
    TrainResult result = train(image, cfg, f.out, f.input);
    std::cout << "trained " << result.spec.stage_count() << " stages; final checkpoint: "
              << result.checkpoint_dirs.back() << "\n";
    return 0;
}

Tensor noise_field(int h, int w, RngStream& rng) {
    Tensor z({3, h, w});
    for (size_t i = 0; i < z.numel(); ++i) z[i] = rng.normal_f();
    return z;
}

int cmd_generate(const std::string& ckpt, int n, double scale_h, double scale_w, uint64_t seed,
                 const std::string& out) {
    if (n < 1) throw InvalidArgumentError("--n must be >= 1");
    if (scale_h <= 0 || scale_w <= 0) throw InvalidArgumentError("scales must be positive");
    LoadedCheckpoint lc = load_checkpoint(ckpt);
    fs::create_directories(out);
    const auto res0 = lc.meta.spec.resolutions.front();
    const int zh = std::max(4, static_cast<int>(std::lround(res0.first * scale_h)));
    const int zw = std::max(4, static_cast<int>(std::lround(res0.second * scale_w)));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        RngStream rng(seed, static_cast<uint64_t>(i) + 1);
        Tensor z = noise_field(zh, zw, rng);
        ag::NoGradGuard ng;
        const Tensor img = lc.generator.forward(z, NoiseMode::sampled, &rng).value();
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%04d.png", i);
        save_image(img, (fs::path(out) / name).string());
    }
    std::cout << "wrote " << n << " samples to " << out << "\n";
    return 0;
}

Tensor load_naive_composite(const std::string& path, const pyramid::PyramidSpec& spec) {
    const Tensor naive = load_image(path);
    const auto [th, tw] = spec.resolutions.back();
    const double ar_in = static_cast<double>(naive.dim(1)) / naive.dim(2);
    const double ar_train = static_cast<double>(th) / tw;
    if (std::abs(ar_in / ar_train - 1.0) > 0.05)
        throw InvalidArgumentError("composite aspect ratio differs from the training image by "
                                   "more than 5%");
    if (naive.dim(1) == th && naive.dim(2) == tw) return naive;
    Tensor out;
    kernels::resize(naive, th, tw, out, kernels::default_exec());
    for (size_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], -1.0f, 1.0f);
    return out;
}

Tensor harmonize_forward(const GrowingGenerator& g, const pyramid::PyramidSpec& spec,
                         const Tensor& naive) {
    const auto res0 = spec.resolutions.front();
    Tensor naive0;
    kernels::resize(naive, res0.first, res0.second, naive0, kernels::default_exec());
    for (size_t i = 0; i < naive0.numel(); ++i) naive0[i] = std::clamp(naive0[i], -1.0f, 1.0f);
    ag::NoGradGuard ng;
    return g.forward(naive0, NoiseMode::zero, nullptr).value();
}

int cmd_harmonize(const std::string& ckpt, const std::string& naive_path,
                  const std::string& out) {
    LoadedCheckpoint lc = load_checkpoint(ckpt);
    const Tensor naive = load_naive_composite(naive_path, lc.meta.spec);
    const Tensor result = harmonize_forward(lc.generator, lc.meta.spec, naive);
    if (!out.empty() && fs::path(out).has_parent_path())
        fs::create_directories(fs::path(out).parent_path());
    save_image(result, out);
    std::cout << "harmonized " << naive_path << " -> " << out << "\n";
    return 0;
}

int cmd_fine_tune(const std::string& ckpt, const std::string& naive_path, int iters,
                  const std::string& out) {
    LoadedCheckpoint lc = load_checkpoint(ckpt);
    TrainConfig cfg = lc.meta.config;
    cfg.fine_tune_iters = iters;

    const auto pyr = pyramid::build_pyramid(lc.training_image, lc.meta.spec);
    const Tensor naive = load_naive_composite(naive_path, lc.meta.spec);

    TrainState state;
    state.rng.deserialize(lc.meta.rng_state);
    state.stage = lc.meta.completed_stage;
    fine_tune(lc.generator, lc.critic, pyr, naive, cfg, state);

    fs::create_directories(out);
    CheckpointMeta meta = lc.meta;
    meta.rng_state = state.rng.serialize();
    const std::string cdir = (fs::path(out) / "checkpoint").string();
    save_checkpoint(lc.generator, lc.critic, meta, lc.training_image, cdir);

    const Tensor result = harmonize_forward(lc.generator, lc.meta.spec, naive);
    save_image(result, (fs::path(out) / "harmonized.png").string());
    std::cout << "fine-tuned " << iters << " iterations; checkpoint: " << cdir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& ckpt, int n, const std::string& extractor_tag,
                 uint64_t seed, const std::string& out) {
    auto fx = make_extractor(extractor_tag);
    LoadedCheckpoint lc = load_checkpoint(ckpt);
    const EvalReport report =
        evaluate_model(lc.generator, lc.training_image, n, *fx, seed);
    if (!out.empty()) save_eval_report(report, out);
    std::printf("diversity %.4f | sifid %.6f | samples %d | extractor %s\n", report.diversity,
                report.sifid, report.n_samples, report.extractor_tag.c_str());
    return 0;
}

int cmd_inspect(const std::string& input, double r, const std::string& mode, int min_size,
                int max_size) {
    const Tensor image = load_image(input);
    const auto full = pyramid::clamp_to_max({image.dim(1), image.dim(2)}, max_size);
    auto print_spec = [&](pyramid::Mode m) {
        const auto spec = pyramid::make_spec(full, m, r, min_size, max_size);
        std::printf("%s (r=%.3f, r_eff=%.4f, %d stages):\n", pyramid::mode_name(m), r,
                    spec.r_eff, spec.stage_count());
        for (const auto& line : pyramid::schedule_lines(spec)) std::printf("  %s\n", line.c_str());
    };
    if (mode == "both") {
        const auto old_spec = pyramid::make_spec(full, pyramid::Mode::old_geometric, r, min_size, max_size);
        const auto new_spec = pyramid::make_spec(full, pyramid::Mode::new_skewed, r, min_size, max_size);
        const auto old_lines = pyramid::schedule_lines(old_spec);
        const auto new_lines = pyramid::schedule_lines(new_spec);
        std::printf("input %dx%d (clamped to %dx%d), r=%.3f, r_eff=%.4f\n", image.dim(1),
                    image.dim(2), full.first, full.second, r, new_spec.r_eff);
        std::printf("  %-32s | %s\n", "old_geometric", "new_skewed");
        for (size_t i = 0; i < std::max(old_lines.size(), new_lines.size()); ++i)
            std::printf("  %-32s | %s\n",
                        i < old_lines.size() ? old_lines[i].c_str() : "",
                        i < new_lines.size() ? new_lines[i].c_str() : "");
    } else {
        print_spec(pyramid::mode_from_name(mode));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"single-image GAN: concurrent multi-stage training toolkit"};
    app.require_subcommand(1);

    TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "train a model on a single image");
    train_cmd->add_option("--input", tf.input, "training image (PNG/JPEG)")->required();
    train_cmd->add_option("--out", tf.out, "output run directory")->required();
    train_cmd->add_option("--config", tf.config_path, "JSON config file");
    train_cmd->add_option("--task", tf.task, "unconditional|harmonization");
    train_cmd->add_option("--r", tf.r, "nominal per-stage scale in (0,1)");
    train_cmd->add_option("--min-size", tf.min_size, "shorter side at stage 0");
    train_cmd->add_option("--max-size", tf.max_size, "longer-side clamp for the input");
    train_cmd->add_option("--stages-window", tf.window, "concurrently trained stages k");
    train_cmd->add_option("--lr-scale", tf.lr_scale, "learning-rate ladder scale in [0,1]");
    train_cmd->add_option("--iters", tf.iters, "iterations per stage");
    train_cmd->add_option("--seed", tf.seed, "RNG seed");
    train_cmd->add_option("--stages", tf.stages, "pin the total stage count");
    train_cmd->add_option("--channels", tf.channels, "feature channel width");
    train_cmd->add_option("--rescale-mode", tf.rescale_mode, "old_geometric|new_skewed");
    train_cmd->add_option("--alpha", tf.alpha, "reconstruction weight");
    train_cmd->add_option("--gp-lambda", tf.gp_lambda, "gradient penalty weight");
    train_cmd->add_option("--lr", tf.eta, "base learning rate");
    train_cmd->add_option("--noise-amp", tf.noise_amp, "per-stage feature noise amplitude");
    train_cmd->add_option("--d-steps", tf.d_steps, "critic updates per iteration");
    train_cmd->add_option("--g-steps", tf.g_steps, "generator updates per iteration");

    std::string gen_ckpt, gen_out;
    int gen_n = 1;
    double gen_sh = 1.0, gen_sw = 1.0;
    uint64_t gen_seed = 0;
    auto* gen_cmd = app.add_subcommand("generate", "sample images from a trained model");
    gen_cmd->add_option("--ckpt", gen_ckpt, "checkpoint directory")->required();
    gen_cmd->add_option("--out", gen_out, "output directory")->required();
    gen_cmd->add_option("--n", gen_n, "number of samples");
    gen_cmd->add_option("--scale-h", gen_sh, "height scale of the input noise field");
    gen_cmd->add_option("--scale-w", gen_sw, "width scale of the input noise field");
    gen_cmd->add_option("--seed", gen_seed, "RNG seed");

    std::string har_ckpt, har_naive, har_out;
    auto* har_cmd = app.add_subcommand("harmonize", "harmonize a cut-and-paste composite");
    har_cmd->add_option("--ckpt", har_ckpt, "checkpoint directory")->required();
    har_cmd->add_option("--naive", har_naive, "composite image")->required();
    har_cmd->add_option("--out", har_out, "output image path")->required();

    std::string ft_ckpt, ft_naive, ft_out;
    int ft_iters = 500;
    auto* ft_cmd = app.add_subcommand("fine-tune", "adapt a trained model to one composite");
    ft_cmd->add_option("--ckpt", ft_ckpt, "checkpoint directory")->required();
    ft_cmd->add_option("--naive", ft_naive, "composite image")->required();
    ft_cmd->add_option("--iters", ft_iters, "fine-tuning iterations");
    ft_cmd->add_option("--out", ft_out, "output directory")->required();

    std::string ev_ckpt, ev_extractor = "inception", ev_out;
    int ev_n = 100;
    uint64_t ev_seed = 0;
    auto* ev_cmd = app.add_subcommand("evaluate", "diversity and SIFID of a trained model");
    ev_cmd->add_option("--ckpt", ev_ckpt, "checkpoint directory")->required();
    ev_cmd->add_option("--n", ev_n, "number of generated samples");
    ev_cmd->add_option("--extractor", ev_extractor, "test | inception | file:<path>");
    ev_cmd->add_option("--seed", ev_seed, "RNG seed");
    ev_cmd->add_option("--out", ev_out, "report path (JSON)");

    std::string in_input, in_mode = "both";
    double in_r = 0.55;
    int in_min = 25, in_max = 250;
    auto* in_cmd = app.add_subcommand("inspect", "print the multi-stage resolution schedule");
    in_cmd->add_option("--input", in_input, "image to inspect")->required();
    in_cmd->add_option("--r", in_r, "nominal per-stage scale");
    in_cmd->add_option("--mode", in_mode, "old_geometric | new_skewed | both");
    in_cmd->add_option("--min-size", in_min, "shorter side at stage 0");
    in_cmd->add_option("--max-size", in_max, "longer-side clamp");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(train_cmd, tf);
        if (gen_cmd->parsed())
            return cmd_generate(gen_ckpt, gen_n, gen_sh, gen_sw, gen_seed, gen_out);
        if (har_cmd->parsed()) return cmd_harmonize(har_ckpt, har_naive, har_out);
        if (ft_cmd->parsed()) return cmd_fine_tune(ft_ckpt, ft_naive, ft_iters, ft_out);
        if (ev_cmd->parsed()) return cmd_evaluate(ev_ckpt, ev_n, ev_extractor, ev_seed, ev_out);
        if (in_cmd->parsed()) return cmd_inspect(in_input, in_r, in_mode, in_min, in_max);
    } catch (const Error& e) {
        std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
        return error_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 7;
    }
    return 0;
}
