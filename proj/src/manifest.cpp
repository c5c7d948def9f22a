#include "consingan/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace consingan {

// ---------------------------------------------------------------------------
// TrainConfig
// ---------------------------------------------------------------------------

const char* task_name(TaskKind t) {
    return t == TaskKind::unconditional ? "unconditional" : "harmonization";
}

TaskKind task_from_name(const std::string& name) {
    if (name == "unconditional") return TaskKind::unconditional;
    if (name == "harmonization") return TaskKind::harmonization;
    throw InvalidArgumentError("unknown task '" + name +
                               "' (expected unconditional or harmonization)");
}

TrainConfig TrainConfig::resolved() const {
    TrainConfig out = *this;
    if (out.iters_per_stage < 0)
        out.iters_per_stage = task == TaskKind::harmonization ? 1000 : 2000;
    if (out.stages_override < 0)
        out.stages_override = task == TaskKind::harmonization ? 3 : 0;
    return out;
}

void TrainConfig::validate() const {
    if (!(delta >= 0.0 && delta <= 1.0))
        throw InvalidArgumentError("lr-scale (delta) must be in [0,1]");
    if (eta <= 0.0) throw InvalidArgumentError("learning rate eta must be positive");
    if (window < 1) throw InvalidArgumentError("stages-window (k) must be >= 1");
    if (iters_per_stage < 0) throw InvalidArgumentError("iterations must be >= 0");
    if (fine_tune_iters < 0) throw InvalidArgumentError("fine-tune iterations must be >= 0");
    if (!(alpha >= 0.0)) throw InvalidArgumentError("alpha must be >= 0");
    if (!(gp_lambda >= 0.0)) throw InvalidArgumentError("gp-lambda must be >= 0");
    if (d_steps < 1 || g_steps < 1)
        throw InvalidArgumentError("d-steps and g-steps must be >= 1");
    if (channels < 1) throw InvalidArgumentError("channel width must be >= 1");
    if (!(r > 0.0 && r < 1.0)) throw InvalidArgumentError("r must be in (0,1)");
    if (min_size < 2) throw InvalidArgumentError("min-size must be >= 2");
    if (max_size < min_size) throw InvalidArgumentError("max-size must be >= min-size");
    if (!(noise_amp >= 0.0)) throw InvalidArgumentError("noise amplitude must be >= 0");
    augment.validate();
}

bool TrainConfig::operator==(const TrainConfig& other) const {
    return config_to_json(*this) == config_to_json(other);
}

namespace {

json augment_to_json(const AugmentSpec& a) {
    return json{{"noise_sigma_min", a.noise_sigma_min},
                {"noise_sigma_max", a.noise_sigma_max},
                {"brightness", a.brightness},
                {"contrast_min", a.contrast_min},
                {"contrast_max", a.contrast_max},
                {"saturation_min", a.saturation_min},
                {"saturation_max", a.saturation_max},
                {"hue_degrees", a.hue_degrees},
                {"p_brightness", a.p_brightness},
                {"p_contrast", a.p_contrast},
                {"p_saturation", a.p_saturation},
                {"p_hue", a.p_hue},
                {"p_noise", a.p_noise},
                {"seed", a.seed}};
}

AugmentSpec augment_from_json(const json& j, AugmentSpec base) {
    base.noise_sigma_min = j.value("noise_sigma_min", base.noise_sigma_min);
    base.noise_sigma_max = j.value("noise_sigma_max", base.noise_sigma_max);
    base.brightness = j.value("brightness", base.brightness);
    base.contrast_min = j.value("contrast_min", base.contrast_min);
    base.contrast_max = j.value("contrast_max", base.contrast_max);
    base.saturation_min = j.value("saturation_min", base.saturation_min);
    base.saturation_max = j.value("saturation_max", base.saturation_max);
    base.hue_degrees = j.value("hue_degrees", base.hue_degrees);
    base.p_brightness = j.value("p_brightness", base.p_brightness);
    base.p_contrast = j.value("p_contrast", base.p_contrast);
    base.p_saturation = j.value("p_saturation", base.p_saturation);
    base.p_hue = j.value("p_hue", base.p_hue);
    base.p_noise = j.value("p_noise", base.p_noise);
    base.seed = j.value("seed", base.seed);
    return base;
}

json config_to_json_obj(const TrainConfig& c) {
    return json{{"task", task_name(c.task)},
                {"eta", c.eta},
                {"delta", c.delta},
                {"window", c.window},
                {"iters_per_stage", c.iters_per_stage},
                {"fine_tune_iters", c.fine_tune_iters},
                {"alpha", c.alpha},
                {"gp_lambda", c.gp_lambda},
                {"seed", c.seed},
                {"d_steps", c.d_steps},
                {"g_steps", c.g_steps},
                {"channels", c.channels},
                {"noise_amp", c.noise_amp},
                {"r", c.r},
                {"min_size", c.min_size},
                {"max_size", c.max_size},
                {"rescale_mode", pyramid::mode_name(c.rescale_mode)},
                {"stages_override", c.stages_override},
                {"augment", augment_to_json(c.augment)}};
}

TrainConfig config_from_json_obj(const json& j, TrainConfig base) {
    if (j.contains("task")) base.task = task_from_name(j.at("task").get<std::string>());
    base.eta = j.value("eta", base.eta);
    base.delta = j.value("delta", base.delta);
    base.window = j.value("window", base.window);
    base.iters_per_stage = j.value("iters_per_stage", base.iters_per_stage);
    base.fine_tune_iters = j.value("fine_tune_iters", base.fine_tune_iters);
    base.alpha = j.value("alpha", base.alpha);
    base.gp_lambda = j.value("gp_lambda", base.gp_lambda);
    base.seed = j.value("seed", base.seed);
    base.d_steps = j.value("d_steps", base.d_steps);
    base.g_steps = j.value("g_steps", base.g_steps);
    base.channels = j.value("channels", base.channels);
    base.noise_amp = j.value("noise_amp", base.noise_amp);
    base.r = j.value("r", base.r);
    base.min_size = j.value("min_size", base.min_size);
    base.max_size = j.value("max_size", base.max_size);
    if (j.contains("rescale_mode"))
        base.rescale_mode = pyramid::mode_from_name(j.at("rescale_mode").get<std::string>());
    base.stages_override = j.value("stages_override", base.stages_override);
    if (j.contains("augment")) base.augment = augment_from_json(j.at("augment"), base.augment);
    return base;
}

}  // namespace

std::string config_to_json(const TrainConfig& cfg) { return config_to_json_obj(cfg).dump(2); }

TrainConfig config_from_json(const std::string& text, TrainConfig base) {
    try {
        return config_from_json_obj(json::parse(text), std::move(base));
    } catch (const json::exception& e) {
        throw IoError("invalid config JSON: " + std::string(e.what()));
    }
}

// ---------------------------------------------------------------------------
// PyramidSpec
// ---------------------------------------------------------------------------

std::string pyramid_spec_to_json(const pyramid::PyramidSpec& spec) {
    json j{{"mode", pyramid::mode_name(spec.mode)},
           {"r_nominal", spec.r_nominal},
           {"r_eff", spec.r_eff},
           {"final_stage", spec.final_stage},
           {"min_len", spec.min_len},
           {"max_len", spec.max_len}};
    json res = json::array();
    for (const auto& [h, w] : spec.resolutions) res.push_back(json::array({h, w}));
    j["resolutions"] = res;
    return j.dump(2);
}

pyramid::PyramidSpec pyramid_spec_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        pyramid::PyramidSpec spec;
        spec.mode = pyramid::mode_from_name(j.at("mode").get<std::string>());
        spec.r_nominal = j.at("r_nominal").get<double>();
        spec.r_eff = j.at("r_eff").get<double>();
        spec.final_stage = j.at("final_stage").get<int>();
        spec.min_len = j.at("min_len").get<int>();
        spec.max_len = j.at("max_len").get<int>();
        for (const auto& rv : j.at("resolutions"))
            spec.resolutions.emplace_back(rv.at(0).get<int>(), rv.at(1).get<int>());
        return spec;
    } catch (const json::exception& e) {
        throw IoError("invalid pyramid spec JSON: " + std::string(e.what()));
    }
}

// ---------------------------------------------------------------------------
// RunManifest
// ---------------------------------------------------------------------------

bool RunManifest::operator==(const RunManifest& other) const {
    return manifest_to_json(*this) == manifest_to_json(other);
}

std::string manifest_to_json(const RunManifest& m) {
    json j{{"format", m.format},
           {"config", config_to_json_obj(m.config)},
           {"pyramid", json::parse(pyramid_spec_to_json(m.spec))},
           {"input_path", m.input_path},
           {"input_sha256", m.input_sha256},
           {"started_at", m.started_at},
           {"finished_at", m.finished_at}};
    return j.dump(2);
}

RunManifest manifest_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        RunManifest m;
        m.format = j.at("format").get<std::string>();
        if (m.format != kManifestFormat)
            throw IncompatibilityError("manifest format '" + m.format + "' is not '" +
                                       kManifestFormat + "'");
        m.config = config_from_json_obj(j.at("config"), TrainConfig{});
        m.spec = pyramid_spec_from_json(j.at("pyramid").dump());
        m.input_path = j.at("input_path").get<std::string>();
        m.input_sha256 = j.at("input_sha256").get<std::string>();
        m.started_at = j.value("started_at", "");
        m.finished_at = j.value("finished_at", "");
        return m;
    } catch (const json::exception& e) {
        throw IoError("invalid manifest JSON: " + std::string(e.what()));
    }
}

void save_manifest(const RunManifest& m, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write " + path);
        out << manifest_to_json(m) << "\n";
    }
    fs::rename(tmp, path);
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return manifest_from_json(text);
}

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

}  // namespace consingan
