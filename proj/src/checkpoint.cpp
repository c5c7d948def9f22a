#include "consingan/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "consingan/manifest.hpp"
#include "consingan/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace consingan {

namespace {

void write_blob(const std::vector<ag::Var>& params, const fs::path& path) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        for (const auto& p : params)
            out.write(reinterpret_cast<const char*>(p.value().data()),
                      static_cast<std::streamsize>(p.value().numel() * sizeof(float)));
        if (!out) throw IoError("short write to " + path.string());
    }
    fs::rename(tmp, path);
}

void read_blob(const std::vector<ag::Var>& params, const fs::path& path,
               const std::string& expected_sha) {
    if (!fs::exists(path)) throw CorruptionError("missing weight blob " + path.string());
    if (sha256_file(path.string()) != expected_sha)
        throw CorruptionError("weight blob hash mismatch: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    for (const auto& p : params) {
        Tensor& t = const_cast<ag::Var&>(p).mutable_value();
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!in) throw CorruptionError("weight blob too short: " + path.string());
    }
    char extra;
    if (in.read(&extra, 1)) throw CorruptionError("weight blob too long: " + path.string());
}

json shapes_of(const std::vector<ag::Var>& params) {
    json shapes = json::array();
    for (const auto& p : params) shapes.push_back(p.shape());
    return shapes;
}

}  // namespace

void save_checkpoint(const GrowingGenerator& g, const PatchCritic& d, const CheckpointMeta& meta,
                     const Tensor& training_image, const std::string& dir) {
    fs::create_directories(dir);
    json blobs;
    auto emit = [&](const std::string& name, const std::vector<ag::Var>& params) {
        const fs::path path = fs::path(dir) / (name + ".bin");
        write_blob(params, path);
        blobs[name] = {{"shapes", shapes_of(params)}, {"sha256", sha256_file(path.string())}};
    };
    for (const auto& name : g.component_names()) emit(name, g.component_params(name));
    emit("critic", d.params());
    emit("training_image", {ag::Var(training_image)});

    json meta_j;
    meta_j["format"] = meta.format;
    meta_j["seed"] = meta.seed;
    meta_j["rng_state"] = meta.rng_state;
    meta_j["completed_stage"] = meta.completed_stage;
    meta_j["stage_count"] = g.stage_count();
    meta_j["channels"] = g.channels();
    meta_j["noise_amp"] = g.noise_amp();
    meta_j["pyramid"] = json::parse(pyramid_spec_to_json(meta.spec));
    meta_j["config"] = json::parse(config_to_json(meta.config));
    meta_j["blobs"] = blobs;

    const fs::path meta_path = fs::path(dir) / "metadata.json";
    const fs::path tmp = meta_path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write " + meta_path.string());
        out << meta_j.dump(2) << "\n";
    }
    fs::rename(tmp, meta_path);
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    const fs::path meta_path = fs::path(dir) / "metadata.json";
    std::ifstream in(meta_path);
    if (!in) throw IoError("cannot open checkpoint metadata " + meta_path.string());
    json meta_j;
    try {
        in >> meta_j;
    } catch (const json::exception& e) {
        throw CorruptionError("invalid checkpoint metadata: " + std::string(e.what()));
    }

    const std::string format = meta_j.value("format", "");
    if (format != kCheckpointFormat)
        throw IncompatibilityError("checkpoint format '" + format + "' is not '" +
                                   kCheckpointFormat + "'");

    CheckpointMeta meta;
    meta.format = format;
    meta.seed = meta_j.at("seed").get<uint64_t>();
    meta.rng_state = meta_j.at("rng_state").get<std::string>();
    meta.completed_stage = meta_j.at("completed_stage").get<int>();
    meta.spec = pyramid_spec_from_json(meta_j.at("pyramid").dump());
    meta.config = config_from_json(meta_j.at("config").dump());

    const int stage_count = meta_j.at("stage_count").get<int>();
    const int channels = meta_j.at("channels").get<int>();
    const double noise_amp = meta_j.at("noise_amp").get<double>();

    RngStream scratch(0);
    GrowingGenerator g(meta.spec.resolutions, channels, noise_amp, scratch);
    while (g.stage_count() < stage_count) g.grow(scratch);
    PatchCritic d(channels, scratch);

    const json& blobs = meta_j.at("blobs");
    auto fill = [&](const std::string& name, const std::vector<ag::Var>& params) {
        if (!blobs.contains(name)) throw CorruptionError("checkpoint missing blob entry " + name);
        read_blob(params, fs::path(dir) / (name + ".bin"),
                  blobs.at(name).at("sha256").get<std::string>());
    };
    for (const auto& name : g.component_names()) fill(name, g.component_params(name));
    fill("critic", d.params());

    const auto img_shape =
        blobs.at("training_image").at("shapes").at(0).get<std::vector<int>>();
    ag::Var img{Tensor(img_shape)};
    fill("training_image", std::vector<ag::Var>{img});

    return LoadedCheckpoint{std::move(g), std::move(d), std::move(meta), img.value()};
}

}  // namespace consingan
