#pragma once

#include <string>

#include "consingan/config.hpp"
#include "consingan/pyramid.hpp"

namespace consingan {

inline constexpr const char* kManifestFormat = "consingan-manifest-v1";

// Everything needed to reproduce a run: the fully resolved config, the
// realized schedule, and the input identity.
struct RunManifest {
    std::string format = kManifestFormat;
    TrainConfig config;
    pyramid::PyramidSpec spec;
    std::string input_path;
    std::string input_sha256;
    std::string started_at;
    std::string finished_at;

    bool operator==(const RunManifest& other) const;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);
void save_manifest(const RunManifest& m, const std::string& path);
RunManifest load_manifest(const std::string& path);

std::string pyramid_spec_to_json(const pyramid::PyramidSpec& spec);
pyramid::PyramidSpec pyramid_spec_from_json(const std::string& text);

std::string iso8601_now();

}  // namespace consingan
