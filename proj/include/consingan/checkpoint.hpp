#pragma once

#include <string>

#include "consingan/config.hpp"
#include "consingan/model.hpp"
#include "consingan/pyramid.hpp"

namespace consingan {

inline constexpr const char* kCheckpointFormat = "consingan-ckpt-v1";

struct CheckpointMeta {
    std::string format = kCheckpointFormat;
    uint64_t seed = 0;
    std::string rng_state;
    int completed_stage = 0;
    pyramid::PyramidSpec spec;
    TrainConfig config;
};

// Layout: metadata.json plus one raw float32 blob per generator component
// (stem, stage0..stageN, head), one for the critic, and one for the training
// image (so harmonization/evaluation need nothing but the checkpoint). Each
// blob's shape list and sha256 live in the metadata; loads are bit-exact or
// fail loudly.
void save_checkpoint(const GrowingGenerator& g, const PatchCritic& d, const CheckpointMeta& meta,
                     const Tensor& training_image, const std::string& dir);

struct LoadedCheckpoint {
    GrowingGenerator generator;
    PatchCritic critic;
    CheckpointMeta meta;
    Tensor training_image;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace consingan
