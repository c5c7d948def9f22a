#pragma once

#include <functional>
#include <string>
#include <vector>

#include "consingan/config.hpp"
#include "consingan/losses.hpp"
#include "consingan/model.hpp"
#include "consingan/pyramid.hpp"
#include "consingan/rng.hpp"

namespace consingan {

struct IterationLoss {
    int iter = 0;
    double critic = 0.0;
    double adv = 0.0;
    double rec = 0.0;
    double total = 0.0;
};

struct StageLog {
    int stage = 0;
    std::vector<double> window_lrs;  // lr per window stage, lowest stage first
    std::vector<IterationLoss> iters;
};

struct TrainState {
    int stage = -1;  // last stage that finished training
    RngStream rng;
    std::vector<StageLog> logs;
};

double lr_for_depth(int depth, const TrainConfig& cfg);

// {max(0, n-k+1), ..., n}
std::vector<int> trainable_window(int n, int k);

// unconditional: fresh 3-channel noise field at the stage-0 resolution;
// harmonization: the full-resolution image jittered, then downsampled.
Tensor sample_generator_input(TaskKind task, const pyramid::ImagePyramid& pyr,
                              const AugmentSpec& aug, RngStream& rng);

struct TrainResult {
    GrowingGenerator generator;
    PatchCritic critic;
    TrainState state;
    pyramid::PyramidSpec spec;
    pyramid::ImagePyramid pyramid;
    std::vector<std::string> checkpoint_dirs;
};

// One stage of adversarial training; only stages inside the window receive
// updates, each at its laddered learning rate. Throws NumericError with the
// iteration index if a loss goes non-finite.
void train_stage(GrowingGenerator& g, PatchCritic& d, const pyramid::ImagePyramid& pyr,
                 const TrainConfig& cfg, TrainState& state);

// Full progressive run. When out_dir is nonempty, emits per-stage loss CSVs,
// one checkpoint per stage, and a run manifest.
TrainResult train(const Tensor& image, const TrainConfig& cfg, const std::string& out_dir = "",
                  const std::string& input_path = "");

// Continue an interrupted run from its last stage checkpoint (which carries
// the training image); bit-identical to the uninterrupted run.
TrainResult resume(const std::string& ckpt_dir, const std::string& out_dir = "");

// Adapt a trained model to one specific composite: the adversarial pass feeds
// the composite (at stage-0 resolution) instead of sampled inputs; the
// reconstruction term is unchanged.
void fine_tune(GrowingGenerator& g, PatchCritic& d, const pyramid::ImagePyramid& pyr,
               const Tensor& naive_image, const TrainConfig& cfg, TrainState& state);

// Shared by train/resume/CLI: longer side clamped to cfg.max_size.
Tensor prepare_training_image(const Tensor& image, const TrainConfig& cfg);

}  // namespace consingan
