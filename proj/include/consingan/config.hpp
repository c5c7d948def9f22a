#pragma once

#include <cstdint>
#include <string>

#include "consingan/augment.hpp"
#include "consingan/pyramid.hpp"

namespace consingan {

enum class TaskKind { unconditional, harmonization };

const char* task_name(TaskKind t);
TaskKind task_from_name(const std::string& name);

// Fully describes one training run. iters_per_stage / stages_override use -1
// for "pick the task default" (2000 iterations and r-derived stage count for
// unconditional; 1000 iterations and exactly 3 stages for harmonization).
struct TrainConfig {
    TaskKind task = TaskKind::unconditional;
    double eta = 5e-4;    // base learning rate
    double delta = 0.1;   // ladder scale, lr = eta * delta^depth
    int window = 3;       // concurrently trained stages (k)
    int iters_per_stage = -1;
    int fine_tune_iters = 500;
    double alpha = 10.0;
    double gp_lambda = 0.1;
    uint64_t seed = 0;
    int d_steps = 3;
    int g_steps = 3;
    int channels = 64;
    double noise_amp = 0.1;
    double r = 0.55;
    int min_size = 25;
    int max_size = 250;
    pyramid::Mode rescale_mode = pyramid::Mode::new_skewed;
    int stages_override = -1;
    AugmentSpec augment;

    TrainConfig resolved() const;
    void validate() const;  // call on a resolved config

    bool operator==(const TrainConfig& other) const;
};

std::string config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& json_text, TrainConfig base = {});

}  // namespace consingan
