#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "consingan/autograd.hpp"
#include "consingan/rng.hpp"

namespace consingan {

enum class NoiseMode { sampled, zero };

// conv(3x3, stride 1, pad 1) -> optional instance norm -> optional leaky relu.
// Generators use reflection padding, the critic zero padding.
struct ConvBlock {
    ag::Var w;  // {Co,Ci,3,3}
    ag::Var b;  // {Co,1,1}
    ag::Var gamma, beta;
    bool has_norm = false;
    bool has_act = false;
    bool reflect = false;
    double slope = 0.2;

    ag::Var forward(const ag::Var& x) const;
    void collect_params(std::vector<ag::Var>& out) const;
    size_t param_count() const;
};

ConvBlock make_conv_block(int cin, int cout, bool norm, bool act, bool reflect,
                          double w_std, double gamma_init, RngStream& rng);

// Three conv blocks; the residual add with the stage input happens in the
// generator. The last block's norm gain starts at zero so a freshly added
// stage is an exact identity.
struct GeneratorStage {
    std::array<ConvBlock, 3> blocks;

    ag::Var forward(const ag::Var& x) const;
    void collect_params(std::vector<ag::Var>& out) const;
    size_t param_count() const;
};

class GrowingGenerator {
public:
    GrowingGenerator(std::vector<std::pair<int, int>> resolutions, int channels,
                     double noise_amp, RngStream& rng);

    // Appends the next stage block; existing weights are untouched.
    void grow(RngStream& rng);

    int stage_count() const { return static_cast<int>(stages_.size()); }
    int max_stages() const { return static_cast<int>(resolutions_.size()); }
    int channels() const { return channels_; }
    double noise_amp() const { return noise_amp_; }
    const std::vector<std::pair<int, int>>& resolutions() const { return resolutions_; }

    // input {3,h,w} at (a scaling of) the stage-0 resolution; the output image
    // scales proportionally. Deterministic with NoiseMode::zero.
    ag::Var forward(const Tensor& input, NoiseMode mode, RngStream* rng) const;

    size_t param_count() const;
    std::vector<ag::Var> stage_params(int n) const;  // stem belongs to stage 0
    std::vector<ag::Var> head_params() const;
    std::vector<ag::Var> all_params() const;
    // checkpoint blob layout: "stem", "stage0".."stageN", "head"
    std::vector<std::string> component_names() const;
    std::vector<ag::Var> component_params(const std::string& name) const;

    GrowingGenerator clone() const;

private:
    GrowingGenerator() = default;

    std::pair<int, int> scaled_size(size_t n, int in_h, int in_w) const;

    std::vector<std::pair<int, int>> resolutions_;
    int channels_ = 0;
    double noise_amp_ = 0.1;
    ConvBlock stem_;
    std::vector<GeneratorStage> stages_;
    ConvBlock head_;
};

// Five zero-padded conv blocks, no normalization, fixed capacity at every
// stage; each output element sees an 11x11 input patch.
class PatchCritic {
public:
    static constexpr int kReceptiveField = 11;

    PatchCritic(int channels, RngStream& rng);

    ag::Var forward(const ag::Var& image) const;  // score map, same H,W as input
    ag::Var forward(const Tensor& image) const;

    int channels() const { return channels_; }
    size_t param_count() const;
    std::vector<ag::Var> params() const;
    PatchCritic clone() const;

private:
    PatchCritic() = default;

    int channels_ = 0;
    std::array<ConvBlock, 5> blocks_;

    friend PatchCritic warm_start_critic(const PatchCritic&);
};

// Weights of the previous stage's critic carry over bit-for-bit.
PatchCritic warm_start_critic(const PatchCritic& prev);

}  // namespace consingan
