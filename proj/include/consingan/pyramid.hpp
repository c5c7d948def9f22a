#pragma once

#include <string>
#include <utility>
#include <vector>

#include "consingan/tensor.hpp"

namespace consingan::pyramid {

enum class Mode { old_geometric, new_skewed };

const char* mode_name(Mode m);
Mode mode_from_name(const std::string& name);

// Resolution schedule for stages 0..N. `r_eff` is fitted so that the shorter
// side lands exactly on min_len at stage 0; the user-facing r only selects
// the stage count.
struct PyramidSpec {
    Mode mode = Mode::new_skewed;
    double r_nominal = 0.55;
    double r_eff = 1.0;
    int final_stage = 0;  // N; stages are 0..N
    int min_len = 25;
    int max_len = 250;
    std::vector<std::pair<int, int>> resolutions;  // (H, W) per stage

    int stage_count() const { return final_stage + 1; }
};

// r_eff = (target_len / full_len)^(1/N), so full_len * r_eff^N == target_len.
double effective_scale(int target_len, int full_len, int n);

// Smallest ladder (final stage index N) whose shorter side reaches min_len
// when shrinking by r per stage; never below 1.
int num_stages(double r, int min_len, std::pair<int, int> full_hw);

// Exponent applied to r_eff at stage n; stage N is the full image.
double stage_exponent(int n, Mode mode, int final_stage);

std::pair<int, int> stage_resolution(int n, Mode mode, double r_eff, int final_stage,
                                     std::pair<int, int> full_hw);

// stages_override > 0 pins the stage count (harmonization trains exactly 3);
// otherwise the count comes from num_stages with the nominal r.
PyramidSpec make_spec(std::pair<int, int> full_hw, Mode mode, double r, int min_len,
                      int max_len, int stages_override = 0);

// The size of the training image after the longer-side clamp to max_len.
std::pair<int, int> clamp_to_max(std::pair<int, int> full_hw, int max_len);

struct ImagePyramid {
    std::vector<Tensor> levels;  // x_0..x_N, {3,H,W} in [-1,1]
};

ImagePyramid build_pyramid(const Tensor& image, const PyramidSpec& spec);

// One line per stage: index, height, width, exponent on r_eff.
std::vector<std::string> schedule_lines(const PyramidSpec& spec);

}  // namespace consingan::pyramid
