#include "consingan/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "consingan/kernels.hpp"

namespace consingan::pyramid {

const char* mode_name(Mode m) {
    return m == Mode::old_geometric ? "old_geometric" : "new_skewed";
}

Mode mode_from_name(const std::string& name) {
    if (name == "old_geometric" || name == "old") return Mode::old_geometric;
    if (name == "new_skewed" || name == "new") return Mode::new_skewed;
    throw InvalidArgumentError("unknown rescale mode '" + name +
                               "' (expected old_geometric or new_skewed)");
}

double effective_scale(int target_len, int full_len, int n) {
    if (target_len <= 0 || full_len <= 0)
        throw InvalidArgumentError("effective_scale: sizes must be positive");
    if (target_len > full_len)
        throw InvalidArgumentError("effective_scale: target length exceeds full length");
    if (n < 1) throw InvalidArgumentError("effective_scale: need at least one step");
    if (target_len == full_len) return 1.0;
    return std::pow(static_cast<double>(target_len) / full_len, 1.0 / n);
}

int num_stages(double r, int min_len, std::pair<int, int> full_hw) {
    if (!(r > 0.0 && r < 1.0)) throw InvalidArgumentError("num_stages: r must be in (0,1)");
    if (min_len < 2) throw InvalidArgumentError("num_stages: min_len must be >= 2");
    const int shorter = std::min(full_hw.first, full_hw.second);
    if (shorter <= 0) throw InvalidArgumentError("num_stages: empty image");
    const double steps =
        std::log(static_cast<double>(min_len) / shorter) / std::log(r);
    return std::max(1, static_cast<int>(std::ceil(steps - 1e-9)) + 1);
}

double stage_exponent(int n, Mode mode, int final_stage) {
    const int N = final_stage;
    if (n < 0 || n > N) throw InvalidArgumentError("stage_exponent: stage out of range");
    if (n == N) return 0.0;
    if (mode == Mode::old_geometric) return static_cast<double>(N - n);
    if (N < 2)
        throw InvalidArgumentError("stage_exponent: skewed schedule needs at least 3 stages");
    // base cancels in log(N-n)/log(N), so any logarithm base gives the same value
    return (N - 1) / std::log(static_cast<double>(N)) *
               std::log(static_cast<double>(N - n)) +
           1.0;
}

namespace {
int scale_side(int full, double factor) {
    const int v = static_cast<int>(std::ceil(full * factor - 1e-6));
    return std::max(2, v);
}
}  // namespace

std::pair<int, int> stage_resolution(int n, Mode mode, double r_eff, int final_stage,
                                     std::pair<int, int> full_hw) {
    if (n == final_stage) return full_hw;
    const double factor = std::pow(r_eff, stage_exponent(n, mode, final_stage));
    return {scale_side(full_hw.first, factor), scale_side(full_hw.second, factor)};
}

std::pair<int, int> clamp_to_max(std::pair<int, int> full_hw, int max_len) {
    const int longer = std::max(full_hw.first, full_hw.second);
    if (max_len <= 0 || longer <= max_len) return full_hw;
    const double f = static_cast<double>(max_len) / longer;
    auto side = [&](int v) { return std::max(2, static_cast<int>(std::lround(v * f))); };
    return {side(full_hw.first), side(full_hw.second)};
}

PyramidSpec make_spec(std::pair<int, int> full_hw, Mode mode, double r, int min_len,
                      int max_len, int stages_override) {
    PyramidSpec spec;
    spec.mode = mode;
    spec.r_nominal = r;
    spec.min_len = min_len;
    spec.max_len = max_len;
    if (full_hw.first < 2 || full_hw.second < 2)
        throw InvalidArgumentError("make_spec: image sides must be >= 2");

    if (stages_override > 0)
        spec.final_stage = stages_override - 1;
    else
        spec.final_stage = num_stages(r, min_len, full_hw);

    const int shorter = std::min(full_hw.first, full_hw.second);
    if (spec.final_stage == 0) {
        spec.r_eff = 1.0;
    } else {
        spec.r_eff = effective_scale(std::min(min_len, shorter), shorter, spec.final_stage);
    }

    spec.resolutions.reserve(static_cast<size_t>(spec.stage_count()));
    for (int n = 0; n <= spec.final_stage; ++n)
        spec.resolutions.push_back(
            stage_resolution(n, mode, spec.r_eff, spec.final_stage, full_hw));
    return spec;
}

ImagePyramid build_pyramid(const Tensor& image, const PyramidSpec& spec) {
    if (image.empty() || image.ndim() != 3 || image.dim(0) != 3)
        throw IoError("build_pyramid: expected a nonempty {3,H,W} image");
    if (image.dim(1) != spec.resolutions.back().first ||
        image.dim(2) != spec.resolutions.back().second)
        throw IoError("build_pyramid: image shape " + shape_str(image.shape()) +
                      " does not match the final stage resolution");
    ImagePyramid pyr;
    pyr.levels.reserve(spec.resolutions.size());
    for (const auto& [h, w] : spec.resolutions) {
        Tensor level;
        kernels::resize(image, h, w, level, kernels::default_exec());
        for (size_t i = 0; i < level.numel(); ++i)
            level[i] = std::clamp(level[i], -1.0f, 1.0f);
        pyr.levels.push_back(std::move(level));
    }
    return pyr;
}

std::vector<std::string> schedule_lines(const PyramidSpec& spec) {
    std::vector<std::string> lines;
    lines.reserve(spec.resolutions.size());
    for (int n = 0; n <= spec.final_stage; ++n) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%2d  %4dx%-4d  r_eff^%.4f", n,
                      spec.resolutions[static_cast<size_t>(n)].first,
                      spec.resolutions[static_cast<size_t>(n)].second,
                      stage_exponent(n, spec.mode, spec.final_stage));
        lines.emplace_back(buf);
    }
    return lines;
}

}  // namespace consingan::pyramid
