#include <doctest.h>

#include <cmath>

#include "consingan/pyramid.hpp"
#include "test_helpers.hpp"

using namespace consingan;
using pyramid::Mode;

namespace {

using Res = std::pair<int, int>;

// the two six-stage ladders for a 188x250 image fitted to min side 25
const std::vector<Res> kNewLadder = {{25, 34}, {32, 42},   {42, 56},
                                     {63, 84}, {126, 167}, {188, 250}};
const std::vector<Res> kOldLadder = {{25, 34}, {38, 50},   {57, 75},
                                     {84, 112}, {126, 167}, {188, 250}};

bool within_one(Res a, Res b) {
    return std::abs(a.first - b.first) <= 1 && std::abs(a.second - b.second) <= 1;
}

double tensor_mean(const Tensor& t) {
    double acc = 0.0;
    for (size_t i = 0; i < t.numel(); ++i) acc += t[i];
    return acc / static_cast<double>(t.numel());
}

}  // namespace

TEST_CASE("effective_scale solves full * r^N = target") {
    const double r = pyramid::effective_scale(25, 188, 5);
    CHECK(188.0 * std::pow(r, 5) == doctest::Approx(25.0).epsilon(1e-9));
    CHECK(r == doctest::Approx(0.668).epsilon(2e-3));

    CHECK(pyramid::effective_scale(25, 25, 3) == 1.0);
    CHECK(pyramid::effective_scale(50, 200, 2) == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(pyramid::effective_scale(0, 10, 1), InvalidArgumentError);
    CHECK_THROWS_AS(pyramid::effective_scale(30, 10, 1), InvalidArgumentError);
    CHECK_THROWS_AS(pyramid::effective_scale(5, 10, 0), InvalidArgumentError);
}

TEST_CASE("num_stages matches the reported stage counts") {
    CHECK(pyramid::num_stages(0.55, 25, {188, 250}) == 5);  // six stages 0..5
    const int n75 = pyramid::num_stages(0.75, 25, {188, 250});
    CHECK(n75 >= 8);
    CHECK(n75 <= 10);
    // already at the minimum: clamps to one step
    CHECK(pyramid::num_stages(0.5, 188, {188, 250}) == 1);

    CHECK_THROWS_AS(pyramid::num_stages(1.5, 25, {188, 250}), InvalidArgumentError);
    CHECK_THROWS_AS(pyramid::num_stages(0.5, 1, {188, 250}), InvalidArgumentError);
}

TEST_CASE("stage_resolution reproduces both printed six-stage ladders") {
    const double r_eff = pyramid::effective_scale(25, 188, 5);
    for (int n = 0; n <= 5; ++n) {
        const auto got_new = pyramid::stage_resolution(n, Mode::new_skewed, r_eff, 5, {188, 250});
        const auto got_old =
            pyramid::stage_resolution(n, Mode::old_geometric, r_eff, 5, {188, 250});
        CAPTURE(n);
        CHECK(within_one(got_new, kNewLadder[static_cast<size_t>(n)]));
        CHECK(within_one(got_old, kOldLadder[static_cast<size_t>(n)]));
        // the ceil rounding convention lands on the printed values exactly
        CHECK(got_new == kNewLadder[static_cast<size_t>(n)]);
        CHECK(got_old == kOldLadder[static_cast<size_t>(n)]);
    }
}

TEST_CASE("final stage is the full image in any mode") {
    CHECK(pyramid::stage_resolution(5, Mode::new_skewed, 0.7, 5, {188, 250}) == Res{188, 250});
    CHECK(pyramid::stage_resolution(3, Mode::old_geometric, 0.7, 3, {101, 77}) == Res{101, 77});
}

TEST_CASE("skewed exponent is logarithm-base invariant") {
    // recompute the exponent with log10 instead of natural log
    for (int N : {2, 3, 5, 9}) {
        for (int n = 0; n < N; ++n) {
            const double want = pyramid::stage_exponent(n, Mode::new_skewed, N);
            const double via_log10 = (N - 1) / std::log10(static_cast<double>(N)) *
                                         std::log10(static_cast<double>(N - n)) +
                                     1.0;
            CHECK(want == doctest::Approx(via_log10).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(pyramid::stage_exponent(0, Mode::new_skewed, 1), InvalidArgumentError);
}

TEST_CASE("new schedule keeps low-resolution stages denser than the old one") {
    const auto spec_new = pyramid::make_spec({188, 250}, Mode::new_skewed, 0.55, 25, 250);
    const auto spec_old = pyramid::make_spec({188, 250}, Mode::old_geometric, 0.55, 25, 250);
    REQUIRE(spec_new.final_stage == spec_old.final_stage);
    const int N = spec_new.final_stage;
    for (int n = 0; n <= N - 2; ++n) {
        CHECK(spec_new.resolutions[static_cast<size_t>(n)].first <=
              spec_old.resolutions[static_cast<size_t>(n)].first);
        CHECK(spec_new.resolutions[static_cast<size_t>(n)].second <=
              spec_old.resolutions[static_cast<size_t>(n)].second);
    }
    CHECK(spec_new.resolutions[static_cast<size_t>(N - 1)] ==
          spec_old.resolutions[static_cast<size_t>(N - 1)]);
    CHECK(spec_new.resolutions[static_cast<size_t>(N)] ==
          spec_old.resolutions[static_cast<size_t>(N)]);
}

TEST_CASE("resolutions are non-decreasing and aspect-consistent in both modes") {
    for (Mode mode : {Mode::new_skewed, Mode::old_geometric}) {
        const auto spec = pyramid::make_spec({188, 250}, mode, 0.55, 25, 250);
        const double full_aspect = 188.0 / 250.0;
        for (size_t n = 0; n < spec.resolutions.size(); ++n) {
            const auto [h, w] = spec.resolutions[n];
            CHECK(h >= 2);
            CHECK(w >= 2);
            if (n > 0) {
                CHECK(h >= spec.resolutions[n - 1].first);
                CHECK(w >= spec.resolutions[n - 1].second);
            }
            // aspect within the +-1 px rounding of each side
            CHECK(std::abs(h - full_aspect * w) <= 1.0 + full_aspect);
        }
        CHECK(spec.resolutions.back() == Res{188, 250});
    }
}

TEST_CASE("sides clamp at 2 px for extreme aspect ratios") {
    const auto res = pyramid::stage_resolution(0, Mode::old_geometric, 0.1, 1, {4, 300});
    CHECK(res.first == 2);
    CHECK(res.second == 30);
}

TEST_CASE("make_spec honors a pinned stage count") {
    const auto spec = pyramid::make_spec({64, 64}, Mode::new_skewed, 0.55, 25, 250, 3);
    CHECK(spec.stage_count() == 3);
    CHECK(spec.resolutions.front().first == 25);
    CHECK(spec.resolutions.back() == Res{64, 64});
    // single pinned stage degenerates to the full image only
    const auto single = pyramid::make_spec({40, 50}, Mode::new_skewed, 0.55, 25, 250, 1);
    CHECK(single.resolutions == std::vector<Res>{{40, 50}});
}

TEST_CASE("clamp_to_max shrinks only oversized images") {
    CHECK(pyramid::clamp_to_max({188, 250}, 250) == Res{188, 250});
    CHECK(pyramid::clamp_to_max({376, 500}, 250) == Res{188, 250});
    CHECK(pyramid::clamp_to_max({100, 80}, 250) == Res{100, 80});
}

TEST_CASE("build_pyramid level shapes reproduce the spec resolutions exactly") {
    const Tensor img = testutil::synthetic_image(188, 250);
    const auto spec = pyramid::make_spec({188, 250}, Mode::new_skewed, 0.55, 25, 250);
    const auto pyr = pyramid::build_pyramid(img, spec);
    REQUIRE(pyr.levels.size() == spec.resolutions.size());
    for (size_t n = 0; n < pyr.levels.size(); ++n) {
        CHECK(pyr.levels[n].dim(1) == spec.resolutions[n].first);
        CHECK(pyr.levels[n].dim(2) == spec.resolutions[n].second);
    }
    // top level is the input
    for (size_t i = 0; i < img.numel(); ++i) CHECK(pyr.levels.back()[i] == img[i]);
}

TEST_CASE("build_pyramid keeps constants constant") {
    Tensor gray({3, 64, 80}, 0.25f);
    const auto spec = pyramid::make_spec({64, 80}, Mode::new_skewed, 0.55, 25, 250);
    const auto pyr = pyramid::build_pyramid(gray, spec);
    for (const auto& level : pyr.levels)
        for (size_t i = 0; i < level.numel(); ++i)
            CHECK(level[i] == doctest::Approx(0.25f).epsilon(1e-4));
}

TEST_CASE("downsampling a checkerboard preserves the mean intensity") {
    Tensor board({3, 188, 250});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 188; ++y)
            for (int x = 0; x < 250; ++x) board.at(c, y, x) = ((y + x) % 2 == 0) ? 0.8f : -0.4f;
    const auto spec = pyramid::make_spec({188, 250}, Mode::new_skewed, 0.55, 25, 250);
    const auto pyr = pyramid::build_pyramid(board, spec);
    CHECK(std::abs(tensor_mean(pyr.levels.front()) - tensor_mean(board)) < 1e-2);
}

TEST_CASE("build_pyramid rejects bad inputs") {
    const auto spec = pyramid::make_spec({64, 64}, Mode::new_skewed, 0.55, 25, 250);
    CHECK_THROWS_AS(pyramid::build_pyramid(Tensor(), spec), IoError);
    CHECK_THROWS_AS(pyramid::build_pyramid(Tensor({3, 32, 32}), spec), IoError);
}

TEST_CASE("schedule dump has one line per stage") {
    const auto spec = pyramid::make_spec({188, 250}, Mode::new_skewed, 0.55, 25, 250);
    const auto lines = pyramid::schedule_lines(spec);
    CHECK(lines.size() == 6);
    CHECK(lines[0].find("25") != std::string::npos);
    CHECK(lines[0].find("34") != std::string::npos);
}
