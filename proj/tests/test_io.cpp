#include <doctest.h>

#include <png.h>

#include <cstdio>
#include <fstream>

#include "consingan/checkpoint.hpp"
#include "consingan/image_io.hpp"
#include "consingan/manifest.hpp"
#include "consingan/pyramid.hpp"
#include "consingan/sha256.hpp"
#include "test_helpers.hpp"

using namespace consingan;

namespace {

void write_gray_png(const std::string& path, int h, int w) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    REQUIRE(fp != nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    REQUIRE_FALSE(setjmp(png_jmpbuf(png)));
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(static_cast<size_t>(w));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) row[static_cast<size_t>(x)] = static_cast<unsigned char>((x * 3 + y) % 256);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

struct SmallModel {
    pyramid::PyramidSpec spec;
    GrowingGenerator g;
    PatchCritic d;
};

SmallModel small_model(uint64_t seed, int stages = 2) {
    const auto spec =
        pyramid::make_spec({40, 40}, pyramid::Mode::old_geometric, 0.55, 25, 250, stages);
    RngStream rng(seed);
    GrowingGenerator g(spec.resolutions, 8, 0.1, rng);
    while (g.stage_count() < stages) g.grow(rng);
    PatchCritic d(8, rng);
    return SmallModel{spec, std::move(g), std::move(d)};
}

CheckpointMeta make_meta(const pyramid::PyramidSpec& spec) {
    CheckpointMeta meta;
    meta.seed = 11;
    meta.rng_state = RngStream(11).serialize();
    meta.completed_stage = 1;
    meta.spec = spec;
    meta.config = TrainConfig{}.resolved();
    return meta;
}

}  // namespace

TEST_CASE("PNG save/load round trip stays within the 8-bit quantization bound") {
    testutil::TempDir dir("png");
    const Tensor img = testutil::synthetic_image(33, 41);
    const std::string path = dir.str() + "/img.png";
    save_image(img, path);
    const Tensor back = load_image(path);
    REQUIRE(back.shape() == img.shape());
    for (size_t i = 0; i < img.numel(); ++i)
        CHECK(std::abs(back[i] - img[i]) <= 1.0f / 255.0f + 1e-6f);
}

TEST_CASE("JPEG save/load round trip is close on smooth content") {
    testutil::TempDir dir("jpg");
    const Tensor img = testutil::smooth_image(40, 48);
    const std::string path = dir.str() + "/img.jpg";
    save_image(img, path);
    const Tensor back = load_image(path);
    REQUIRE(back.shape() == img.shape());
    double max_err = 0.0;
    for (size_t i = 0; i < img.numel(); ++i)
        max_err = std::max(max_err, std::abs(static_cast<double>(back[i]) - img[i]));
    CHECK(max_err < 0.1);
}

TEST_CASE("a 188x250 image loads with that shape") {
    testutil::TempDir dir("shape");
    const std::string path = dir.str() + "/img.png";
    save_image(testutil::synthetic_image(188, 250), path);
    const Tensor back = load_image(path);
    CHECK(back.dim(1) == 188);
    CHECK(back.dim(2) == 250);
}

TEST_CASE("grayscale input is promoted to three equal channels") {
    testutil::TempDir dir("gray");
    const std::string path = dir.str() + "/gray.png";
    write_gray_png(path, 21, 27);
    const Tensor img = load_image(path);
    REQUIRE(img.shape() == std::vector<int>{3, 21, 27});
    const size_t plane = 21 * 27;
    for (size_t i = 0; i < plane; ++i) {
        CHECK(img[i] == img[plane + i]);
        CHECK(img[i] == img[2 * plane + i]);
    }
}

TEST_CASE("unsupported and truncated files raise io errors with the path") {
    testutil::TempDir dir("bad");
    const std::string text = dir.str() + "/notimage.png";
    {
        std::ofstream out(text);
        out << "plain text";
    }
    CHECK_THROWS_AS(load_image(text), IoError);

    // truncate a valid png
    const std::string full = dir.str() + "/ok.png";
    save_image(testutil::synthetic_image(32, 32), full);
    std::ifstream in(full, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string cut = dir.str() + "/cut.png";
    {
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 3));
    }
    try {
        load_image(cut);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("cut.png") != std::string::npos);
    }

    CHECK_THROWS_AS(load_image(dir.str() + "/missing.png"), IoError);
}

TEST_CASE("checkpoint round trip is bit exact") {
    testutil::TempDir dir("ckpt");
    auto m = small_model(31);
    const Tensor train_img = testutil::synthetic_image(40, 40, 32);
    save_checkpoint(m.g, m.d, make_meta(m.spec), train_img, dir.str());

    const LoadedCheckpoint back = load_checkpoint(dir.str());
    CHECK(hash_params(back.generator.all_params()) == hash_params(m.g.all_params()));
    CHECK(hash_params(back.critic.params()) == hash_params(m.d.params()));
    CHECK(back.meta.completed_stage == 1);
    CHECK(back.meta.seed == 11);
    CHECK(back.meta.rng_state == RngStream(11).serialize());
    CHECK(back.meta.spec.resolutions == m.spec.resolutions);
    CHECK(back.meta.spec.r_eff == m.spec.r_eff);
    for (size_t i = 0; i < train_img.numel(); ++i) CHECK(back.training_image[i] == train_img[i]);
    CHECK(back.generator.channels() == 8);
    CHECK(back.generator.stage_count() == 2);
}

TEST_CASE("version tag mismatch raises an incompatibility error") {
    testutil::TempDir dir("ckptv0");
    auto m = small_model(33);
    save_checkpoint(m.g, m.d, make_meta(m.spec), testutil::synthetic_image(40, 40), dir.str());

    // rewrite the format tag
    const std::string meta_path = dir.str() + "/metadata.json";
    std::ifstream in(meta_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("consingan-ckpt-v1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 17, "consingan-ckpt-v0");
    {
        std::ofstream out(meta_path);
        out << text;
    }
    CHECK_THROWS_AS(load_checkpoint(dir.str()), IncompatibilityError);
}

TEST_CASE("missing or corrupted blobs are detected") {
    testutil::TempDir dir("ckptbad");
    auto m = small_model(34);
    save_checkpoint(m.g, m.d, make_meta(m.spec), testutil::synthetic_image(40, 40), dir.str());

    SUBCASE("flipped byte") {
        std::fstream f(dir.str() + "/stage0.bin",
                       std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(64);
        char b;
        f.seekg(64);
        f.read(&b, 1);
        b = static_cast<char>(b ^ 0x40);
        f.seekp(64);
        f.write(&b, 1);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(dir.str()), CorruptionError);
    }
    SUBCASE("missing blob") {
        std::filesystem::remove(dir.str() + "/critic.bin");
        CHECK_THROWS_AS(load_checkpoint(dir.str()), CorruptionError);
    }
}

TEST_CASE("manifest round trips losslessly") {
    RunManifest m;
    m.config = TrainConfig{}.resolved();
    m.config.seed = 99;
    m.config.task = TaskKind::harmonization;
    m.spec = pyramid::make_spec({188, 250}, pyramid::Mode::new_skewed, 0.55, 25, 250);
    m.input_path = "images/demo.png";
    m.input_sha256 = sha256_hex("demo");
    m.started_at = "2026-08-09T10:00:00Z";
    m.finished_at = "2026-08-09T10:21:00Z";

    const RunManifest back = manifest_from_json(manifest_to_json(m));
    CHECK(back == m);

    testutil::TempDir dir("manifest");
    save_manifest(m, dir.str() + "/manifest.json");
    CHECK(load_manifest(dir.str() + "/manifest.json") == m);
}

TEST_CASE("config json applies partial overrides over a base") {
    TrainConfig base;
    const TrainConfig out = config_from_json(R"({"delta": 0.5, "window": 2})", base);
    CHECK(out.delta == 0.5);
    CHECK(out.window == 2);
    CHECK(out.eta == base.eta);
    CHECK(out.channels == base.channels);

    CHECK_THROWS_AS(config_from_json("not json"), IoError);
}

TEST_CASE("config validation catches bad values") {
    TrainConfig cfg = TrainConfig{}.resolved();
    cfg.delta = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = TrainConfig{}.resolved();
    cfg.window = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = TrainConfig{}.resolved();
    cfg.r = 1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
}

TEST_CASE("sha256 reference vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
