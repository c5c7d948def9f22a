#include "consingan/image_io.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <vector>

#include <jpeglib.h>
#include <png.h>

namespace consingan {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

Tensor from_rgb8(const std::vector<unsigned char>& rgb, int h, int w) {
    Tensor out({3, h, w});
    const size_t plane = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c)
            out[static_cast<size_t>(c) * plane + i] =
                static_cast<float>(rgb[3 * i + static_cast<size_t>(c)]) / 127.5f - 1.0f;
    return out;
}

std::vector<unsigned char> to_rgb8(const Tensor& image) {
    const int h = image.dim(1), w = image.dim(2);
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<unsigned char> rgb(plane * 3);
    for (size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) {
            const float v = (image[static_cast<size_t>(c) * plane + i] + 1.0f) * 127.5f;
            // nearbyint under the default mode rounds half to even
            const float r = std::nearbyintf(std::clamp(v, 0.0f, 255.0f));
            rgb[3 * i + static_cast<size_t>(c)] = static_cast<unsigned char>(r);
        }
    return rgb;
}

Tensor load_png(const std::string& path, FILE* fp) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed for " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("truncated or invalid PNG: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    png_set_strip_alpha(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    std::vector<unsigned char> rgb(static_cast<size_t>(h) * w * 3);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = rgb.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return from_rgb8(rgb, h, w);
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    longjmp(err->jump, 1);
}

Tensor load_jpeg(const std::string& path, FILE* fp) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw IoError("truncated or invalid JPEG: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    std::vector<unsigned char> rgb(static_cast<size_t>(h) * w * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = rgb.data() + static_cast<size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return from_rgb8(rgb, h, w);
}

}  // namespace

Tensor load_image(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open image " + path);
    unsigned char magic[8] = {};
    const size_t got = std::fread(magic, 1, sizeof(magic), fp.get());
    std::rewind(fp.get());
    if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) return load_png(path, fp.get());
    if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return load_jpeg(path, fp.get());
    throw IoError("unsupported image format (expected PNG or JPEG): " + path);
}

namespace {

void save_png(const Tensor& image, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path);
    }
    const int h = image.dim(1), w = image.dim(2);
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    auto rgb = to_rgb8(image);
    for (int y = 0; y < h; ++y)
        png_write_row(png, rgb.data() + static_cast<size_t>(y) * w * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void save_jpeg(const Tensor& image, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path);
    jpeg_compress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_compress(&cinfo);
        throw IoError("JPEG write failed: " + path);
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, fp.get());
    const int h = image.dim(1), w = image.dim(2);
    cinfo.image_width = static_cast<JDIMENSION>(w);
    cinfo.image_height = static_cast<JDIMENSION>(h);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, 95, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    auto rgb = to_rgb8(image);
    while (cinfo.next_scanline < cinfo.image_height) {
        unsigned char* row = rgb.data() + static_cast<size_t>(cinfo.next_scanline) * w * 3;
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
}

}  // namespace

void save_image(const Tensor& image, const std::string& path) {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw InvalidArgumentError("save_image expects a {3,H,W} tensor");
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const std::string tmp = path + ".tmp";
    if (ext == ".png")
        save_png(image, tmp);
    else if (ext == ".jpg" || ext == ".jpeg")
        save_jpeg(image, tmp);
    else
        throw InvalidArgumentError("save_image: unsupported extension '" + ext + "'");
    std::filesystem::rename(tmp, path);
}

}  // namespace consingan
