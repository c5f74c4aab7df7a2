#include "synth/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace cdrn {

namespace {
struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace

Tensor load_png_rgb(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail("load_png_rgb: cannot open '" + path + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail("load_png_rgb: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("load_png_rgb: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("load_png_rgb: malformed PNG '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("load_png_rgb: '" + path + "' did not normalize to RGB");
    }

    std::vector<unsigned char> rowbuf(static_cast<std::size_t>(w) * 3);
    Tensor img = Tensor::zeros({3, h, w});
    auto v = img.mut();
    for (int y = 0; y < h; ++y) {
        png_read_row(png, rowbuf.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                v[(static_cast<std::size_t>(c) * h + y) * w + x] =
                    static_cast<real>(rowbuf[static_cast<std::size_t>(x) * 3 + c] / 255.0);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_png_rgb(const Tensor& img, const std::string& path) {
    if (img.ndim() != 3 || img.dim(0) != 3)
        fail("save_png_rgb: expected [3,H,W] image, got " + shape_str(img.shape()));
    const int h = img.dim(1), w = img.dim(2);

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail("save_png_rgb: cannot open '" + path + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail("save_png_rgb: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("save_png_rgb: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("save_png_rgb: write failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    auto v = img.values();
    std::vector<unsigned char> rowbuf(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                const double val = std::clamp(
                    static_cast<double>(v[(static_cast<std::size_t>(c) * h + y) * w + x]), 0.0, 1.0);
                rowbuf[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(val * 255.0));
            }
        png_write_row(png, rowbuf.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace cdrn
