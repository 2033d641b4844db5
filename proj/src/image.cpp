#include "riskgrid/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace riskgrid {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

GrayImage read_png_gray(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ImageError("cannot open image: " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw ImageError("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageError("png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageError("png init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("png decode failed: " + path);
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int h = static_cast<int>(png_get_image_height(png, info));
    int w = static_cast<int>(png_get_image_width(png, info));
    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("unsupported channel count in " + path);
    }

    std::vector<png_byte> row(static_cast<size_t>(w) * channels);
    GrayImage img(h, w);
    for (int r = 0; r < h; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int c = 0; c < w; ++c) {
            double v;
            if (channels == 1) {
                v = row[c] / 255.0;
            } else {
                const png_byte* p = &row[static_cast<size_t>(c) * 3];
                v = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
            }
            img.at(r, c) = v;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

namespace {

void write_png_impl(const std::string& path, int h, int w, int color_type,
                    const std::vector<std::vector<png_byte>>& rows) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw ImageError("cannot write image: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageError("png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageError("png init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("png encode failed: " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& r : rows) png_write_row(png, const_cast<png_bytep>(r.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray(const std::string& path, const GrayImage& img) {
    std::vector<std::vector<png_byte>> rows(img.height);
    for (int r = 0; r < img.height; ++r) {
        rows[r].resize(img.width);
        for (int c = 0; c < img.width; ++c) {
            double v = std::clamp(img.at(r, c), 0.0, 1.0);
            rows[r][c] = static_cast<png_byte>(std::lround(v * 255.0));
        }
    }
    write_png_impl(path, img.height, img.width, PNG_COLOR_TYPE_GRAY, rows);
}

void write_png_rgb(const std::string& path, const RgbImage& img) {
    std::vector<std::vector<png_byte>> rows(img.height);
    for (int r = 0; r < img.height; ++r) {
        auto begin = img.pixels.begin() + static_cast<size_t>(r) * img.width * 3;
        rows[r].assign(begin, begin + static_cast<size_t>(img.width) * 3);
    }
    write_png_impl(path, img.height, img.width, PNG_COLOR_TYPE_RGB, rows);
}

}  // namespace riskgrid
