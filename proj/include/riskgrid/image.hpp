#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskgrid {

struct ImageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Grayscale raster with intensities in [0,1], row-major, row 0 at top.
struct GrayImage {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(int h, int w, double fill = 0.0)
        : height(h), width(w), pixels(static_cast<size_t>(h) * w, fill) {}

    double& at(int r, int c) { return pixels[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return pixels[static_cast<size_t>(r) * width + c]; }
};

struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;  // 3 bytes per pixel

    RgbImage() = default;
    RgbImage(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w * 3, 0) {}

    std::uint8_t* at(int r, int c) { return &pixels[(static_cast<size_t>(r) * width + c) * 3]; }
};

/// Decode an 8-bit grayscale/RGB/RGBA/palette PNG; color collapses to
/// luminance 0.299 R + 0.587 G + 0.114 B, scaled to [0,1].
GrayImage read_png_gray(const std::string& path);

/// Encode as 8-bit grayscale (values clamped to [0,1]).
void write_png_gray(const std::string& path, const GrayImage& img);

void write_png_rgb(const std::string& path, const RgbImage& img);

}  // namespace riskgrid
