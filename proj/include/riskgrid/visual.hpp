#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgrid/image.hpp"
#include "riskgrid/ingest.hpp"

namespace riskgrid {

class VisualError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary edge image produced by the Canny detector.
struct EdgeMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;  // row-major, 1 = edge

    std::uint8_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
    std::uint8_t& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
};

/// Fixed q values the generalized-dimension spectrum is evaluated on.
/// q = 1 is excluded because D(1) needs a separate limit form.
inline constexpr std::array<double, 8> kQGrid = {-5, -3, -2, -1, 0, 2, 3, 5};
inline constexpr int kSpectrumDim = static_cast<int>(kQGrid.size());

/// Dyadic box sizes used for the box-counting regression.
inline constexpr std::array<int, 7> kBoxSizes = {2, 4, 8, 16, 32, 64, 128};

inline constexpr int kPatchSize = 256;
inline constexpr int kPatchesPerTile = 16;
inline constexpr int kCnnDim = 45;

using FractalSpectrum = std::array<double, kSpectrumDim>;

/// Normalized edge mass per box at one box size; zero-mass boxes excluded.
struct BoxMassTable {
    int size = 0;
    std::vector<double> masses;
};

/// Canny edge detection: 5x5 Gaussian smoothing (sigma 1.4), Sobel
/// gradients, non-maximum suppression, then hysteresis with thresholds at
/// 0.1 / 0.3 of the patch's maximum gradient magnitude. A constant patch
/// yields an all-zero edge map.
EdgeMap canny(const GrayImage& patch);

/// Box masses for every size in kBoxSizes. The edge map must be at least
/// 128x128; an edge map without any edge pixel raises "empty measure".
std::vector<BoxMassTable> box_counts(const EdgeMap& edges);

/// Generalized (Renyi) dimensions on kQGrid: D(q) is 1/(q-1) times the
/// least-squares slope of log sum(mu^q) against log(box size), over all
/// tabulated sizes. Requires at least two sizes.
FractalSpectrum generalized_dimensions(const std::vector<BoxMassTable>& tables);

/// Spectrum of one grayscale patch; a patch whose edge map is empty maps to
/// the reserved all-zero spectrum.
FractalSpectrum patch_spectrum(const GrayImage& patch);

inline bool is_blank_spectrum(const FractalSpectrum& s) {
    for (double v : s)
        if (v != 0.0) return false;
    return true;
}

/// Visual dictionary of K centroid spectra. When blank spectra occur in the
/// fitting set, centroid 0 is reserved as the all-zero spectrum and k-means
/// runs over the remaining slots.
struct FractalDictionary {
    std::vector<FractalSpectrum> centroids;
    bool has_blank = false;
    std::uint64_t seed = 0;
    bool fitted = false;
};

FractalDictionary build_dictionary(const std::vector<FractalSpectrum>& spectra, int k,
                                   std::uint64_t seed);

void save_dictionary(const FractalDictionary& dict, const std::string& path);
FractalDictionary load_dictionary(const std::string& path);

/// Bag-of-words over random patches: sample `patches_per_tile` top-left
/// corners uniformly (seeded), compute each patch's spectrum, assign it to
/// the nearest centroid, and L1-normalize the resulting histogram.
std::vector<double> quantize_bow(const GrayImage& tile, const FractalDictionary& dict,
                                 int patches_per_tile, std::uint64_t seed);

/// Same histogram computed from already-extracted patch spectra.
std::vector<double> bow_from_spectra(const std::vector<FractalSpectrum>& spectra,
                                     const FractalDictionary& dict);

/// Spectra of the sampled patches themselves (same sampling as quantize_bow);
/// used to fit the dictionary over a tile corpus.
std::vector<FractalSpectrum> tile_spectra(const GrayImage& tile, int patches_per_tile,
                                          std::uint64_t seed);

/// Concatenate [x_fra, x_cnn] into X_v, checking block sizes.
std::vector<double> assemble_xv(const std::vector<double>& x_fra,
                                const std::vector<double>& x_cnn, int expect_fra = kSpectrumDim,
                                int expect_cnn = kCnnDim);

}  // namespace riskgrid
