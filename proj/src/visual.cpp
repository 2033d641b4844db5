#include "riskgrid/visual.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "riskgrid/kmeans.hpp"
#include "riskgrid/rng.hpp"

namespace riskgrid {

namespace {

constexpr int kKernelRadius = 2;
constexpr double kSigma = 1.4;
constexpr double kLowRatio = 0.1;
constexpr double kHighRatio = 0.3;

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

std::array<double, 5> gaussian_kernel_1d() {
    std::array<double, 5> k{};
    double sum = 0.0;
    for (int i = -kKernelRadius; i <= kKernelRadius; ++i) {
        k[i + kKernelRadius] = std::exp(-(i * i) / (2.0 * kSigma * kSigma));
        sum += k[i + kKernelRadius];
    }
    for (double& v : k) v /= sum;
    return k;
}

GrayImage gaussian_blur(const GrayImage& img) {
    static const std::array<double, 5> kernel = gaussian_kernel_1d();
    const int h = img.height, w = img.width;
    GrayImage tmp(h, w);
    GrayImage out(h, w);

    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int i = -kKernelRadius; i <= kKernelRadius; ++i)
                acc += kernel[i + kKernelRadius] * img.at(r, clampi(c + i, 0, w - 1));
            tmp.at(r, c) = acc;
        }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int i = -kKernelRadius; i <= kKernelRadius; ++i)
                acc += kernel[i + kKernelRadius] * tmp.at(clampi(r + i, 0, h - 1), c);
            out.at(r, c) = acc;
        }
    return out;
}

}  // namespace

EdgeMap canny(const GrayImage& patch) {
    const int h = patch.height, w = patch.width;
    if (h < 2 * kKernelRadius + 1 || w < 2 * kKernelRadius + 1)
        throw VisualError("patch smaller than smoothing kernel");

    GrayImage smooth = gaussian_blur(patch);

    std::vector<double> gx(static_cast<std::size_t>(h) * w);
    std::vector<double> gy(static_cast<std::size_t>(h) * w);
    std::vector<double> mag(static_cast<std::size_t>(h) * w);
    double max_mag = 0.0;
    auto px = [&](int r, int c) { return smooth.at(clampi(r, 0, h - 1), clampi(c, 0, w - 1)); };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double sx = -px(r - 1, c - 1) + px(r - 1, c + 1) - 2.0 * px(r, c - 1) +
                        2.0 * px(r, c + 1) - px(r + 1, c - 1) + px(r + 1, c + 1);
            double sy = -px(r - 1, c - 1) - 2.0 * px(r - 1, c) - px(r - 1, c + 1) +
                        px(r + 1, c - 1) + 2.0 * px(r + 1, c) + px(r + 1, c + 1);
            std::size_t i = static_cast<std::size_t>(r) * w + c;
            gx[i] = sx;
            gy[i] = sy;
            mag[i] = std::hypot(sx, sy);
            max_mag = std::max(max_mag, mag[i]);
        }

    EdgeMap edges{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, 0)};
    if (max_mag == 0.0) return edges;

    // Non-maximum suppression along the gradient direction.
    std::vector<std::uint8_t> thin(static_cast<std::size_t>(h) * w, 0);
    auto mag_at = [&](int r, int c) -> double {
        if (r < 0 || r >= h || c < 0 || c >= w) return 0.0;
        return mag[static_cast<std::size_t>(r) * w + c];
    };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            std::size_t i = static_cast<std::size_t>(r) * w + c;
            if (mag[i] == 0.0) continue;
            double angle = std::atan2(gy[i], gx[i]) * 180.0 / std::numbers::pi;
            if (angle < 0.0) angle += 180.0;
            double a = 0.0, b = 0.0;
            if (angle < 22.5 || angle >= 157.5) {
                a = mag_at(r, c - 1), b = mag_at(r, c + 1);
            } else if (angle < 67.5) {
                a = mag_at(r - 1, c - 1), b = mag_at(r + 1, c + 1);
            } else if (angle < 112.5) {
                a = mag_at(r - 1, c), b = mag_at(r + 1, c);
            } else {
                a = mag_at(r - 1, c + 1), b = mag_at(r + 1, c - 1);
            }
            if (mag[i] >= a && mag[i] >= b) thin[i] = 1;
        }

    const double high = kHighRatio * max_mag;
    const double low = kLowRatio * max_mag;

    std::vector<std::pair<int, int>> stack;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            std::size_t i = static_cast<std::size_t>(r) * w + c;
            if (thin[i] && mag[i] >= high && !edges.pixels[i]) {
                edges.pixels[i] = 1;
                stack.emplace_back(r, c);
                while (!stack.empty()) {
                    auto [cr, cc] = stack.back();
                    stack.pop_back();
                    for (int dr = -1; dr <= 1; ++dr)
                        for (int dc = -1; dc <= 1; ++dc) {
                            int nr = cr + dr, nc = cc + dc;
                            if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                            std::size_t j = static_cast<std::size_t>(nr) * w + nc;
                            if (!edges.pixels[j] && thin[j] && mag[j] >= low) {
                                edges.pixels[j] = 1;
                                stack.emplace_back(nr, nc);
                            }
                        }
                }
            }
        }
    return edges;
}

std::vector<BoxMassTable> box_counts(const EdgeMap& edges) {
    const int h = edges.height, w = edges.width;
    if (h < kBoxSizes.back() || w < kBoxSizes.back())
        throw VisualError("edge map smaller than the largest box size");

    // Integral image for O(1) box sums.
    std::vector<std::int64_t> integral(static_cast<std::size_t>(h + 1) * (w + 1), 0);
    auto I = [&](int r, int c) -> std::int64_t& {
        return integral[static_cast<std::size_t>(r) * (w + 1) + c];
    };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            I(r + 1, c + 1) = I(r, c + 1) + I(r + 1, c) - I(r, c) + edges.at(r, c);

    const std::int64_t total = I(h, w);
    if (total == 0) throw VisualError("empty measure");

    std::vector<BoxMassTable> tables;
    tables.reserve(kBoxSizes.size());
    for (int size : kBoxSizes) {
        BoxMassTable t;
        t.size = size;
        for (int r0 = 0; r0 < h; r0 += size)
            for (int c0 = 0; c0 < w; c0 += size) {
                int r1 = std::min(r0 + size, h), c1 = std::min(c0 + size, w);
                std::int64_t count = I(r1, c1) - I(r0, c1) - I(r1, c0) + I(r0, c0);
                if (count > 0) t.masses.push_back(static_cast<double>(count) / total);
            }
        tables.push_back(std::move(t));
    }
    return tables;
}

FractalSpectrum generalized_dimensions(const std::vector<BoxMassTable>& tables) {
    if (tables.size() < 2) throw VisualError("degenerate regression: need at least two box sizes");

    const std::size_t s = tables.size();
    std::vector<double> x(s);  // log(size)
    // log sum(mu^q) per size, per q; equal masses are grouped so the power
    // is evaluated once per distinct mass.
    std::vector<std::array<double, kSpectrumDim>> y(s);
    for (std::size_t t = 0; t < s; ++t) {
        if (tables[t].masses.empty()) throw VisualError("empty measure");
        x[t] = std::log(static_cast<double>(tables[t].size));
        std::vector<double> sorted = tables[t].masses;
        std::sort(sorted.begin(), sorted.end());
        std::array<double, kSpectrumDim> sums{};
        std::size_t i = 0;
        while (i < sorted.size()) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            double log_mu = std::log(sorted[i]);
            double mult = static_cast<double>(j - i);
            for (int qi = 0; qi < kSpectrumDim; ++qi)
                sums[qi] += mult * std::exp(kQGrid[qi] * log_mu);
            i = j;
        }
        for (int qi = 0; qi < kSpectrumDim; ++qi) y[t][qi] = std::log(sums[qi]);
    }

    double x_mean = 0.0;
    for (double v : x) x_mean += v;
    x_mean /= static_cast<double>(s);
    double sxx = 0.0;
    for (double v : x) sxx += (v - x_mean) * (v - x_mean);
    if (sxx == 0.0) throw VisualError("degenerate regression: identical box sizes");

    FractalSpectrum spectrum{};
    for (int qi = 0; qi < kSpectrumDim; ++qi) {
        double sxy = 0.0;
        for (std::size_t t = 0; t < s; ++t) sxy += (x[t] - x_mean) * y[t][qi];
        spectrum[qi] = (sxy / sxx) / (kQGrid[qi] - 1.0);
    }
    return spectrum;
}

FractalSpectrum patch_spectrum(const GrayImage& patch) {
    EdgeMap edges = canny(patch);
    try {
        return generalized_dimensions(box_counts(edges));
    } catch (const VisualError&) {
        return FractalSpectrum{};  // blank: no edges to measure
    }
}

FractalDictionary build_dictionary(const std::vector<FractalSpectrum>& spectra, int k,
                                   std::uint64_t seed) {
    std::vector<std::vector<double>> regular;
    bool saw_blank = false;
    for (const FractalSpectrum& s : spectra) {
        if (is_blank_spectrum(s)) {
            saw_blank = true;
            continue;
        }
        regular.emplace_back(s.begin(), s.end());
    }

    FractalDictionary dict;
    dict.seed = seed;
    dict.has_blank = saw_blank;
    if (saw_blank) {
        dict.centroids.push_back(FractalSpectrum{});
    }
    int remaining = k - (saw_blank ? 1 : 0);
    KMeansResult km = kmeans(regular, remaining, seed);
    for (const auto& c : km.centroids) {
        FractalSpectrum s{};
        std::copy(c.begin(), c.end(), s.begin());
        dict.centroids.push_back(s);
    }
    dict.fitted = true;
    return dict;
}

void save_dictionary(const FractalDictionary& dict, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw VisualError("cannot write dictionary: " + path);
    out << dict.centroids.size() << ' ' << kSpectrumDim << ' ' << dict.seed << '\n';
    out << std::setprecision(17);
    for (const FractalSpectrum& c : dict.centroids) {
        for (int i = 0; i < kSpectrumDim; ++i) out << (i ? " " : "") << c[i];
        out << '\n';
    }
    if (!out) throw VisualError("write failed: " + path);
}

FractalDictionary load_dictionary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw VisualError("cannot read dictionary: " + path);
    std::size_t k = 0;
    int dim = 0;
    std::uint64_t seed = 0;
    if (!(in >> k >> dim >> seed) || dim != kSpectrumDim)
        throw VisualError("malformed dictionary header: " + path);
    FractalDictionary dict;
    dict.seed = seed;
    for (std::size_t c = 0; c < k; ++c) {
        FractalSpectrum s{};
        for (int i = 0; i < dim; ++i)
            if (!(in >> s[i])) throw VisualError("truncated dictionary: " + path);
        dict.centroids.push_back(s);
    }
    dict.has_blank = !dict.centroids.empty() && is_blank_spectrum(dict.centroids.front());
    dict.fitted = true;
    return dict;
}

namespace {

std::vector<std::pair<int, int>> patch_corners(const GrayImage& tile, int patches_per_tile,
                                               std::uint64_t seed) {
    if (tile.height < kPatchSize || tile.width < kPatchSize)
        throw VisualError("tile smaller than the patch size");
    Rng rng(seed);
    std::vector<std::pair<int, int>> corners;
    corners.reserve(patches_per_tile);
    for (int i = 0; i < patches_per_tile; ++i) {
        int r0 = static_cast<int>(rng.uniform_index(tile.height - kPatchSize + 1));
        int c0 = static_cast<int>(rng.uniform_index(tile.width - kPatchSize + 1));
        corners.emplace_back(r0, c0);
    }
    return corners;
}

GrayImage crop(const GrayImage& tile, int r0, int c0) {
    GrayImage patch(kPatchSize, kPatchSize);
    for (int r = 0; r < kPatchSize; ++r)
        for (int c = 0; c < kPatchSize; ++c) patch.at(r, c) = tile.at(r0 + r, c0 + c);
    return patch;
}

}  // namespace

std::vector<FractalSpectrum> tile_spectra(const GrayImage& tile, int patches_per_tile,
                                          std::uint64_t seed) {
    std::vector<FractalSpectrum> out;
    out.reserve(patches_per_tile);
    for (auto [r0, c0] : patch_corners(tile, patches_per_tile, seed))
        out.push_back(patch_spectrum(crop(tile, r0, c0)));
    return out;
}

std::vector<double> quantize_bow(const GrayImage& tile, const FractalDictionary& dict,
                                 int patches_per_tile, std::uint64_t seed) {
    return bow_from_spectra(tile_spectra(tile, patches_per_tile, seed), dict);
}

std::vector<double> bow_from_spectra(const std::vector<FractalSpectrum>& spectra,
                                     const FractalDictionary& dict) {
    if (!dict.fitted || dict.centroids.empty()) throw VisualError("dictionary not fitted");
    if (spectra.empty()) throw VisualError("cannot quantize an empty spectrum set");

    std::vector<double> histogram(dict.centroids.size(), 0.0);
    for (const FractalSpectrum& s : spectra) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < dict.centroids.size(); ++c) {
            double d = 0.0;
            for (int i = 0; i < kSpectrumDim; ++i) {
                double diff = s[i] - dict.centroids[c][i];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        histogram[best] += 1.0;
    }
    for (double& v : histogram) v /= static_cast<double>(spectra.size());
    return histogram;
}

std::vector<double> assemble_xv(const std::vector<double>& x_fra,
                                const std::vector<double>& x_cnn, int expect_fra, int expect_cnn) {
    if (static_cast<int>(x_fra.size()) != expect_fra ||
        static_cast<int>(x_cnn.size()) != expect_cnn)
        throw VisualError("visual feature blocks have unexpected sizes");
    std::vector<double> out;
    out.reserve(x_fra.size() + x_cnn.size());
    out.insert(out.end(), x_fra.begin(), x_fra.end());
    out.insert(out.end(), x_cnn.begin(), x_cnn.end());
    return out;
}

}  // namespace riskgrid
