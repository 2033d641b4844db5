#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "riskgrid/image.hpp"
#include "riskgrid/rng.hpp"
#include "riskgrid/visual.hpp"

using riskgrid::EdgeMap;
using riskgrid::FractalDictionary;
using riskgrid::FractalSpectrum;
using riskgrid::GrayImage;
using riskgrid::Rng;
using riskgrid::VisualError;
using riskgrid::kBoxSizes;
using riskgrid::kQGrid;
using riskgrid::kSpectrumDim;

namespace {

EdgeMap blank_edges(int h, int w) {
    EdgeMap e;
    e.height = h;
    e.width = w;
    e.pixels.assign(static_cast<std::size_t>(h) * w, 0);
    return e;
}

// independent accumulation of per-box masses for one size
std::vector<double> oracle_masses(const EdgeMap& e, int size) {
    int brows = (e.height + size - 1) / size;
    int bcols = (e.width + size - 1) / size;
    std::vector<double> boxes(static_cast<std::size_t>(brows) * bcols, 0.0);
    double total = 0.0;
    for (int r = 0; r < e.height; ++r)
        for (int c = 0; c < e.width; ++c)
            if (e.at(r, c)) {
                boxes[static_cast<std::size_t>(r / size) * bcols + c / size] += 1.0;
                total += 1.0;
            }
    std::vector<double> out;
    for (double b : boxes)
        if (b > 0.0) out.push_back(b / total);
    std::sort(out.begin(), out.end());
    return out;
}

GrayImage step_patch() {
    GrayImage patch(256, 256, 0.0);
    for (int r = 0; r < 256; ++r)
        for (int c = 128; c < 256; ++c) patch.at(r, c) = 1.0;
    return patch;
}

}  // namespace

TEST_SUITE("visual") {
    TEST_CASE("constant patches have no edges") {
        EdgeMap e = riskgrid::canny(GrayImage(256, 256, 0.37));
        CHECK(std::count(e.pixels.begin(), e.pixels.end(), 1) == 0);
    }

    TEST_CASE("a vertical step produces one thin vertical line") {
        EdgeMap e = riskgrid::canny(step_patch());
        std::int64_t total = 0;
        std::int64_t near_step = 0;
        for (int r = 0; r < e.height; ++r)
            for (int c = 0; c < e.width; ++c)
                if (e.at(r, c)) {
                    ++total;
                    if (std::abs(c - 128) <= 1) ++near_step;
                }
        CHECK(total > 200);  // a line's worth of pixels
        CHECK(near_step == total);
    }

    TEST_CASE("edge maps are invariant to intensity inversion") {
        GrayImage patch = step_patch();
        GrayImage inverted = patch;
        for (double& v : inverted.pixels) v = 1.0 - v;
        EdgeMap a = riskgrid::canny(patch);
        EdgeMap b = riskgrid::canny(inverted);
        CHECK(a.pixels == b.pixels);
    }

    TEST_CASE("patches smaller than the kernel are rejected") {
        CHECK_THROWS_AS(riskgrid::canny(GrayImage(3, 3, 0.0)), VisualError);
    }

    TEST_CASE("box masses of the full map are uniform") {
        EdgeMap e = blank_edges(256, 256);
        std::fill(e.pixels.begin(), e.pixels.end(), 1);
        auto tables = riskgrid::box_counts(e);
        REQUIRE(tables.size() == kBoxSizes.size());
        const auto& biggest = tables.back();
        CHECK(biggest.size == 128);
        REQUIRE(biggest.masses.size() == 4);
        for (double m : biggest.masses) CHECK(m == doctest::Approx(0.25));
    }

    TEST_CASE("a single edge pixel fills one box per scale") {
        EdgeMap e = blank_edges(256, 256);
        e.at(77, 201) = 1;
        for (const auto& table : riskgrid::box_counts(e)) {
            REQUIRE(table.masses.size() == 1);
            CHECK(table.masses[0] == doctest::Approx(1.0));
        }
    }

    TEST_CASE("box masses sum to one at every scale and match the oracle") {
        Rng rng(99);
        EdgeMap e = blank_edges(256, 256);
        for (auto& p : e.pixels) p = rng.bernoulli(0.07) ? 1 : 0;
        auto tables = riskgrid::box_counts(e);
        for (const auto& table : tables) {
            double sum = 0.0;
            for (double m : table.masses) sum += m;
            CHECK(std::abs(sum - 1.0) < 1e-9);

            std::vector<double> got = table.masses;
            std::sort(got.begin(), got.end());
            std::vector<double> want = oracle_masses(e, table.size);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i)
                CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
        }
    }

    TEST_CASE("empty edge maps raise an empty-measure error") {
        CHECK_THROWS_WITH_AS(riskgrid::box_counts(blank_edges(256, 256)),
                             doctest::Contains("empty measure"), VisualError);
    }

    TEST_CASE("the filled square has dimension two at every q") {
        EdgeMap e = blank_edges(256, 256);
        std::fill(e.pixels.begin(), e.pixels.end(), 1);
        FractalSpectrum spectrum = riskgrid::generalized_dimensions(riskgrid::box_counts(e));
        for (double d : spectrum) CHECK(d == doctest::Approx(2.0).epsilon(0.025));
    }

    TEST_CASE("a point has dimension zero") {
        EdgeMap e = blank_edges(256, 256);
        e.at(130, 130) = 1;
        FractalSpectrum spectrum = riskgrid::generalized_dimensions(riskgrid::box_counts(e));
        for (double d : spectrum) CHECK(std::abs(d) <= 0.01);
    }

    TEST_CASE("a straight line has box dimension about one") {
        EdgeMap e = blank_edges(256, 256);
        for (int c = 0; c < 256; ++c) e.at(101, c) = 1;
        FractalSpectrum spectrum = riskgrid::generalized_dimensions(riskgrid::box_counts(e));
        int q0 = 0;
        while (kQGrid[q0] != 0) ++q0;
        CHECK(spectrum[q0] == doctest::Approx(1.0).epsilon(0.1));
    }

    TEST_CASE("spectra are monotone non-increasing in q") {
        Rng rng(31337);
        for (int trial = 0; trial < 200; ++trial) {
            EdgeMap e = blank_edges(128, 128);
            double density = 0.01 + 0.2 * rng.uniform();
            for (auto& p : e.pixels) p = rng.bernoulli(density) ? 1 : 0;
            if (std::count(e.pixels.begin(), e.pixels.end(), 1) == 0) continue;
            FractalSpectrum s = riskgrid::generalized_dimensions(riskgrid::box_counts(e));
            for (int i = 0; i + 1 < kSpectrumDim; ++i) CHECK(s[i] >= s[i + 1] - 1e-6);
            CHECK(s[4] >= 0.0);  // D(0)
            CHECK(s[4] <= 2.0 + 1e-6);
        }
    }

    TEST_CASE("degenerate regressions are rejected") {
        EdgeMap e = blank_edges(256, 256);
        e.at(0, 0) = 1;
        auto tables = riskgrid::box_counts(e);
        tables.resize(1);
        CHECK_THROWS_AS(riskgrid::generalized_dimensions(tables), VisualError);
    }

    TEST_CASE("blank patches map to the reserved zero spectrum") {
        FractalSpectrum s = riskgrid::patch_spectrum(GrayImage(256, 256, 0.5));
        CHECK(riskgrid::is_blank_spectrum(s));
    }

    TEST_CASE("a dictionary over k points is exact") {
        std::vector<FractalSpectrum> spectra;
        for (int i = 0; i < 4; ++i) {
            FractalSpectrum s{};
            s.fill(1.0 + i);
            spectra.push_back(s);
        }
        FractalDictionary dict = riskgrid::build_dictionary(spectra, 4, 7);
        REQUIRE(dict.centroids.size() == 4);
        CHECK(dict.fitted);
        CHECK_FALSE(dict.has_blank);
        // every input appears as a centroid
        for (const auto& s : spectra) {
            bool found = false;
            for (const auto& c : dict.centroids)
                if (c == s) found = true;
            CHECK(found);
        }
    }

    TEST_CASE("two tight clusters recover their means") {
        Rng rng(5);
        std::vector<FractalSpectrum> spectra;
        for (int i = 0; i < 30; ++i) {
            FractalSpectrum s{};
            double base = (i < 15) ? 0.5 : 1.8;
            for (double& v : s) v = base + 0.01 * rng.uniform();
            spectra.push_back(s);
        }
        FractalDictionary dict = riskgrid::build_dictionary(spectra, 2, 3);
        REQUIRE(dict.centroids.size() == 2);
        std::vector<double> first{dict.centroids[0][0], dict.centroids[1][0]};
        std::sort(first.begin(), first.end());
        CHECK(first[0] == doctest::Approx(0.505).epsilon(0.02));
        CHECK(first[1] == doctest::Approx(1.805).epsilon(0.02));
    }

    TEST_CASE("dictionary fitting is deterministic and validates input size") {
        std::vector<FractalSpectrum> spectra;
        Rng rng(11);
        for (int i = 0; i < 20; ++i) {
            FractalSpectrum s{};
            for (double& v : s) v = rng.uniform();
            spectra.push_back(s);
        }
        FractalDictionary a = riskgrid::build_dictionary(spectra, 8, 123);
        FractalDictionary b = riskgrid::build_dictionary(spectra, 8, 123);
        CHECK(a.centroids == b.centroids);

        std::vector<FractalSpectrum> tiny(spectra.begin(), spectra.begin() + 3);
        CHECK_THROWS_WITH_AS(riskgrid::build_dictionary(tiny, 8, 1),
                             doctest::Contains("distinct points"), std::invalid_argument);
    }

    TEST_CASE("blank spectra reserve centroid zero") {
        std::vector<FractalSpectrum> spectra;
        spectra.push_back(FractalSpectrum{});  // blank
        Rng rng(2);
        for (int i = 0; i < 12; ++i) {
            FractalSpectrum s{};
            for (double& v : s) v = 0.5 + rng.uniform();
            spectra.push_back(s);
        }
        FractalDictionary dict = riskgrid::build_dictionary(spectra, 3, 9);
        CHECK(dict.has_blank);
        CHECK(riskgrid::is_blank_spectrum(dict.centroids[0]));
        CHECK_FALSE(riskgrid::is_blank_spectrum(dict.centroids[1]));
    }

    TEST_CASE("dictionary round-trips through its checkpoint file") {
        std::vector<FractalSpectrum> spectra;
        Rng rng(42);
        for (int i = 0; i < 20; ++i) {
            FractalSpectrum s{};
            for (double& v : s) v = rng.uniform(0.2, 2.0);
            spectra.push_back(s);
        }
        FractalDictionary dict = riskgrid::build_dictionary(spectra, 8, 77);
        auto path = std::filesystem::temp_directory_path() / "riskgrid_dict_test.txt";
        riskgrid::save_dictionary(dict, path.string());
        FractalDictionary loaded = riskgrid::load_dictionary(path.string());
        std::filesystem::remove(path);

        CHECK(loaded.fitted);
        CHECK(loaded.has_blank == dict.has_blank);
        CHECK(loaded.seed == dict.seed);
        REQUIRE(loaded.centroids.size() == dict.centroids.size());
        for (std::size_t i = 0; i < dict.centroids.size(); ++i)
            for (int j = 0; j < kSpectrumDim; ++j)
                CHECK(loaded.centroids[i][j] == doctest::Approx(dict.centroids[i][j]));
    }

    TEST_CASE("identical patches quantize to a one-hot histogram") {
        GrayImage tile(256, 256, 0.0);
        for (int r = 0; r < 256; r += 16)
            for (int c = 0; c < 256; ++c) tile.at(r, c) = 1.0;

        // every patch of a 256x256 tile is the whole tile, so the corpus
        // holds one distinct spectrum
        std::vector<FractalSpectrum> corpus = riskgrid::tile_spectra(tile, 8, 5);
        REQUIRE(corpus.size() == 8);
        for (const auto& s : corpus) CHECK(s == corpus.front());

        FractalDictionary dict = riskgrid::build_dictionary(corpus, 1, 5);
        std::vector<double> hist = riskgrid::quantize_bow(tile, dict, 8, 5);
        REQUIRE(hist.size() == 1);
        CHECK(hist[0] == doctest::Approx(1.0));
    }

    TEST_CASE("histograms split between two distinct textures") {
        // left half: dense speckle; right half: sparse horizontal lines
        Rng rng(17);
        GrayImage tile(256, 512, 0.0);
        for (int r = 0; r < 256; ++r)
            for (int c = 0; c < 256; ++c) tile.at(r, c) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        for (int r = 0; r < 256; r += 64)
            for (int c = 256; c < 512; ++c) tile.at(r, c) = 1.0;

        const int patches = 64;
        const std::uint64_t seed = 21;
        std::vector<FractalSpectrum> corpus = riskgrid::tile_spectra(tile, patches, seed);
        FractalDictionary dict = riskgrid::build_dictionary(corpus, 2, 3);

        std::vector<double> hist = riskgrid::quantize_bow(tile, dict, patches, seed);
        REQUIRE(hist.size() == 2);
        CHECK(hist[0] + hist[1] == doctest::Approx(1.0));
        CHECK(hist[0] == doctest::Approx(0.5).epsilon(0.3));

        // oracle: histogram equals direct assignment counts of the same spectra
        std::vector<double> direct = riskgrid::bow_from_spectra(corpus, dict);
        CHECK(hist == direct);
    }

    TEST_CASE("bow extraction is deterministic under a fixed seed") {
        Rng rng(8);
        GrayImage tile(320, 320, 0.0);
        for (auto& p : tile.pixels) p = rng.bernoulli(0.1) ? 1.0 : 0.0;
        std::vector<FractalSpectrum> corpus = riskgrid::tile_spectra(tile, 16, 99);
        FractalDictionary dict = riskgrid::build_dictionary(corpus, 8, 99);
        std::vector<double> a = riskgrid::quantize_bow(tile, dict, 16, 4242);
        std::vector<double> b = riskgrid::quantize_bow(tile, dict, 16, 4242);
        CHECK(a == b);

        CHECK_THROWS_AS(riskgrid::quantize_bow(GrayImage(100, 100, 0.0), dict, 4, 1),
                        VisualError);
    }

    TEST_CASE("visual assembly concatenates spectrum and cnn blocks") {
        std::vector<double> fra(8, 0.0);
        std::vector<double> cnn(45, 0.0);
        std::vector<double> xv = riskgrid::assemble_xv(fra, cnn);
        CHECK(xv.size() == 53);
        CHECK(xv == std::vector<double>(53, 0.0));

        fra[2] = 0.5;
        cnn[44] = -1.25;
        xv = riskgrid::assemble_xv(fra, cnn);
        CHECK(xv[2] == 0.5);
        CHECK(xv[8 + 44] == -1.25);

        CHECK_THROWS_AS(riskgrid::assemble_xv(std::vector<double>(7, 0.0), cnn), VisualError);
        CHECK_THROWS_AS(riskgrid::assemble_xv(fra, std::vector<double>(44, 0.0)), VisualError);
    }
}
