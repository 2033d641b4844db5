#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "riskgrid/image.hpp"
#include "riskgrid/ingest.hpp"

using riskgrid::AccidentRecord;
using riskgrid::CnnVectors;
using riskgrid::GpsPoint;
using riskgrid::GrayImage;
using riskgrid::ImageTile;
using riskgrid::IngestError;
using riskgrid::OsmGraph;
using riskgrid::ParseStats;
using riskgrid::PoiRecord;
using riskgrid::RegionGrid;
using riskgrid::RgbImage;
using riskgrid::TileLoadStats;

namespace {

namespace fs = std::filesystem;

// Fresh scratch directory per test case, removed on destruction.
struct TempDir {
    fs::path path;

    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("riskgrid_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    std::string file(const std::string& name, const std::string& content) const {
        fs::path p = path / name;
        std::ofstream out(p);
        out << content;
        return p.string();
    }
};

}  // namespace

TEST_SUITE("ingest") {
    TEST_CASE("gps parser keeps well-formed lines in file order") {
        TempDir dir("gps_ok");
        std::string path = dir.file("gps.csv",
                                    "t1,1500000000,31.0,121.5\n"
                                    "t2,1500000060,31.1,121.6\n");
        ParseStats stats;
        std::vector<GpsPoint> pts = riskgrid::read_gps(path, &stats);
        REQUIRE(pts.size() == 2);
        CHECK(pts[0].taxi_id == "t1");
        CHECK(pts[0].timestamp == 1500000000);
        CHECK(pts[0].lat == doctest::Approx(31.0));
        CHECK(pts[0].lon == doctest::Approx(121.5));
        CHECK(pts[1].taxi_id == "t2");
        CHECK(stats.parsed == 2);
        CHECK(stats.malformed == 0);
    }

    TEST_CASE("gps parser skips and counts malformed lines") {
        TempDir dir("gps_bad");
        std::string path = dir.file("gps.csv",
                                    "t1,notanumber,31.0,121.5\n"
                                    "t1,1500000000,31.0,121.5\n"
                                    "t1,1500000060\n");
        ParseStats stats;
        std::vector<GpsPoint> pts = riskgrid::read_gps(path, &stats);
        REQUIRE(pts.size() == 1);
        CHECK(stats.parsed == 1);
        CHECK(stats.malformed == 2);
    }

    TEST_CASE("empty file parses to nothing") {
        TempDir dir("gps_empty");
        std::string path = dir.file("gps.csv", "");
        ParseStats stats;
        CHECK(riskgrid::read_gps(path, &stats).empty());
        CHECK(stats.parsed == 0);
        CHECK(stats.malformed == 0);
    }

    TEST_CASE("mostly-malformed input is fatal") {
        TempDir dir("gps_corrupt");
        std::string path = dir.file("gps.csv",
                                    "garbage\n"
                                    "more garbage\n"
                                    "t1,1500000000,31.0,121.5\n");
        CHECK_THROWS_WITH_AS(riskgrid::read_gps(path), doctest::Contains("corrupt"), IngestError);
    }

    TEST_CASE("unreadable file is fatal") {
        CHECK_THROWS_AS(riskgrid::read_gps("/nonexistent/gps.csv"), IngestError);
    }

    TEST_CASE("poi parser validates the category range") {
        TempDir dir("poi");
        std::string path = dir.file("poi.csv",
                                    "31.0,121.5,3\n"
                                    "31.0,121.5,16\n"
                                    "31.0,121.5,-1\n");
        ParseStats stats;
        std::vector<PoiRecord> pois = riskgrid::read_poi(path, 16, &stats);
        REQUIRE(pois.size() == 1);
        CHECK(pois[0].category == 3);
        CHECK(stats.malformed == 2);
    }

    TEST_CASE("poi round-trip keeps every valid line") {
        TempDir dir("poi_rt");
        std::string body;
        for (int i = 0; i < 25; ++i)
            body += "31." + std::to_string(i % 10) + ",121.5," + std::to_string(i % 16) + "\n";
        std::string path = dir.file("poi.csv", body);
        ParseStats stats;
        std::vector<PoiRecord> pois = riskgrid::read_poi(path, 16, &stats);
        CHECK(pois.size() == 25);
        CHECK(stats.parsed == 25);
        CHECK(stats.malformed == 0);
    }

    TEST_CASE("accident severity defaults to one") {
        TempDir dir("acc");
        std::string path = dir.file("acc.csv",
                                    "31.0,121.5,1500000000\n"
                                    "31.0,121.5,1500000000,2.5\n");
        std::vector<AccidentRecord> recs = riskgrid::read_accidents(path);
        REQUIRE(recs.size() == 2);
        CHECK(recs[0].severity == doctest::Approx(1.0));
        CHECK(recs[1].severity == doctest::Approx(2.5));
    }

    TEST_CASE("osm parser binds ways to their nodes") {
        TempDir dir("osm_ok");
        std::string path = dir.file("map.osm",
                                    "<?xml version=\"1.0\"?>\n"
                                    "<osm>\n"
                                    "  <node id=\"1\" lat=\"31.0\" lon=\"121.5\"/>\n"
                                    "  <node id=\"2\" lat=\"31.0\" lon=\"121.6\"/>\n"
                                    "  <way id=\"10\">\n"
                                    "    <nd ref=\"1\"/>\n"
                                    "    <nd ref=\"2\"/>\n"
                                    "    <tag k=\"highway\" v=\"residential\"/>\n"
                                    "  </way>\n"
                                    "</osm>\n");
        OsmGraph g = riskgrid::parse_osm(path);
        CHECK(g.nodes.size() == 2);
        REQUIRE(g.ways.size() == 1);
        CHECK(g.ways.at(10).highway == "residential");
        CHECK(g.ways.at(10).node_refs == std::vector<std::int64_t>{1, 2});
        CHECK(g.dropped_ways == 0);
    }

    TEST_CASE("osm way referencing a missing node is dropped and counted") {
        TempDir dir("osm_dangling");
        std::string path = dir.file("map.osm",
                                    "<osm>\n"
                                    "  <node id=\"1\" lat=\"31.0\" lon=\"121.5\"/>\n"
                                    "  <way id=\"10\"><nd ref=\"1\"/><nd ref=\"99\"/></way>\n"
                                    "  <way id=\"11\"><nd ref=\"1\"/></way>\n"
                                    "</osm>\n");
        OsmGraph g = riskgrid::parse_osm(path);
        CHECK(g.ways.empty());
        CHECK(g.dropped_ways == 2);
    }

    TEST_CASE("osm without ways is a valid graph") {
        TempDir dir("osm_noway");
        std::string path = dir.file("map.osm",
                                    "<osm><node id=\"1\" lat=\"31.0\" lon=\"121.5\"/></osm>\n");
        OsmGraph g = riskgrid::parse_osm(path);
        CHECK(g.nodes.size() == 1);
        CHECK(g.ways.empty());
    }

    TEST_CASE("osm syntax errors are fatal and carry a line number") {
        TempDir dir("osm_bad");
        std::string path = dir.file("map.osm",
                                    "<osm>\n"
                                    "  <node id=\"1\" lat=\"31.0\" lon=\"121.5\">\n"
                                    "</osm>\n");
        CHECK_THROWS_WITH_AS(riskgrid::parse_osm(path), doctest::Contains("line"), IngestError);
    }

    TEST_CASE("png tiles decode with luminance conversion") {
        TempDir dir("tiles");
        RegionGrid grid = RegionGrid::forced({0.0, 0.02, 0.0, 0.04}, 1, 2);

        GrayImage black(260, 260, 0.0);
        riskgrid::write_png_gray((dir.path / "0_0.png").string(), black);

        RgbImage red(260, 260);
        for (int r = 0; r < red.height; ++r)
            for (int c = 0; c < red.width; ++c) red.at(r, c)[0] = 255;
        riskgrid::write_png_rgb((dir.path / "0_1.png").string(), red);

        TileLoadStats stats;
        auto tiles = riskgrid::load_tiles(dir.path.string(), grid, 256, &stats);
        REQUIRE(tiles.size() == 2);
        CHECK(stats.loaded == 2);
        CHECK(stats.skipped == 0);

        const ImageTile& t00 = tiles.at(grid.linear({0, 0}));
        CHECK(t00.pixels.at(10, 10) == doctest::Approx(0.0));

        // luminance of pure red: 0.299 R
        const ImageTile& t01 = tiles.at(grid.linear({0, 1}));
        CHECK(t01.pixels.at(10, 10) == doctest::Approx(0.299).epsilon(1e-2));
    }

    TEST_CASE("white tile reads back as ones") {
        TempDir dir("tiles_white");
        RegionGrid grid = RegionGrid::forced({0.0, 0.02, 0.0, 0.02}, 1, 1);
        GrayImage white(256, 256, 1.0);
        riskgrid::write_png_gray((dir.path / "0_0.png").string(), white);
        auto tiles = riskgrid::load_tiles(dir.path.string(), grid);
        REQUIRE(tiles.size() == 1);
        CHECK(tiles.at(0).pixels.at(128, 128) == doctest::Approx(1.0));
    }

    TEST_CASE("undersized and out-of-grid tiles are skipped") {
        TempDir dir("tiles_skip");
        RegionGrid grid = RegionGrid::forced({0.0, 0.02, 0.0, 0.02}, 1, 1);
        riskgrid::write_png_gray((dir.path / "0_0.png").string(), GrayImage(64, 64, 0.5));
        riskgrid::write_png_gray((dir.path / "5_5.png").string(), GrayImage(256, 256, 0.5));
        dir.file("0_1.png", "not a png");
        TileLoadStats stats;
        auto tiles = riskgrid::load_tiles(dir.path.string(), grid, 256, &stats);
        CHECK(tiles.empty());
        CHECK(stats.loaded == 0);
        CHECK(stats.skipped == 3);
    }

    TEST_CASE("cnn vectors load by cell with absence flags") {
        TempDir dir("cnn");
        RegionGrid grid = RegionGrid::forced({0.0, 0.02, 0.0, 0.04}, 1, 2);
        std::string path = dir.file("cnn.csv", "0,0,1.5,2.5,3.5\n");
        CnnVectors vecs = riskgrid::load_cnn_vectors(path, grid, 3);
        REQUIRE(vecs.values.size() == 2);
        CHECK(vecs.dim == 3);
        CHECK(vecs.present[0]);
        CHECK_FALSE(vecs.present[1]);
        CHECK(vecs.values[0] == std::vector<double>{1.5, 2.5, 3.5});
        CHECK(vecs.values[1] == std::vector<double>{0.0, 0.0, 0.0});
    }

    TEST_CASE("cnn vector of the wrong length is fatal") {
        TempDir dir("cnn_bad");
        RegionGrid grid = RegionGrid::forced({0.0, 0.02, 0.0, 0.02}, 1, 1);
        std::string path = dir.file("cnn.csv", "0,0,1.0,2.0\n");
        CHECK_THROWS_WITH_AS(riskgrid::load_cnn_vectors(path, grid, 3),
                             doctest::Contains("dimension"), IngestError);
    }

    TEST_CASE("degraded mode produces zero vectors for every cell") {
        RegionGrid grid = RegionGrid::forced({0.0, 0.02, 0.0, 0.04}, 2, 2);
        CnnVectors vecs = riskgrid::zero_cnn_vectors(grid, 45);
        REQUIRE(vecs.values.size() == 4);
        for (std::size_t i = 0; i < vecs.values.size(); ++i) {
            CHECK_FALSE(vecs.present[i]);
            CHECK(vecs.values[i].size() == 45);
        }
    }
}
