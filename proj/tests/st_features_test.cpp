#include <doctest.h>

#include <map>
#include <set>
#include <string>
#include <vector>

#include "riskgrid/geo.hpp"
#include "riskgrid/ingest.hpp"
#include "riskgrid/rng.hpp"
#include "riskgrid/st_features.hpp"

using riskgrid::GpsPoint;
using riskgrid::OsmGraph;
using riskgrid::OsmWay;
using riskgrid::PoiRecord;
using riskgrid::RegionGrid;
using riskgrid::Rng;

namespace {

// unit square split into 4x4 cells; cell (r, c) spans 0.25 degrees each way
RegionGrid test_grid() { return RegionGrid::forced({0.0, 1.0, 0.0, 1.0}, 4, 4); }

// point comfortably inside cell (r, c)
double cell_lat(int r) { return 0.125 + 0.25 * r; }
double cell_lon(int c) { return 0.125 + 0.25 * c; }

GpsPoint at(const std::string& taxi, std::int64_t ts, int r, int c) {
    return {taxi, ts, cell_lat(r), cell_lon(c)};
}

double total_flow(const std::vector<riskgrid::TrafficPattern>& patterns, bool inflow) {
    double sum = 0.0;
    for (const auto& p : patterns)
        for (int h = 0; h < 24; ++h) sum += inflow ? p.inflow[h] : p.outflow[h];
    return sum;
}

}  // namespace

TEST_SUITE("st_features") {
    TEST_CASE("transition lands in the destination hour bucket") {
        RegionGrid grid = test_grid();
        // 09:00 at cell (0,0), 09:05 at cell (0,1)
        std::vector<GpsPoint> pts{at("t1", 9 * 3600, 0, 0), at("t1", 9 * 3600 + 300, 0, 1)};
        auto patterns = riskgrid::traffic_patterns(pts, grid);

        CHECK(patterns[grid.linear({0, 0})].outflow[9] == 1.0);
        CHECK(patterns[grid.linear({0, 1})].inflow[9] == 1.0);
        CHECK(total_flow(patterns, true) == 1.0);
        CHECK(total_flow(patterns, false) == 1.0);
    }

    TEST_CASE("stationary taxi produces no flow") {
        RegionGrid grid = test_grid();
        std::vector<GpsPoint> pts;
        for (int i = 0; i < 10; ++i) pts.push_back(at("t1", i * 120, 1, 1));
        auto patterns = riskgrid::traffic_patterns(pts, grid);
        CHECK(total_flow(patterns, true) == 0.0);
        CHECK(total_flow(patterns, false) == 0.0);
    }

    TEST_CASE("crossing three cells in one hour counts two transitions") {
        RegionGrid grid = test_grid();
        std::vector<GpsPoint> pts{at("t1", 100, 0, 0), at("t1", 400, 0, 1), at("t1", 700, 0, 2)};
        auto patterns = riskgrid::traffic_patterns(pts, grid);
        CHECK(total_flow(patterns, true) == 2.0);
        CHECK(total_flow(patterns, false) == 2.0);
    }

    TEST_CASE("trajectory gaps above ten minutes break the pair") {
        RegionGrid grid = test_grid();
        std::vector<GpsPoint> pts{at("t1", 0, 0, 0), at("t1", 601, 0, 1),
                                  at("t1", 601 + 600, 0, 2)};
        auto patterns = riskgrid::traffic_patterns(pts, grid);
        // first pair gap 601s dropped, second exactly 600s kept
        CHECK(total_flow(patterns, true) == 1.0);
        CHECK(patterns[grid.linear({0, 2})].inflow[0] == 1.0);
    }

    TEST_CASE("out-of-order fixes are sorted per taxi before pairing") {
        RegionGrid grid = test_grid();
        std::vector<GpsPoint> forward{at("t1", 100, 0, 0), at("t1", 300, 1, 0),
                                      at("t1", 500, 2, 0)};
        std::vector<GpsPoint> shuffled{forward[2], forward[0], forward[1]};
        CHECK(riskgrid::traffic_patterns(forward, grid)[grid.linear({1, 0})].inflow[0] ==
              riskgrid::traffic_patterns(shuffled, grid)[grid.linear({1, 0})].inflow[0]);
        CHECK(total_flow(riskgrid::traffic_patterns(shuffled, grid), true) == 2.0);
    }

    TEST_CASE("flow conservation over a random walk") {
        RegionGrid grid = test_grid();
        Rng rng(7);
        std::vector<GpsPoint> pts;
        std::int64_t ts = 0;
        for (int taxi = 0; taxi < 5; ++taxi) {
            int r = static_cast<int>(rng.uniform_index(4));
            int c = static_cast<int>(rng.uniform_index(4));
            for (int step = 0; step < 50; ++step) {
                pts.push_back(at("taxi" + std::to_string(taxi), ts, r, c));
                ts += 60 + static_cast<std::int64_t>(rng.uniform_index(120));
                if (rng.bernoulli(0.6)) {
                    if (rng.bernoulli(0.5))
                        r = (r + 1) % 4;
                    else
                        c = (c + 1) % 4;
                }
            }
        }
        auto patterns = riskgrid::traffic_patterns(pts, grid);
        CHECK(total_flow(patterns, true) == total_flow(patterns, false));
        CHECK(total_flow(patterns, true) > 0.0);
    }

    TEST_CASE("poi histogram counts categories per cell") {
        RegionGrid grid = test_grid();
        std::vector<PoiRecord> pois{{cell_lat(0), cell_lon(0), 0},
                                    {cell_lat(0), cell_lon(0), 0},
                                    {cell_lat(0), cell_lon(0), 3},
                                    {cell_lat(2), cell_lon(2), 7},
                                    {5.0, 5.0, 1}};  // outside the grid
        auto hists = riskgrid::poi_bow(pois, grid, 16);

        const auto& c00 = hists[grid.linear({0, 0})].counts;
        CHECK(c00[0] == 2.0);
        CHECK(c00[3] == 1.0);
        CHECK(c00[1] == 0.0);
        CHECK(hists[grid.linear({1, 1})].counts == std::vector<double>(16, 0.0));

        double total = 0.0;
        for (const auto& h : hists)
            for (double v : h.counts) total += v;
        CHECK(total == 4.0);  // the out-of-grid record contributes nothing
    }

    TEST_CASE("plus-shaped intersection is a high-complexity node") {
        RegionGrid grid = test_grid();
        OsmGraph osm;
        osm.nodes[0] = {cell_lat(1), cell_lon(1)};  // center
        osm.nodes[1] = {cell_lat(0), cell_lon(1)};
        osm.nodes[2] = {cell_lat(2), cell_lon(1)};
        osm.nodes[3] = {cell_lat(1), cell_lon(0)};
        osm.nodes[4] = {cell_lat(1), cell_lon(2)};
        for (std::int64_t arm = 1; arm <= 4; ++arm)
            osm.ways[arm] = OsmWay{{0, arm}, ""};

        auto con = riskgrid::node_connectivity(osm, grid);
        // counts are (high, medium, low)
        CHECK(con[grid.linear({1, 1})].counts[0] == 1.0);  // center, degree 4
        CHECK(con[grid.linear({0, 1})].counts[2] == 1.0);  // arm tip, degree 1
    }

    TEST_CASE("straight way keeps every node low complexity") {
        RegionGrid grid = test_grid();
        OsmGraph osm;
        osm.nodes[1] = {cell_lat(0), cell_lon(0)};
        osm.nodes[2] = {cell_lat(0), cell_lon(1)};
        osm.nodes[3] = {cell_lat(0), cell_lon(2)};
        osm.ways[1] = OsmWay{{1, 2, 3}, ""};
        auto con = riskgrid::node_connectivity(osm, grid);
        double high = 0.0, med = 0.0, low = 0.0;
        for (const auto& h : con) {
            high += h.counts[0];
            med += h.counts[1];
            low += h.counts[2];
        }
        CHECK(high == 0.0);
        CHECK(med == 0.0);
        CHECK(low == 3.0);
    }

    TEST_CASE("grid graph histogram matches a brute-force degree count") {
        RegionGrid grid = test_grid();
        OsmGraph osm;
        auto node_id = [](int i, int j) { return static_cast<std::int64_t>(i * 4 + j); };
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) osm.nodes[node_id(i, j)] = {cell_lat(i), cell_lon(j)};
        std::int64_t wid = 0;
        for (int i = 0; i < 4; ++i) {
            OsmWay row{{node_id(i, 0), node_id(i, 1), node_id(i, 2), node_id(i, 3)}, ""};
            osm.ways[wid++] = row;
            OsmWay col{{node_id(0, i), node_id(1, i), node_id(2, i), node_id(3, i)}, ""};
            osm.ways[wid++] = col;
        }

        // independent oracle: adjacency sets from consecutive nd pairs
        std::map<std::int64_t, std::set<std::int64_t>> adj;
        for (const auto& [_, way] : osm.ways)
            for (std::size_t k = 0; k + 1 < way.node_refs.size(); ++k) {
                adj[way.node_refs[k]].insert(way.node_refs[k + 1]);
                adj[way.node_refs[k + 1]].insert(way.node_refs[k]);
            }
        std::array<double, 3> want{};  // (high, medium, low)
        for (const auto& [_, neighbours] : adj) {
            std::size_t d = neighbours.size();
            if (d >= 4)
                want[0] += 1.0;
            else if (d == 3)
                want[1] += 1.0;
            else
                want[2] += 1.0;
        }

        auto con = riskgrid::node_connectivity(osm, grid);
        std::array<double, 3> got{};
        for (const auto& h : con)
            for (int b = 0; b < 3; ++b) got[b] += h.counts[b];
        CHECK(got == want);
        // 4x4 lattice: 4 interior (deg 4), 8 edges (deg 3), 4 corners (deg 2)
        CHECK(want == std::array<double, 3>{4.0, 8.0, 4.0});
    }

    TEST_CASE("highway dictionary maps tags to width levels") {
        CHECK(riskgrid::width_level("motorway") == 4);
        CHECK(riskgrid::width_level("trunk") == 4);
        CHECK(riskgrid::width_level("motorway_link") == 4);
        CHECK(riskgrid::width_level("trunk_link") == 4);
        CHECK(riskgrid::width_level("secondary") == 3);
        CHECK(riskgrid::width_level("primary") == 3);
        CHECK(riskgrid::width_level("primary_link") == 3);
        CHECK(riskgrid::width_level("secondary_link") == 3);
        CHECK(riskgrid::width_level("tertiary") == 3);
        CHECK(riskgrid::width_level("tertiary_link") == 3);
        CHECK(riskgrid::width_level("service") == 2);
        CHECK(riskgrid::width_level("residential") == 2);
        CHECK(riskgrid::width_level("motorway_junction") == 2);
        CHECK(riskgrid::width_level("unclassified") == 2);
        CHECK(riskgrid::width_level("track") == 1);
        CHECK(riskgrid::width_level("living_street") == 1);
        CHECK(riskgrid::width_level("crossing") == 1);
        CHECK(riskgrid::width_level("footway") == 1);
        CHECK(riskgrid::width_level("path") == 1);
        CHECK(riskgrid::width_level("pedestrian") == 1);
        CHECK(riskgrid::width_level("made_up_tag") == 0);
    }

    TEST_CASE("ways increment the width histogram of every touched cell once") {
        RegionGrid grid = test_grid();
        OsmGraph osm;
        osm.nodes[1] = {cell_lat(0), cell_lon(0)};
        osm.nodes[2] = {cell_lat(0), cell_lon(1)};
        osm.nodes[3] = {cell_lat(0), 0.13};  // same cell as node 1
        osm.ways[1] = OsmWay{{1, 2}, "motorway"};
        osm.ways[2] = OsmWay{{1, 3}, "residential"};
        osm.ways[3] = OsmWay{{1, 2}, "spaghetti"};  // unknown tag -> level 2
        osm.ways[4] = OsmWay{{1, 2}, ""};           // untagged -> ignored

        std::int64_t unknown = 0;
        auto wid = riskgrid::road_width(osm, grid, &unknown);
        CHECK(unknown == 1);

        const auto& w00 = wid[grid.linear({0, 0})].counts;
        const auto& w01 = wid[grid.linear({0, 1})].counts;
        CHECK(w00[3] == 1.0);  // motorway level 4 at index 3
        CHECK(w01[3] == 1.0);
        CHECK(w00[1] == 2.0);  // residential + unknown-tag fallback
        CHECK(w01[1] == 1.0);  // the unknown-tag way spans both cells
        CHECK(w00[0] == 0.0);
    }

    TEST_CASE("feature assembly concatenates the four blocks") {
        RegionGrid grid = test_grid();
        std::vector<riskgrid::TrafficPattern> tra(grid.n_cells());
        std::vector<riskgrid::PoiHistogram> poi(grid.n_cells());
        std::vector<riskgrid::ConnectivityHistogram> con(grid.n_cells());
        std::vector<riskgrid::WidthHistogram> wid(grid.n_cells());
        for (auto& h : poi) h.counts.assign(16, 0.0);

        tra[0].inflow[5] = 2.0;
        tra[0].outflow[23] = 1.0;
        poi[0].counts[4] = 3.0;
        con[0].counts = {1.0, 2.0, 3.0};
        wid[0].counts = {4.0, 5.0, 6.0, 7.0};

        auto xu = riskgrid::assemble_xu(tra, poi, con, wid);
        REQUIRE(xu.size() == static_cast<std::size_t>(grid.n_cells()));
        for (const auto& row : xu) CHECK(row.size() == 71);

        CHECK(xu[0][5] == 2.0);        // inflow block
        CHECK(xu[0][24 + 23] == 1.0);  // outflow block
        CHECK(xu[0][48 + 4] == 3.0);   // poi block
        CHECK(xu[0][64] == 1.0);       // connectivity block
        CHECK(xu[0][67] == 4.0);       // width block
        CHECK(xu[1] == std::vector<double>(71, 0.0));

        poi.pop_back();
        CHECK_THROWS(riskgrid::assemble_xu(tra, poi, con, wid));
    }
}
