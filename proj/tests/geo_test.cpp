#include <doctest.h>

#include <cmath>

#include "riskgrid/geo.hpp"
#include "riskgrid/rng.hpp"

using riskgrid::BoundingBox;
using riskgrid::CellId;
using riskgrid::GeoError;
using riskgrid::RegionGrid;
using riskgrid::Rng;

TEST_SUITE("geo") {
    TEST_CASE("one-degree box at the equator grids to 112x112") {
        RegionGrid grid = RegionGrid::from_bbox({0.0, 1.0, 0.0, 1.0});
        // 1 degree of latitude = 111.32 km -> ceil = 112 cells; longitude is
        // scaled by cos(0.5 deg) ~ 0.99996, still ceiling to 112.
        CHECK(grid.rows() == 112);
        CHECK(grid.cols() == 112);
        CHECK(grid.n_cells() == 12544);
    }

    TEST_CASE("degenerate boxes are rejected") {
        CHECK_THROWS_AS(RegionGrid::from_bbox({31.0, 31.0, 121.0, 122.0}), GeoError);
        CHECK_THROWS_AS(RegionGrid::from_bbox({31.0, 30.0, 121.0, 122.0}), GeoError);
        CHECK_THROWS_AS(RegionGrid::from_bbox({89.0, 95.0, 0.0, 1.0}), GeoError);
        CHECK_THROWS_AS(RegionGrid::forced({0.0, 1.0, 0.0, 1.0}, 0, 10), GeoError);
    }

    TEST_CASE("locate maps corners and rejects outside points") {
        RegionGrid grid = RegionGrid::from_bbox({0.0, 1.0, 0.0, 1.0});
        auto sw = grid.locate(0.0, 0.0);
        REQUIRE(sw.has_value());
        CHECK(*sw == CellId{0, 0});

        CHECK_FALSE(grid.locate(2.0, 0.0).has_value());
        CHECK_FALSE(grid.locate(0.5, -0.001).has_value());

        // closed at the north/east box edges
        auto ne = grid.locate(1.0, 1.0);
        REQUIRE(ne.has_value());
        CHECK(*ne == CellId{111, 111});
    }

    TEST_CASE("box midpoint lands on the upper of the two adjacent cells") {
        RegionGrid grid = RegionGrid::from_bbox({0.0, 1.0, 0.0, 1.0});
        // 0.5 deg is exactly the edge between rows 55 and 56 of the 112-cell
        // tiling; half-open cells put it in the higher row.
        auto mid = grid.locate(0.5, 0.5);
        REQUIRE(mid.has_value());
        CHECK(*mid == CellId{56, 56});
    }

    TEST_CASE("cell bounds tile the box") {
        RegionGrid grid = RegionGrid::forced({30.0, 30.5, 120.0, 120.8}, 7, 9);

        BoundingBox corner = grid.cell_bounds({0, 0});
        CHECK(corner.lat_min == doctest::Approx(30.0));
        CHECK(corner.lon_min == doctest::Approx(120.0));

        // adjacent cells share exactly one edge coordinate
        BoundingBox right = grid.cell_bounds({0, 1});
        CHECK(corner.lon_max == doctest::Approx(right.lon_min));
        BoundingBox above = grid.cell_bounds({1, 0});
        CHECK(corner.lat_max == doctest::Approx(above.lat_min));

        CHECK_THROWS_AS(grid.cell_bounds({7, 0}), GeoError);
        CHECK_THROWS_AS(grid.cell_bounds({0, -1}), GeoError);

        double area = 0.0;
        for (int r = 0; r < grid.rows(); ++r)
            for (int c = 0; c < grid.cols(); ++c) {
                BoundingBox b = grid.cell_bounds({r, c});
                area += (b.lat_max - b.lat_min) * (b.lon_max - b.lon_min);
            }
        const double want = 0.5 * 0.8;
        CHECK(std::abs(area - want) / want < 1e-9);
    }

    TEST_CASE("locate of a cell center round-trips") {
        RegionGrid grid = RegionGrid::from_bbox({30.7, 31.4, 121.1, 122.0});
        Rng rng(4242);
        for (int i = 0; i < 100; ++i) {
            CellId id{static_cast<int>(rng.uniform_index(grid.rows())),
                      static_cast<int>(rng.uniform_index(grid.cols()))};
            BoundingBox b = grid.cell_bounds(id);
            auto back = grid.locate(0.5 * (b.lat_min + b.lat_max), 0.5 * (b.lon_min + b.lon_max));
            REQUIRE(back.has_value());
            CHECK(*back == id);
        }
    }

    TEST_CASE("points on internal grid lines go to the higher cell") {
        RegionGrid grid = RegionGrid::forced({0.0, 1.0, 0.0, 1.0}, 10, 10);
        auto hit = grid.locate(0.3, 0.7);
        REQUIRE(hit.has_value());
        CHECK(*hit == CellId{3, 7});
    }

    TEST_CASE("forced grids expose configured dimensions") {
        RegionGrid grid = RegionGrid::forced({30.4, 30.4 + 40.0 / 111.32, 104.0, 105.0}, 40, 50);
        CHECK(grid.rows() == 40);
        CHECK(grid.cols() == 50);
        CHECK(grid.n_cells() == 2000);

        CHECK(grid.linear({0, 0}) == 0);
        CHECK(grid.linear({1, 0}) == 50);
        CHECK(grid.from_linear(grid.linear({17, 31})) == CellId{17, 31});
        CHECK(grid.contains({39, 49}));
        CHECK_FALSE(grid.contains({40, 0}));
    }
}
