#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "riskgrid/geo.hpp"
#include "riskgrid/ingest.hpp"

namespace riskgrid {

/// Hourly taxi flow through one cell. Bucket i covers hour-of-day i
/// (00:00-00:59 is bucket 0).
struct TrafficPattern {
    std::array<double, 24> inflow{};
    std::array<double, 24> outflow{};

    /// Flattened 48-entry vector, inflow hours first.
    std::vector<double> flatten() const;
};

/// Per-cell POI counts by category.
struct PoiHistogram {
    std::vector<double> counts;
};

/// Per-cell node counts by junction complexity: (high, medium, low).
struct ConnectivityHistogram {
    std::array<double, 3> counts{};
};

/// Per-cell way counts by road width level 1..4 (index = level - 1).
struct WidthHistogram {
    std::array<double, 4> counts{};
};

inline constexpr int kTrafficDim = 48;
inline constexpr int kPoiCategories = 16;
inline constexpr int kConnectivityDim = 3;
inline constexpr int kWidthDim = 4;

/// Seconds between consecutive same-taxi fixes beyond which the trajectory
/// is considered broken and the pair is not counted as a transition.
inline constexpr std::int64_t kTrajectoryGapSeconds = 600;

/// Count cell-to-cell transitions per taxi. A transition is a consecutive
/// same-taxi pair (after sorting by timestamp) whose endpoints fall in two
/// different grid cells, with a time gap of at most kTrajectoryGapSeconds.
/// The hour bucket is taken from the destination timestamp. Pairs with
/// either endpoint outside the grid are not counted.
std::vector<TrafficPattern> traffic_patterns(const std::vector<GpsPoint>& points,
                                             const RegionGrid& grid);

/// Histogram POIs by category per cell. Records outside the grid are ignored.
std::vector<PoiHistogram> poi_bow(const std::vector<PoiRecord>& pois, const RegionGrid& grid,
                                  int n_categories = kPoiCategories);

/// Bin every graph node by junction complexity into the cell containing it.
/// Degree counts distinct neighbours across all ways; degree >= 4 is high,
/// exactly 3 is medium, <= 2 is low.
std::vector<ConnectivityHistogram> node_connectivity(const OsmGraph& osm, const RegionGrid& grid);

/// Count highway-tagged ways per width level. A way increments the level
/// count of every cell containing at least one of its nodes, once per cell.
/// Unrecognized highway values map to level 2 with a warning on stderr;
/// the optional counter receives the number of such ways.
std::vector<WidthHistogram> road_width(const OsmGraph& osm, const RegionGrid& grid,
                                       std::int64_t* unknown_tags = nullptr);

/// Map a highway tag value to its width level (1..4), or 0 when the value
/// is not in the dictionary.
int width_level(const std::string& highway);

/// Concatenate the four blocks into one row per cell:
/// [traffic(48), poi, connectivity(3), width(4)].
/// All inputs must have the same number of cells.
std::vector<std::vector<double>> assemble_xu(const std::vector<TrafficPattern>& tra,
                                             const std::vector<PoiHistogram>& poi,
                                             const std::vector<ConnectivityHistogram>& con,
                                             const std::vector<WidthHistogram>& wid);

}  // namespace riskgrid
