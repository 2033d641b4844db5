#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "riskgrid/geo.hpp"
#include "riskgrid/image.hpp"

namespace riskgrid {

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GpsPoint {
    std::string taxi_id;
    std::int64_t timestamp = 0;  // seconds since epoch, UTC
    double lat = 0.0;
    double lon = 0.0;
};

struct PoiRecord {
    double lat = 0.0;
    double lon = 0.0;
    int category = 0;
};

struct AccidentRecord {
    double lat = 0.0;
    double lon = 0.0;
    std::int64_t timestamp = 0;
    double severity = 1.0;
};

struct OsmWay {
    std::vector<std::int64_t> node_refs;
    std::string highway;  // empty when the way carries no highway tag
};

struct OsmGraph {
    std::unordered_map<std::int64_t, std::pair<double, double>> nodes;  // id -> (lat, lon)
    std::map<std::int64_t, OsmWay> ways;
    std::int64_t dropped_ways = 0;  // dangling refs or fewer than 2 nodes
};

struct ImageTile {
    CellId cell;
    GrayImage pixels;
};

/// Counters a line-oriented parser accumulates over one file.
struct ParseStats {
    std::int64_t parsed = 0;
    std::int64_t malformed = 0;
};

// Line-oriented CSV parsers. Records are delivered to `sink` in file order;
// malformed lines are counted and skipped. More than 50% malformed lines is
// treated as a corrupt input and raises.
ParseStats parse_gps(const std::string& path, const std::function<void(const GpsPoint&)>& sink);
ParseStats parse_poi(const std::string& path, int n_categories,
                     const std::function<void(const PoiRecord&)>& sink);
ParseStats parse_accidents(const std::string& path,
                           const std::function<void(const AccidentRecord&)>& sink);

std::vector<GpsPoint> read_gps(const std::string& path, ParseStats* stats = nullptr);
std::vector<PoiRecord> read_poi(const std::string& path, int n_categories,
                                ParseStats* stats = nullptr);
std::vector<AccidentRecord> read_accidents(const std::string& path, ParseStats* stats = nullptr);

/// Parse the node/way subset of OSM XML. Syntax errors raise with the line
/// number; ways referencing missing nodes are dropped and counted.
OsmGraph parse_osm(const std::string& path);

struct TileLoadStats {
    std::int64_t loaded = 0;
    std::int64_t skipped = 0;  // undecodable, undersized, or outside the grid
};

/// Load `row_col.png` tiles from a directory. Cells without a usable tile are
/// absent from the result.
std::unordered_map<std::int64_t, ImageTile> load_tiles(const std::string& dir,
                                                       const RegionGrid& grid,
                                                       int min_size = 256,
                                                       TileLoadStats* stats = nullptr);

struct CnnVectors {
    int dim = 0;
    std::vector<std::vector<double>> values;  // indexed by linear cell id
    std::vector<bool> present;                // false -> zero-filled placeholder
};

/// Load `row,col,v1..vD` vectors; cells missing a record receive the zero
/// vector and are flagged absent. A record of the wrong length is fatal.
CnnVectors load_cnn_vectors(const std::string& path, const RegionGrid& grid, int dim);

/// Degraded mode: all-zero vectors for every cell.
CnnVectors zero_cnn_vectors(const RegionGrid& grid, int dim);

}  // namespace riskgrid
