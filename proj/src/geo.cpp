#include "riskgrid/geo.hpp"

#include <algorithm>
#include <cmath>

namespace riskgrid {

void BoundingBox::validate() const {
    if (!(lat_min >= -90.0 && lat_max <= 90.0 && lon_min >= -180.0 && lon_max <= 180.0))
        throw GeoError("bounding box outside valid coordinate range");
    if (!(lat_min < lat_max && lon_min < lon_max))
        throw GeoError("empty grid: degenerate bounding box");
}

RegionGrid RegionGrid::from_bbox(const BoundingBox& bbox, double cell_km) {
    bbox.validate();
    if (!(cell_km > 0.0)) throw GeoError("cell size must be positive");

    double mid_lat = 0.5 * (bbox.lat_min + bbox.lat_max);
    double lat_extent_km = (bbox.lat_max - bbox.lat_min) * kKmPerDegree;
    double lon_extent_km =
        (bbox.lon_max - bbox.lon_min) * kKmPerDegree * std::cos(mid_lat * M_PI / 180.0);
    if (!(lon_extent_km > 0.0)) throw GeoError("empty grid: zero longitudinal extent");

    RegionGrid g;
    g.bbox_ = bbox;
    g.cell_km_ = cell_km;
    g.rows_ = static_cast<int>(std::ceil(lat_extent_km / cell_km));
    g.cols_ = static_cast<int>(std::ceil(lon_extent_km / cell_km));
    g.dlat_ = cell_km / kKmPerDegree;
    g.dlon_ = cell_km / (kKmPerDegree * std::cos(mid_lat * M_PI / 180.0));
    return g;
}

RegionGrid RegionGrid::forced(const BoundingBox& bbox, int rows, int cols) {
    bbox.validate();
    if (rows <= 0 || cols <= 0) throw GeoError("forced grid dimensions must be positive");
    RegionGrid g;
    g.bbox_ = bbox;
    g.rows_ = rows;
    g.cols_ = cols;
    g.dlat_ = (bbox.lat_max - bbox.lat_min) / rows;
    g.dlon_ = (bbox.lon_max - bbox.lon_min) / cols;
    g.cell_km_ = g.dlat_ * kKmPerDegree;
    return g;
}

double RegionGrid::lat_edge(int row) const { return bbox_.lat_min + row * dlat_; }
double RegionGrid::lon_edge(int col) const { return bbox_.lon_min + col * dlon_; }

std::optional<CellId> RegionGrid::locate(double lat, double lon) const {
    if (!(lat >= bbox_.lat_min && lat <= bbox_.lat_max && lon >= bbox_.lon_min &&
          lon <= bbox_.lon_max))
        return std::nullopt;

    // Initial guess by division, then snap to the exact edge arithmetic used
    // by cell_bounds so that boundary points land in the higher-index cell.
    int row = static_cast<int>(std::floor((lat - bbox_.lat_min) / dlat_));
    row = std::clamp(row, 0, rows_ - 1);
    while (row + 1 < rows_ && lat >= lat_edge(row + 1)) ++row;
    while (row > 0 && lat < lat_edge(row)) --row;

    int col = static_cast<int>(std::floor((lon - bbox_.lon_min) / dlon_));
    col = std::clamp(col, 0, cols_ - 1);
    while (col + 1 < cols_ && lon >= lon_edge(col + 1)) ++col;
    while (col > 0 && lon < lon_edge(col)) --col;

    return CellId{row, col};
}

BoundingBox RegionGrid::cell_bounds(CellId id) const {
    if (!contains(id)) throw GeoError("cell id out of range");
    BoundingBox b;
    b.lat_min = lat_edge(id.row);
    b.lat_max = (id.row == rows_ - 1) ? bbox_.lat_max
                                      : std::min(bbox_.lat_max, lat_edge(id.row + 1));
    b.lon_min = lon_edge(id.col);
    b.lon_max = (id.col == cols_ - 1) ? bbox_.lon_max
                                      : std::min(bbox_.lon_max, lon_edge(id.col + 1));
    return b;
}

}  // namespace riskgrid
