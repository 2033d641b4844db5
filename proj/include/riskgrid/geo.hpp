#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

namespace riskgrid {

/// Thrown on invalid geographic inputs (degenerate boxes, out-of-range ids).
struct GeoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BoundingBox {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;

    void validate() const;
};

struct CellId {
    int row = 0;
    int col = 0;

    bool operator==(const CellId&) const = default;
};

/// Tessellation of a bounding box into fixed-size cells. Cell (0,0) holds the
/// southwest corner; rows grow northward, columns eastward. Cells are
/// half-open (a point on an internal grid line belongs to the cell with the
/// larger index) and closed at the north/east box edges.
class RegionGrid {
public:
    static constexpr double kKmPerDegree = 111.32;

    /// Grid sized from the box extent at `cell_km` resolution
    /// (equirectangular approximation at mid-latitude). The last row/column
    /// is clipped at the box edge.
    static RegionGrid from_bbox(const BoundingBox& bbox, double cell_km = 1.0);

    /// Grid with dimensions forced by configuration; cells divide the box
    /// extent evenly.
    static RegionGrid forced(const BoundingBox& bbox, int rows, int cols);

    const BoundingBox& bbox() const { return bbox_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::int64_t n_cells() const { return static_cast<std::int64_t>(rows_) * cols_; }
    double cell_km() const { return cell_km_; }

    std::int64_t linear(CellId id) const {
        return static_cast<std::int64_t>(id.row) * cols_ + id.col;
    }
    CellId from_linear(std::int64_t idx) const {
        return CellId{static_cast<int>(idx / cols_), static_cast<int>(idx % cols_)};
    }
    bool contains(CellId id) const {
        return id.row >= 0 && id.row < rows_ && id.col >= 0 && id.col < cols_;
    }

    /// Cell containing (lat, lon), or nullopt for points outside the box.
    std::optional<CellId> locate(double lat, double lon) const;

    BoundingBox cell_bounds(CellId id) const;

    bool operator==(const RegionGrid&) const = default;

private:
    RegionGrid() = default;

    double lat_edge(int row) const;
    double lon_edge(int col) const;

    BoundingBox bbox_;
    int rows_ = 0;
    int cols_ = 0;
    double cell_km_ = 1.0;
    double dlat_ = 0.0;  // cell height in degrees
    double dlon_ = 0.0;  // cell width in degrees
};

}  // namespace riskgrid
