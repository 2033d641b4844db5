#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "riskgrid/geo.hpp"
#include "riskgrid/ingest.hpp"

namespace riskgrid {

inline constexpr int kRiskLevels = 3;

struct RiskLabels {
    std::vector<int> level;               // per cell: 0 = low, 1 = medium, 2 = high
    std::array<double, 3> centroids{};    // severity-sum centroid per level, ascending
};

/// Sum accident severities per cell. Records outside the grid are dropped.
std::vector<double> aggregate_severity(const std::vector<AccidentRecord>& accidents,
                                       const RegionGrid& grid);

/// Discretize per-cell severity sums into three risk levels with 1-D k-means
/// (k-means++ seeded, multiple restarts, converged to 1e-9). Levels are
/// ordered by centroid, so higher severity never receives a lower level.
/// Fewer than three distinct values is a degenerate labeling and raises.
RiskLabels kmeans_levels(const std::vector<double>& severity, std::uint64_t seed,
                         int restarts = 10);

}  // namespace riskgrid
