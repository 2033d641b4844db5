#include "riskgrid/labeling.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "riskgrid/kmeans.hpp"

namespace riskgrid {

std::vector<double> aggregate_severity(const std::vector<AccidentRecord>& accidents,
                                       const RegionGrid& grid) {
    std::vector<double> na(grid.n_cells(), 0.0);
    for (const AccidentRecord& a : accidents) {
        auto cell = grid.locate(a.lat, a.lon);
        if (cell) na[grid.linear(*cell)] += a.severity;
    }
    return na;
}

RiskLabels kmeans_levels(const std::vector<double>& severity, std::uint64_t seed, int restarts) {
    std::vector<double> distinct = severity;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < kRiskLevels)
        throw std::invalid_argument("degenerate labeling: fewer than 3 distinct severity values");

    std::vector<std::vector<double>> points(severity.size());
    for (std::size_t i = 0; i < severity.size(); ++i) points[i] = {severity[i]};
    KMeansResult km = kmeans(points, kRiskLevels, seed, restarts, 300, 1e-9);

    // Relabel clusters so level order follows centroid order.
    std::array<int, kRiskLevels> order{0, 1, 2};
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return km.centroids[a][0] < km.centroids[b][0]; });
    std::array<int, kRiskLevels> rank{};
    RiskLabels out;
    for (int lvl = 0; lvl < kRiskLevels; ++lvl) {
        rank[order[lvl]] = lvl;
        out.centroids[lvl] = km.centroids[order[lvl]][0];
    }
    out.level.resize(severity.size());
    for (std::size_t i = 0; i < severity.size(); ++i) out.level[i] = rank[km.assignment[i]];
    return out;
}

}  // namespace riskgrid
