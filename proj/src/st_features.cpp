#include "riskgrid/st_features.hpp"

#include <algorithm>
#include <iostream>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace riskgrid {

std::vector<double> TrafficPattern::flatten() const {
    std::vector<double> v;
    v.reserve(kTrafficDim);
    v.insert(v.end(), inflow.begin(), inflow.end());
    v.insert(v.end(), outflow.begin(), outflow.end());
    return v;
}

std::vector<TrafficPattern> traffic_patterns(const std::vector<GpsPoint>& points,
                                             const RegionGrid& grid) {
    std::vector<TrafficPattern> out(grid.n_cells());

    std::unordered_map<std::string, std::vector<std::size_t>> by_taxi;
    for (std::size_t i = 0; i < points.size(); ++i) by_taxi[points[i].taxi_id].push_back(i);

    for (auto& [taxi, idx] : by_taxi) {
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return points[a].timestamp < points[b].timestamp;
        });
        for (std::size_t i = 1; i < idx.size(); ++i) {
            const GpsPoint& p = points[idx[i - 1]];
            const GpsPoint& q = points[idx[i]];
            if (q.timestamp - p.timestamp > kTrajectoryGapSeconds) continue;
            auto from = grid.locate(p.lat, p.lon);
            auto to = grid.locate(q.lat, q.lon);
            if (!from || !to || *from == *to) continue;
            int hour = static_cast<int>((q.timestamp % 86400) / 3600);
            out[grid.linear(*from)].outflow[hour] += 1.0;
            out[grid.linear(*to)].inflow[hour] += 1.0;
        }
    }
    return out;
}

std::vector<PoiHistogram> poi_bow(const std::vector<PoiRecord>& pois, const RegionGrid& grid,
                                  int n_categories) {
    std::vector<PoiHistogram> out(grid.n_cells());
    for (auto& h : out) h.counts.assign(n_categories, 0.0);
    for (const PoiRecord& p : pois) {
        auto cell = grid.locate(p.lat, p.lon);
        if (!cell) continue;
        if (p.category < 0 || p.category >= n_categories)
            throw std::out_of_range("POI category out of range");
        out[grid.linear(*cell)].counts[p.category] += 1.0;
    }
    return out;
}

std::vector<ConnectivityHistogram> node_connectivity(const OsmGraph& osm, const RegionGrid& grid) {
    std::unordered_map<std::int64_t, std::unordered_set<std::int64_t>> adjacency;
    for (const auto& [id, way] : osm.ways) {
        for (std::size_t i = 1; i < way.node_refs.size(); ++i) {
            std::int64_t a = way.node_refs[i - 1];
            std::int64_t b = way.node_refs[i];
            if (a == b) continue;
            adjacency[a].insert(b);
            adjacency[b].insert(a);
        }
    }

    std::vector<ConnectivityHistogram> out(grid.n_cells());
    for (const auto& [id, pos] : osm.nodes) {
        auto cell = grid.locate(pos.first, pos.second);
        if (!cell) continue;
        auto it = adjacency.find(id);
        std::size_t degree = it == adjacency.end() ? 0 : it->second.size();
        int bucket = degree >= 4 ? 0 : degree == 3 ? 1 : 2;
        out[grid.linear(*cell)].counts[bucket] += 1.0;
    }
    return out;
}

int width_level(const std::string& highway) {
    static const std::unordered_map<std::string, int> levels = {
        {"track", 1},          {"living_street", 1}, {"crossing", 1},
        {"footway", 1},        {"path", 1},          {"pedestrian", 1},
        {"service", 2},        {"residential", 2},   {"motorway_junction", 2},
        {"unclassified", 2},   {"secondary", 3},     {"primary", 3},
        {"primary_link", 3},   {"secondary_link", 3}, {"tertiary", 3},
        {"tertiary_link", 3},  {"motorway", 4},      {"trunk", 4},
        {"motorway_link", 4},  {"trunk_link", 4},
    };
    auto it = levels.find(highway);
    return it == levels.end() ? 0 : it->second;
}

std::vector<WidthHistogram> road_width(const OsmGraph& osm, const RegionGrid& grid,
                                       std::int64_t* unknown_tags) {
    std::vector<WidthHistogram> out(grid.n_cells());
    std::int64_t unknown = 0;
    std::set<std::string> warned;

    for (const auto& [id, way] : osm.ways) {
        if (way.highway.empty()) continue;
        int level = width_level(way.highway);
        if (level == 0) {
            level = 2;
            ++unknown;
            if (warned.insert(way.highway).second)
                std::cerr << "warning: unknown highway value '" << way.highway
                          << "', treating as width level 2\n";
        }
        std::unordered_set<std::int64_t> touched;
        for (std::int64_t ref : way.node_refs) {
            auto node = osm.nodes.find(ref);
            if (node == osm.nodes.end()) continue;
            auto cell = grid.locate(node->second.first, node->second.second);
            if (cell) touched.insert(grid.linear(*cell));
        }
        for (std::int64_t lin : touched) out[lin].counts[level - 1] += 1.0;
    }
    if (unknown_tags) *unknown_tags = unknown;
    return out;
}

std::vector<std::vector<double>> assemble_xu(const std::vector<TrafficPattern>& tra,
                                             const std::vector<PoiHistogram>& poi,
                                             const std::vector<ConnectivityHistogram>& con,
                                             const std::vector<WidthHistogram>& wid) {
    const std::size_t n = tra.size();
    if (poi.size() != n || con.size() != n || wid.size() != n)
        throw std::invalid_argument("feature blocks cover different cell counts");

    std::vector<std::vector<double>> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double>& row = rows[i];
        row.reserve(kTrafficDim + poi[i].counts.size() + kConnectivityDim + kWidthDim);
        row.insert(row.end(), tra[i].inflow.begin(), tra[i].inflow.end());
        row.insert(row.end(), tra[i].outflow.begin(), tra[i].outflow.end());
        row.insert(row.end(), poi[i].counts.begin(), poi[i].counts.end());
        row.insert(row.end(), con[i].counts.begin(), con[i].counts.end());
        row.insert(row.end(), wid[i].counts.begin(), wid[i].counts.end());
    }
    return rows;
}

}  // namespace riskgrid
