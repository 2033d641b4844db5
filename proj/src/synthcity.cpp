#include "riskgrid/synthcity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>
#include <string>

#include "riskgrid/image.hpp"
#include "riskgrid/labeling.hpp"
#include "riskgrid/rng.hpp"

namespace fs = std::filesystem;

namespace riskgrid::synth {

namespace {

constexpr std::int64_t kWeekSeconds = 7 * 86400;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct CellFrame {
    BoundingBox bounds;
    double lat(double t) const { return bounds.lat_min + t * (bounds.lat_max - bounds.lat_min); }
    double lon(double t) const { return bounds.lon_min + t * (bounds.lon_max - bounds.lon_min); }
    // Random position away from the cell edges, immune to locate() rounding.
    std::pair<double, double> inner_point(Rng& rng) const {
        return {lat(0.1 + 0.8 * rng.uniform()), lon(0.1 + 0.8 * rng.uniform())};
    }
};

const std::vector<std::vector<std::string>>& highway_pools() {
    static const std::vector<std::vector<std::string>> pools = {
        {"footway", "path", "living_street", "pedestrian"},
        {"residential", "service", "unclassified"},
        {"secondary", "primary", "tertiary", "secondary_link"},
        {"motorway", "trunk", "motorway_link"},
    };
    return pools;
}

std::string sample_highway(double kappa, Rng& rng) {
    const double w[4] = {std::max(0.05, 1.5 - 1.4 * kappa), 0.8, 0.15 + 1.3 * kappa,
                         0.05 + 1.3 * kappa};
    double total = w[0] + w[1] + w[2] + w[3];
    double u = rng.uniform() * total;
    int level = 3;
    for (int i = 0; i < 3; ++i) {
        if (u < w[i]) {
            level = i;
            break;
        }
        u -= w[i];
    }
    const auto& pool = highway_pools()[static_cast<std::size_t>(level)];
    return pool[rng.uniform_index(pool.size())];
}

void draw_segment(GrayImage& img, double x0, double y0, double x1, double y1, double shade) {
    const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int s = 0; s <= steps; ++s) {
        double t = static_cast<double>(s) / steps;
        int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        if (x >= 0 && x < img.width && y >= 0 && y < img.height) {
            img.at(y, x) = shade;
        }
    }
}

class CsvWriter {
public:
    explicit CsvWriter(const fs::path& path) : path_(path.string()), out_(path) {
        if (!out_) throw SynthError("cannot write " + path_);
        out_.precision(17);
    }
    std::ostream& stream() { return out_; }
    void close() {
        out_.flush();
        if (!out_.good()) throw SynthError("failed while writing " + path_);
        out_.close();
    }

private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace

void SynthSpec::validate() const {
    if (rows < 1 || cols < 1) throw SynthError("grid dimensions must be positive");
    if (static_cast<std::int64_t>(rows) * cols < 100) {
        throw SynthError("synthetic city needs at least 100 cells");
    }
    if (!(eta >= 0.0 && eta < 0.5)) throw SynthError("noise level must lie in [0, 0.5)");
    if (fog_prob < 0.0 || fog_prob > 1.0) throw SynthError("fog probability must lie in [0, 1]");
    if (tile_size < 256) throw SynthError("tile size must be at least 256");
    if (cnn_dim < 1 || poi_categories < 1) throw SynthError("feature dims must be positive");
    if (severity_scale <= 0.0) throw SynthError("severity scale must be positive");
}

RegionGrid make_grid(const SynthSpec& spec) {
    spec.validate();
    const double lat_extent = spec.rows / RegionGrid::kKmPerDegree;
    const double mid_lat = spec.origin_lat + lat_extent / 2.0;
    const double lon_extent =
        spec.cols / (RegionGrid::kKmPerDegree * std::cos(mid_lat * std::numbers::pi / 180.0));
    BoundingBox bbox{spec.origin_lat, spec.origin_lat + lat_extent, spec.origin_lon,
                     spec.origin_lon + lon_extent};
    return RegionGrid::forced(bbox, spec.rows, spec.cols);
}

GeneratedCity generate(const SynthSpec& spec, const std::string& out_dir) {
    spec.validate();
    GeneratedCity city{spec, make_grid(spec), {}};
    city.cells.resize(static_cast<std::size_t>(city.grid.n_cells()));

    fs::create_directories(fs::path(out_dir) / "tiles");

    // Shared projection for the stand-in CNN vectors: 45 x 2 over (nu, kappa).
    Rng proj_rng(derive_seed(spec.seed, "cnnproj"));
    std::vector<std::array<double, 2>> proj(static_cast<std::size_t>(spec.cnn_dim));
    for (auto& row : proj) {
        row[0] = 0.35 * proj_rng.normal();
        row[1] = 0.35 * proj_rng.normal();
    }

    CsvWriter gps(fs::path(out_dir) / "gps.csv");
    CsvWriter poi(fs::path(out_dir) / "poi.csv");
    CsvWriter accidents(fs::path(out_dir) / "accidents.csv");
    CsvWriter cnn(fs::path(out_dir) / "cnn.csv");
    CsvWriter planted(fs::path(out_dir) / "planted.csv");
    planted.stream() << "row,col,tau,kappa,nu,fog,rate\n";

    std::ofstream osm(fs::path(out_dir) / "osm.xml");
    if (!osm) throw SynthError("cannot write " + (fs::path(out_dir) / "osm.xml").string());
    osm.precision(12);
    osm << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\">\n";

    for (std::int64_t idx = 0; idx < city.grid.n_cells(); ++idx) {
        const CellId cell = city.grid.from_linear(idx);
        const CellFrame frame{city.grid.cell_bounds(cell)};
        Rng rng(derive_seed(spec.seed, "cell", static_cast<std::uint64_t>(idx)));

        CityCell& c = city.cells[static_cast<std::size_t>(idx)];
        c.tau = rng.uniform();
        c.kappa = rng.uniform();
        c.nu = rng.uniform();
        const double noise = rng.normal();
        c.fog = rng.bernoulli(spec.fog_prob);
        c.rate = spec.severity_scale *
                 logistic(spec.coef_traffic * c.tau + spec.coef_road * c.kappa +
                          spec.coef_visual * c.nu + spec.bias + spec.eta * noise);

        planted.stream() << cell.row << "," << cell.col << "," << c.tau << "," << c.kappa << ","
                         << c.nu << "," << (c.fog ? 1 : 0) << "," << c.rate << "\n";

        // GPS random walks: trip rate follows tau; hops land in 4-neighbours.
        const std::int64_t trips = rng.poisson(6.0 + 60.0 * c.tau);
        for (std::int64_t t = 0; t < trips; ++t) {
            std::string taxi = "t" + std::to_string(idx) + "_" + std::to_string(t);
            std::int64_t ts = static_cast<std::int64_t>(rng.uniform_index(kWeekSeconds));
            CellId cur = cell;
            auto [lat, lon] = frame.inner_point(rng);
            gps.stream() << taxi << "," << ts << "," << lat << "," << lon << "\n";
            const std::size_t hops = 1 + rng.uniform_index(3);
            for (std::size_t h = 0; h < hops; ++h) {
                CellId options[4] = {{cur.row - 1, cur.col},
                                     {cur.row + 1, cur.col},
                                     {cur.row, cur.col - 1},
                                     {cur.row, cur.col + 1}};
                CellId next[4];
                int n_ok = 0;
                for (const CellId& o : options) {
                    if (city.grid.contains(o)) next[n_ok++] = o;
                }
                cur = next[rng.uniform_index(static_cast<std::size_t>(n_ok))];
                ts += 60 + static_cast<std::int64_t>(rng.uniform_index(180));
                const CellFrame hop_frame{city.grid.cell_bounds(cur)};
                auto [hlat, hlon] = hop_frame.inner_point(rng);
                gps.stream() << taxi << "," << ts << "," << hlat << "," << hlon << "\n";
            }
        }

        // POIs: density also follows tau, categories uniform.
        const std::int64_t pois = rng.poisson(8.0 + 40.0 * c.tau);
        for (std::int64_t p = 0; p < pois; ++p) {
            auto [lat, lon] = frame.inner_point(rng);
            poi.stream() << lat << "," << lon << "," << rng.uniform_index(
                                static_cast<std::size_t>(spec.poi_categories))
                         << "\n";
        }

        // Road network: four-arm junctions and loose segments, density kappa.
        std::int64_t node_id = idx * 100000;
        std::int64_t way_id = idx * 100000;
        auto emit_node = [&](double lat, double lon) {
            ++node_id;
            osm << "  <node id=\"" << node_id << "\" lat=\"" << lat << "\" lon=\"" << lon
                << "\"/>\n";
            return node_id;
        };
        auto emit_way = [&](std::initializer_list<std::int64_t> refs, const std::string& hwy) {
            ++way_id;
            osm << "  <way id=\"" << way_id << "\">\n";
            for (std::int64_t r : refs) osm << "    <nd ref=\"" << r << "\"/>\n";
            osm << "    <tag k=\"highway\" v=\"" << hwy << "\"/>\n  </way>\n";
        };
        const std::int64_t junctions = rng.poisson(3.0 + 20.0 * c.kappa);
        for (std::int64_t j = 0; j < junctions; ++j) {
            const double clat = frame.lat(0.3 + 0.4 * rng.uniform());
            const double clon = frame.lon(0.3 + 0.4 * rng.uniform());
            const double dlat =
                (0.1 + 0.15 * rng.uniform()) * (frame.bounds.lat_max - frame.bounds.lat_min);
            const double dlon =
                (0.1 + 0.15 * rng.uniform()) * (frame.bounds.lon_max - frame.bounds.lon_min);
            std::int64_t west = emit_node(clat, clon - dlon);
            std::int64_t center = emit_node(clat, clon);
            std::int64_t east = emit_node(clat, clon + dlon);
            std::int64_t north = emit_node(clat + dlat, clon);
            std::int64_t south = emit_node(clat - dlat, clon);
            emit_way({west, center, east}, sample_highway(c.kappa, rng));
            emit_way({north, center, south}, sample_highway(c.kappa, rng));
        }
        const std::int64_t segments = rng.poisson(2.0 + 14.0 * c.kappa);
        for (std::int64_t s = 0; s < segments; ++s) {
            auto [alat, alon] = frame.inner_point(rng);
            auto [blat, blon] = frame.inner_point(rng);
            std::int64_t a = emit_node(alat, alon);
            std::int64_t b = emit_node(blat, blon);
            emit_way({a, b}, sample_highway(c.kappa, rng));
        }

        // Tile: line art whose clutter follows nu; fog leaves a constant patch.
        GrayImage tile(spec.tile_size, spec.tile_size, c.fog ? 0.55 : 0.92);
        if (!c.fog) {
            const std::int64_t lines = 6 + std::lround(150.0 * c.nu);
            for (std::int64_t l = 0; l < lines; ++l) {
                const double x0 = rng.uniform() * (spec.tile_size - 1);
                const double y0 = rng.uniform() * (spec.tile_size - 1);
                const double x1 = rng.uniform() * (spec.tile_size - 1);
                const double y1 = rng.uniform() * (spec.tile_size - 1);
                draw_segment(tile, x0, y0, x1, y1, 0.12 + 0.3 * rng.uniform());
            }
        }
        const std::string tile_name =
            std::to_string(cell.row) + "_" + std::to_string(cell.col) + ".png";
        write_png_gray((fs::path(out_dir) / "tiles" / tile_name).string(), tile);

        // Stand-in CNN vector: projection of (nu, kappa) plus noise, or pure
        // biased noise under fog.
        cnn.stream() << cell.row << "," << cell.col;
        for (int d = 0; d < spec.cnn_dim; ++d) {
            double v = c.fog ? spec.fog_cnn_bias + spec.fog_cnn_noise * rng.normal()
                             : proj[static_cast<std::size_t>(d)][0] * c.nu +
                                   proj[static_cast<std::size_t>(d)][1] * spec.cnn_road_gain *
                                       c.kappa +
                                   spec.cnn_noise * rng.normal();
            cnn.stream() << "," << v;
        }
        cnn.stream() << "\n";

        // Accidents: severities that sum exactly to the planted rate.
        const std::int64_t count = std::max<std::int64_t>(1, std::lround(c.rate));
        const double severity = c.rate / static_cast<double>(count);
        for (std::int64_t a = 0; a < count; ++a) {
            auto [lat, lon] = frame.inner_point(rng);
            accidents.stream() << lat << "," << lon << ","
                               << rng.uniform_index(kWeekSeconds) << "," << severity << "\n";
        }
    }

    osm << "</osm>\n";
    osm.flush();
    if (!osm.good()) throw SynthError("failed while writing osm.xml");
    gps.close();
    poi.close();
    accidents.close();
    cnn.close();
    planted.close();

    nlohmann::json meta;
    meta["rows"] = spec.rows;
    meta["cols"] = spec.cols;
    meta["seed"] = spec.seed;
    meta["eta"] = spec.eta;
    meta["coef_traffic"] = spec.coef_traffic;
    meta["coef_road"] = spec.coef_road;
    meta["coef_visual"] = spec.coef_visual;
    meta["bias"] = spec.bias;
    meta["severity_scale"] = spec.severity_scale;
    meta["fog_prob"] = spec.fog_prob;
    meta["cnn_road_gain"] = spec.cnn_road_gain;
    meta["cnn_noise"] = spec.cnn_noise;
    meta["fog_cnn_bias"] = spec.fog_cnn_bias;
    meta["fog_cnn_noise"] = spec.fog_cnn_noise;
    meta["tile_size"] = spec.tile_size;
    meta["cnn_dim"] = spec.cnn_dim;
    meta["poi_categories"] = spec.poi_categories;
    meta["origin_lat"] = spec.origin_lat;
    meta["origin_lon"] = spec.origin_lon;
    std::ofstream meta_out(fs::path(out_dir) / "city.json");
    if (!meta_out) throw SynthError("cannot write city.json");
    meta_out << meta.dump(2) << "\n";
    if (!meta_out.good()) throw SynthError("failed while writing city.json");

    return city;
}

GeneratedCity read_city(const std::string& out_dir) {
    const fs::path meta_path = fs::path(out_dir) / "city.json";
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw SynthError("missing " + meta_path.string());
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw SynthError(meta_path.string() + ": " + e.what());
    }

    SynthSpec spec;
    try {
        spec.rows = meta.at("rows").get<int>();
        spec.cols = meta.at("cols").get<int>();
        spec.seed = meta.at("seed").get<std::uint64_t>();
        spec.eta = meta.at("eta").get<double>();
        spec.coef_traffic = meta.at("coef_traffic").get<double>();
        spec.coef_road = meta.at("coef_road").get<double>();
        spec.coef_visual = meta.at("coef_visual").get<double>();
        spec.bias = meta.at("bias").get<double>();
        spec.severity_scale = meta.at("severity_scale").get<double>();
        spec.fog_prob = meta.at("fog_prob").get<double>();
        spec.cnn_road_gain = meta.at("cnn_road_gain").get<double>();
        spec.cnn_noise = meta.at("cnn_noise").get<double>();
        spec.fog_cnn_bias = meta.at("fog_cnn_bias").get<double>();
        spec.fog_cnn_noise = meta.at("fog_cnn_noise").get<double>();
        spec.tile_size = meta.at("tile_size").get<int>();
        spec.cnn_dim = meta.at("cnn_dim").get<int>();
        spec.poi_categories = meta.at("poi_categories").get<int>();
        spec.origin_lat = meta.at("origin_lat").get<double>();
        spec.origin_lon = meta.at("origin_lon").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw SynthError(meta_path.string() + ": " + e.what());
    }

    GeneratedCity city{spec, make_grid(spec), {}};
    city.cells.assign(static_cast<std::size_t>(city.grid.n_cells()), {});

    const fs::path planted_path = fs::path(out_dir) / "planted.csv";
    std::ifstream in(planted_path);
    if (!in) throw SynthError("missing " + planted_path.string());
    std::string line;
    std::getline(in, line);  // header
    std::size_t seen = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        CityCell c;
        int row = 0, col = 0, fog = 0;
        std::istringstream fields(line);
        char comma = ',';
        if (!(fields >> row >> comma >> col >> comma >> c.tau >> comma >> c.kappa >> comma >>
              c.nu >> comma >> fog >> comma >> c.rate)) {
            throw SynthError(planted_path.string() + ": malformed line: " + line);
        }
        c.fog = fog != 0;
        if (!city.grid.contains({row, col})) {
            throw SynthError(planted_path.string() + ": cell outside grid: " + line);
        }
        city.cells[static_cast<std::size_t>(city.grid.linear({row, col}))] = c;
        ++seen;
    }
    if (seen != city.cells.size()) {
        throw SynthError(planted_path.string() + ": expected " + std::to_string(city.cells.size()) +
                         " cells, found " + std::to_string(seen));
    }
    return city;
}

std::vector<int> planted_labels(const GeneratedCity& city) {
    std::vector<double> sums;
    sums.reserve(city.cells.size());
    for (const CityCell& c : city.cells) sums.push_back(c.rate);
    return kmeans_levels(sums, derive_seed(city.spec.seed, "planted")).level;
}

double label_agreement(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw SynthError("label vectors differ in length");
    if (a.empty()) throw SynthError("label vectors are empty");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i]) ++same;
    }
    return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace riskgrid::synth
