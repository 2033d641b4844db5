#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgrid/geo.hpp"

namespace riskgrid::synth {

class SynthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Knobs of the planted risk rule. Per cell, latent traits tau (traffic
/// intensity), kappa (road complexity), and nu (visual clutter) are drawn
/// uniform on [0,1]; the planted severity sum is
///   rate = severity_scale * logistic(a*tau + b*kappa + c*nu + bias + eta*noise).
/// tau drives GPS walks and POI density, kappa the road network, nu the tile
/// line art and CNN vectors, so each modality carries its own share of the
/// signal. A seeded fraction of cells is "fogged": their tile is constant and
/// their CNN vector pure biased noise, leaving the visual modality unreliable
/// there in a way the fractal block makes detectable.
struct SynthSpec {
    int rows = 40;
    int cols = 50;
    std::uint64_t seed = 42;
    double eta = 0.1;  // label noise level, must stay in [0, 0.5)

    double coef_traffic = 6.5;  // a
    double coef_road = 2.7;     // b
    double coef_visual = 3.2;   // c
    double bias = -6.2;
    double severity_scale = 40.0;

    double fog_prob = 0.18;
    double cnn_road_gain = 0.0;  // kappa leakage into CNN vectors
    double cnn_noise = 0.05;
    double fog_cnn_bias = 0.5;
    double fog_cnn_noise = 0.35;

    int tile_size = 320;
    int cnn_dim = 45;
    int poi_categories = 16;
    double origin_lat = 30.4;
    double origin_lon = 104.0;

    void validate() const;
};

struct CityCell {
    double tau = 0.0;
    double kappa = 0.0;
    double nu = 0.0;
    bool fog = false;
    double rate = 0.0;  // planted severity sum
};

struct GeneratedCity {
    SynthSpec spec;
    RegionGrid grid;
    std::vector<CityCell> cells;  // row-major
};

/// The grid the generated files are laid out on (1 km cells, forced dims).
RegionGrid make_grid(const SynthSpec& spec);

/// Write gps.csv, poi.csv, accidents.csv, osm.xml, cnn.csv, tiles/<r>_<c>.png,
/// plus city.json and planted.csv bookkeeping, into `out_dir`. Deterministic:
/// per-cell substreams are derived from (seed, linear cell id) alone.
GeneratedCity generate(const SynthSpec& spec, const std::string& out_dir);

/// Reload the bookkeeping a previous generate() left in `out_dir`.
GeneratedCity read_city(const std::string& out_dir);

/// Ground-truth risk classes: the generator's own severity sums discretized
/// by the same 1-D k-means the labeling stage uses.
std::vector<int> planted_labels(const GeneratedCity& city);

/// Fraction of positions where the two labelings agree (symmetric).
double label_agreement(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace riskgrid::synth
