#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "riskgrid/geo.hpp"
#include "riskgrid/models.hpp"
#include "riskgrid/synthcity.hpp"

namespace riskgrid::pipeline {

/// Bad or missing configuration (maps to exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required upstream artifact is absent (maps to exit code 2). The message
/// names the stage that produces it.
class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PathsConfig {
    std::string gps;  // empty: <workdir>/city/gps.csv
    std::string poi;
    std::string osm;
    std::string tiles;
    std::string cnn;
    std::string accidents;
};

struct GridConfig {
    int rows = 0;  // 0 = derive from bbox extent at cell_km
    int cols = 0;
    std::optional<BoundingBox> bbox;
    double cell_km = 1.0;
};

struct FeatureConfig {
    int traffic = 48;
    int poi_categories = 16;
    int connectivity = 3;
    int width = 4;
    int spectrum = 8;
    int cnn = 45;
    int dictionary_k = 8;
    int patches_per_tile = 16;
    bool use_cnn = true;

    int st_dim() const { return traffic + poi_categories + connectivity + width; }
    int visual_dim() const { return dictionary_k + cnn; }
};

struct ModelSection {
    models::ModelKind kind = models::ModelKind::kModelDfnn;
    int hidden = 64;
    int dz = 64;
    int gate_dz_u = 32;
    int gate_dz_v = 64;
    int gate_hidden = 64;
    double dropout = 0.4;
    bool renormalize = true;
    std::string feature_set = "multi";
    bool swapped = false;
};

struct ProtocolConfig {
    int folds = 5;
    std::string resample = "oversample";
    double val_fraction = 0.1;
};

struct AttributionConfig {
    int steps = 50;
    std::optional<CellId> cell;  // unset: average attributions over all cells
};

struct PipelineConfig {
    std::string workdir = "work";
    std::uint64_t seed = 42;
    PathsConfig paths;
    GridConfig grid;
    FeatureConfig features;
    ModelSection model;
    models::TrainConfig train;
    ProtocolConfig protocol;
    AttributionConfig attribution;
    synth::SynthSpec synth;

    void validate() const;

    /// Model hyperparameters with input dims filled in by the caller.
    models::ModelConfig model_config(int dim_u, int dim_v) const;
    synth::SynthSpec synth_spec() const;  // synth section with the global seed
};

/// Parse a config file (JSON). Absent keys keep their defaults; unknown keys
/// and type mismatches raise ConfigError naming the offending key path.
PipelineConfig load_config(const std::string& path);

/// Defaults, with overrides applied from a JSON string (used for tests and
/// the --set flag).
PipelineConfig config_from_string(const std::string& text);

void save_config(const PipelineConfig& cfg, const std::string& path);
std::string config_to_string(const PipelineConfig& cfg);

}  // namespace riskgrid::pipeline
