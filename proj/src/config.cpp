#include "riskgrid/config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "riskgrid/labeling.hpp"
#include "riskgrid/visual.hpp"

namespace riskgrid::pipeline {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
        throw ConfigError("config key '" + (prefix.empty() ? std::string("<root>") : prefix) +
                          "' must be an object");
    }
    std::set<std::string> known(allowed.begin(), allowed.end());
    for (const auto& item : obj.items()) {
        if (!known.count(item.key())) {
            throw ConfigError("unknown config key: " + prefix + item.key());
        }
    }
}

template <typename T>
void get_to(const json& obj, const std::string& prefix, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        obj.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError("config key '" + prefix + key + "': " + e.what());
    }
}

void apply_paths(const json& obj, PathsConfig& paths) {
    check_keys(obj, "paths.", {"gps", "poi", "osm", "tiles", "cnn", "accidents"});
    get_to(obj, "paths.", "gps", paths.gps);
    get_to(obj, "paths.", "poi", paths.poi);
    get_to(obj, "paths.", "osm", paths.osm);
    get_to(obj, "paths.", "tiles", paths.tiles);
    get_to(obj, "paths.", "cnn", paths.cnn);
    get_to(obj, "paths.", "accidents", paths.accidents);
}

void apply_grid(const json& obj, GridConfig& grid) {
    check_keys(obj, "grid.", {"rows", "cols", "bbox", "cell_km"});
    get_to(obj, "grid.", "rows", grid.rows);
    get_to(obj, "grid.", "cols", grid.cols);
    get_to(obj, "grid.", "cell_km", grid.cell_km);
    if (obj.contains("bbox") && !obj.at("bbox").is_null()) {
        const json& b = obj.at("bbox");
        if (!b.is_array() || b.size() != 4) {
            throw ConfigError(
                "config key 'grid.bbox': expected [lat_min, lat_max, lon_min, lon_max]");
        }
        BoundingBox bbox;
        try {
            bbox.lat_min = b.at(0).get<double>();
            bbox.lat_max = b.at(1).get<double>();
            bbox.lon_min = b.at(2).get<double>();
            bbox.lon_max = b.at(3).get<double>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config key 'grid.bbox': ") + e.what());
        }
        grid.bbox = bbox;
    }
}

void apply_features(const json& obj, FeatureConfig& f) {
    check_keys(obj, "features.",
               {"traffic", "poi_categories", "connectivity", "width", "spectrum", "cnn",
                "dictionary_k", "patches_per_tile", "use_cnn"});
    get_to(obj, "features.", "traffic", f.traffic);
    get_to(obj, "features.", "poi_categories", f.poi_categories);
    get_to(obj, "features.", "connectivity", f.connectivity);
    get_to(obj, "features.", "width", f.width);
    get_to(obj, "features.", "spectrum", f.spectrum);
    get_to(obj, "features.", "cnn", f.cnn);
    get_to(obj, "features.", "dictionary_k", f.dictionary_k);
    get_to(obj, "features.", "patches_per_tile", f.patches_per_tile);
    get_to(obj, "features.", "use_cnn", f.use_cnn);
}

void apply_model(const json& obj, ModelSection& m) {
    check_keys(obj, "model.",
               {"kind", "hidden", "dz", "gate_dz_u", "gate_dz_v", "gate_hidden", "dropout",
                "renormalize", "feature_set", "swapped"});
    if (obj.contains("kind")) {
        std::string kind;
        get_to(obj, "model.", "kind", kind);
        try {
            m.kind = models::parse_model_kind(kind);
        } catch (const models::ModelError& e) {
            throw ConfigError(std::string("config key 'model.kind': ") + e.what());
        }
    }
    get_to(obj, "model.", "hidden", m.hidden);
    get_to(obj, "model.", "dz", m.dz);
    get_to(obj, "model.", "gate_dz_u", m.gate_dz_u);
    get_to(obj, "model.", "gate_dz_v", m.gate_dz_v);
    get_to(obj, "model.", "gate_hidden", m.gate_hidden);
    get_to(obj, "model.", "dropout", m.dropout);
    get_to(obj, "model.", "renormalize", m.renormalize);
    get_to(obj, "model.", "feature_set", m.feature_set);
    get_to(obj, "model.", "swapped", m.swapped);
}

void apply_train(const json& obj, models::TrainConfig& t) {
    check_keys(obj, "train.", {"lr", "batch", "max_epochs", "patience"});
    get_to(obj, "train.", "lr", t.lr);
    get_to(obj, "train.", "batch", t.batch);
    get_to(obj, "train.", "max_epochs", t.max_epochs);
    get_to(obj, "train.", "patience", t.patience);
}

void apply_protocol(const json& obj, ProtocolConfig& p) {
    check_keys(obj, "protocol.", {"folds", "resample", "val_fraction"});
    get_to(obj, "protocol.", "folds", p.folds);
    get_to(obj, "protocol.", "resample", p.resample);
    get_to(obj, "protocol.", "val_fraction", p.val_fraction);
}

void apply_attribution(const json& obj, AttributionConfig& a) {
    check_keys(obj, "attribution.", {"steps", "cell"});
    get_to(obj, "attribution.", "steps", a.steps);
    if (obj.contains("cell") && !obj.at("cell").is_null()) {
        const json& c = obj.at("cell");
        if (!c.is_array() || c.size() != 2) {
            throw ConfigError("config key 'attribution.cell': expected [row, col]");
        }
        try {
            a.cell = CellId{c.at(0).get<int>(), c.at(1).get<int>()};
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config key 'attribution.cell': ") + e.what());
        }
    }
}

void apply_synth(const json& obj, synth::SynthSpec& s) {
    check_keys(obj, "synth.",
               {"rows", "cols", "eta", "coef_traffic", "coef_road", "coef_visual", "bias",
                "severity_scale", "fog_prob", "cnn_road_gain", "cnn_noise", "fog_cnn_bias",
                "fog_cnn_noise", "tile_size", "origin_lat", "origin_lon"});
    get_to(obj, "synth.", "rows", s.rows);
    get_to(obj, "synth.", "cols", s.cols);
    get_to(obj, "synth.", "eta", s.eta);
    get_to(obj, "synth.", "coef_traffic", s.coef_traffic);
    get_to(obj, "synth.", "coef_road", s.coef_road);
    get_to(obj, "synth.", "coef_visual", s.coef_visual);
    get_to(obj, "synth.", "bias", s.bias);
    get_to(obj, "synth.", "severity_scale", s.severity_scale);
    get_to(obj, "synth.", "fog_prob", s.fog_prob);
    get_to(obj, "synth.", "cnn_road_gain", s.cnn_road_gain);
    get_to(obj, "synth.", "cnn_noise", s.cnn_noise);
    get_to(obj, "synth.", "fog_cnn_bias", s.fog_cnn_bias);
    get_to(obj, "synth.", "fog_cnn_noise", s.fog_cnn_noise);
    get_to(obj, "synth.", "tile_size", s.tile_size);
    get_to(obj, "synth.", "origin_lat", s.origin_lat);
    get_to(obj, "synth.", "origin_lon", s.origin_lon);
}

PipelineConfig apply(const json& root) {
    PipelineConfig cfg;
    check_keys(root, "",
               {"workdir", "seed", "paths", "grid", "features", "model", "train", "protocol",
                "attribution", "synth"});
    get_to(root, "", "workdir", cfg.workdir);
    get_to(root, "", "seed", cfg.seed);
    if (root.contains("paths")) apply_paths(root.at("paths"), cfg.paths);
    if (root.contains("grid")) apply_grid(root.at("grid"), cfg.grid);
    if (root.contains("features")) apply_features(root.at("features"), cfg.features);
    if (root.contains("model")) apply_model(root.at("model"), cfg.model);
    if (root.contains("train")) apply_train(root.at("train"), cfg.train);
    if (root.contains("protocol")) apply_protocol(root.at("protocol"), cfg.protocol);
    if (root.contains("attribution")) apply_attribution(root.at("attribution"), cfg.attribution);
    if (root.contains("synth")) apply_synth(root.at("synth"), cfg.synth);
    cfg.validate();
    return cfg;
}

json to_json(const PipelineConfig& cfg) {
    json root;
    root["workdir"] = cfg.workdir;
    root["seed"] = cfg.seed;
    root["paths"] = {{"gps", cfg.paths.gps},   {"poi", cfg.paths.poi},
                     {"osm", cfg.paths.osm},   {"tiles", cfg.paths.tiles},
                     {"cnn", cfg.paths.cnn},   {"accidents", cfg.paths.accidents}};
    root["grid"]["rows"] = cfg.grid.rows;
    root["grid"]["cols"] = cfg.grid.cols;
    root["grid"]["cell_km"] = cfg.grid.cell_km;
    if (cfg.grid.bbox) {
        root["grid"]["bbox"] = {cfg.grid.bbox->lat_min, cfg.grid.bbox->lat_max,
                                cfg.grid.bbox->lon_min, cfg.grid.bbox->lon_max};
    } else {
        root["grid"]["bbox"] = nullptr;
    }
    root["features"] = {{"traffic", cfg.features.traffic},
                        {"poi_categories", cfg.features.poi_categories},
                        {"connectivity", cfg.features.connectivity},
                        {"width", cfg.features.width},
                        {"spectrum", cfg.features.spectrum},
                        {"cnn", cfg.features.cnn},
                        {"dictionary_k", cfg.features.dictionary_k},
                        {"patches_per_tile", cfg.features.patches_per_tile},
                        {"use_cnn", cfg.features.use_cnn}};
    root["model"] = {{"kind", models::to_string(cfg.model.kind)},
                     {"hidden", cfg.model.hidden},
                     {"dz", cfg.model.dz},
                     {"gate_dz_u", cfg.model.gate_dz_u},
                     {"gate_dz_v", cfg.model.gate_dz_v},
                     {"gate_hidden", cfg.model.gate_hidden},
                     {"dropout", cfg.model.dropout},
                     {"renormalize", cfg.model.renormalize},
                     {"feature_set", cfg.model.feature_set},
                     {"swapped", cfg.model.swapped}};
    root["train"] = {{"lr", cfg.train.lr},
                     {"batch", cfg.train.batch},
                     {"max_epochs", cfg.train.max_epochs},
                     {"patience", cfg.train.patience}};
    root["protocol"] = {{"folds", cfg.protocol.folds},
                        {"resample", cfg.protocol.resample},
                        {"val_fraction", cfg.protocol.val_fraction}};
    root["attribution"]["steps"] = cfg.attribution.steps;
    if (cfg.attribution.cell) {
        root["attribution"]["cell"] = {cfg.attribution.cell->row, cfg.attribution.cell->col};
    } else {
        root["attribution"]["cell"] = nullptr;
    }
    root["synth"] = {{"rows", cfg.synth.rows},
                     {"cols", cfg.synth.cols},
                     {"eta", cfg.synth.eta},
                     {"coef_traffic", cfg.synth.coef_traffic},
                     {"coef_road", cfg.synth.coef_road},
                     {"coef_visual", cfg.synth.coef_visual},
                     {"bias", cfg.synth.bias},
                     {"severity_scale", cfg.synth.severity_scale},
                     {"fog_prob", cfg.synth.fog_prob},
                     {"cnn_road_gain", cfg.synth.cnn_road_gain},
                     {"cnn_noise", cfg.synth.cnn_noise},
                     {"fog_cnn_bias", cfg.synth.fog_cnn_bias},
                     {"fog_cnn_noise", cfg.synth.fog_cnn_noise},
                     {"tile_size", cfg.synth.tile_size},
                     {"origin_lat", cfg.synth.origin_lat},
                     {"origin_lon", cfg.synth.origin_lon}};
    return root;
}

}  // namespace

void PipelineConfig::validate() const {
    if (workdir.empty()) throw ConfigError("config key 'workdir': must not be empty");
    if (features.traffic != 48) {
        throw ConfigError("config key 'features.traffic': the flow block is 24 inflow + 24 "
                          "outflow hours and cannot be resized");
    }
    if (features.connectivity != 3 || features.width != 4) {
        throw ConfigError("config key 'features.connectivity/width': histogram shapes are fixed "
                          "at 3 and 4");
    }
    if (features.spectrum != kSpectrumDim) {
        throw ConfigError("config key 'features.spectrum': the q-grid is fixed at " +
                          std::to_string(kSpectrumDim) + " values");
    }
    if (features.poi_categories < 1 || features.cnn < 1) {
        throw ConfigError("config key 'features.*': dims must be positive");
    }
    if (features.dictionary_k < 2) {
        throw ConfigError("config key 'features.dictionary_k': need at least 2 words");
    }
    if (features.patches_per_tile < 1) {
        throw ConfigError("config key 'features.patches_per_tile': must be positive");
    }
    if (grid.cell_km <= 0.0) throw ConfigError("config key 'grid.cell_km': must be positive");
    if (grid.rows < 0 || grid.cols < 0 || (grid.rows == 0) != (grid.cols == 0)) {
        throw ConfigError("config key 'grid.rows/cols': give both or neither");
    }
    if (model.hidden < 1 || model.dz < 1 || model.gate_dz_u < 1 || model.gate_dz_v < 1 ||
        model.gate_hidden < 1) {
        throw ConfigError("config key 'model.*': layer dims must be positive");
    }
    if (!(model.dropout >= 0.0 && model.dropout < 1.0)) {
        throw ConfigError("config key 'model.dropout': must lie in [0, 1)");
    }
    try {
        (void)models::to_string(model.kind);
    } catch (const models::ModelError& e) {
        throw ConfigError(std::string("config key 'model.kind': ") + e.what());
    }
    if (model.feature_set != "st" && model.feature_set != "visual" &&
        model.feature_set != "multi") {
        throw ConfigError("config key 'model.feature_set': expected st, visual, or multi");
    }
    if (model.swapped &&
        (model.kind == models::ModelKind::kFcn || model.feature_set != "multi")) {
        throw ConfigError(
            "config key 'model.swapped': only applies to multimodal two-input models");
    }
    if (train.lr <= 0.0) throw ConfigError("config key 'train.lr': must be positive");
    if (train.batch < 1) throw ConfigError("config key 'train.batch': must be positive");
    if (train.max_epochs < 1) throw ConfigError("config key 'train.max_epochs': must be positive");
    if (train.patience < 1 || train.patience >= train.max_epochs) {
        throw ConfigError("config key 'train.patience': must lie in [1, max_epochs)");
    }
    if (protocol.folds < 2) throw ConfigError("config key 'protocol.folds': need at least 2");
    if (protocol.resample != "none" && protocol.resample != "oversample" &&
        protocol.resample != "undersample") {
        throw ConfigError(
            "config key 'protocol.resample': expected none, oversample, or undersample");
    }
    if (!(protocol.val_fraction >= 0.0 && protocol.val_fraction < 1.0)) {
        throw ConfigError("config key 'protocol.val_fraction': must lie in [0, 1)");
    }
    if (attribution.steps < 1) {
        throw ConfigError("config key 'attribution.steps': must be positive");
    }
}

models::ModelConfig PipelineConfig::model_config(int dim_u, int dim_v) const {
    models::ModelConfig mc;
    mc.kind = model.kind;
    mc.dim_u = dim_u;
    mc.dim_v = dim_v;
    mc.classes = kRiskLevels;
    mc.hidden = model.hidden;
    mc.dz = model.dz;
    mc.dz_gate_u = model.gate_dz_u;
    mc.dz_gate_v = model.gate_dz_v;
    mc.gate_hidden = model.gate_hidden;
    mc.dropout = model.dropout;
    mc.renormalize = model.renormalize;
    return mc;
}

synth::SynthSpec PipelineConfig::synth_spec() const {
    synth::SynthSpec s = synth;
    s.seed = seed;
    s.cnn_dim = features.cnn;
    s.poi_categories = features.poi_categories;
    return s;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return apply(root);
}

PipelineConfig config_from_string(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return apply(root);
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file: " + path);
    out << to_json(cfg).dump(2) << "\n";
    if (!out.good()) throw ConfigError("failed while writing " + path);
}

std::string config_to_string(const PipelineConfig& cfg) { return to_json(cfg).dump(2); }

}  // namespace riskgrid::pipeline
