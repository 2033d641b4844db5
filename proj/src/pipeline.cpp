#include "riskgrid/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "riskgrid/attribution.hpp"
#include "riskgrid/evalharness.hpp"
#include "riskgrid/ingest.hpp"
#include "riskgrid/labeling.hpp"
#include "riskgrid/rng.hpp"
#include "riskgrid/st_features.hpp"
#include "riskgrid/synthcity.hpp"
#include "riskgrid/visual.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace riskgrid::pipeline {

namespace {

class StageLock {
public:
    explicit StageLock(const fs::path& workdir) : path_(workdir / ".stage.lock") {
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            if (errno == EEXIST) {
                throw ConfigError("workdir '" + workdir.string() +
                                  "' is locked by another run (remove " + path_.string() +
                                  " if stale)");
            }
            throw ConfigError("cannot create lock file " + path_.string());
        }
        ::close(fd);
    }
    ~StageLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    StageLock(const StageLock&) = delete;
    StageLock& operator=(const StageLock&) = delete;

private:
    fs::path path_;
};

fs::path wp(const PipelineConfig& cfg, const std::string& rel) {
    return fs::path(cfg.workdir) / rel;
}

std::string input_path(const PipelineConfig& cfg, const std::string& configured,
                       const std::string& synth_default) {
    if (!configured.empty()) return configured;
    return wp(cfg, "city/" + synth_default).string();
}

void require_file(const std::string& path, const std::string& producer) {
    if (!fs::exists(path)) {
        throw ArtifactError("missing " + path + "; run `" + producer + "` first");
    }
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

[[noreturn]] void corrupt(const std::string& path, const std::string& producer,
                          const std::string& why) {
    throw ArtifactError(path + ": " + why + "; re-run `" + producer + "`");
}

/// Grid from explicit config, or from the grid.json a previous stage wrote.
RegionGrid resolve_grid(const PipelineConfig& cfg, bool allow_build = true) {
    if (allow_build && cfg.grid.bbox) {
        if (cfg.grid.rows > 0) {
            return RegionGrid::forced(*cfg.grid.bbox, cfg.grid.rows, cfg.grid.cols);
        }
        return RegionGrid::from_bbox(*cfg.grid.bbox, cfg.grid.cell_km);
    }
    const std::string path = wp(cfg, "grid.json").string();
    if (!fs::exists(path)) {
        throw ArtifactError("no grid available (" + path +
                            " not found); run `synth` or configure grid.bbox");
    }
    return read_grid_json(path);
}

std::vector<std::pair<std::string, std::string>> arrangement_names(const PipelineConfig& cfg,
                                                                   models::ModelKind kind,
                                                                   eval::FeatureSet fset,
                                                                   bool swapped) {
    auto st = attribution::st_feature_names(cfg.features.poi_categories);
    auto vis =
        attribution::visual_feature_names(cfg.features.dictionary_k, cfg.features.cnn);
    std::vector<std::pair<std::string, std::string>> names;
    auto append = [&names](const std::vector<std::pair<std::string, std::string>>& block) {
        names.insert(names.end(), block.begin(), block.end());
    };
    if (kind == models::ModelKind::kFcn) {
        if (fset != eval::FeatureSet::kVisual) append(st);
        if (fset != eval::FeatureSet::kSpatioTemporal) append(vis);
        return names;
    }
    switch (fset) {
        case eval::FeatureSet::kSpatioTemporal:
            append(st);
            append(st);
            break;
        case eval::FeatureSet::kVisual:
            append(vis);
            append(vis);
            break;
        case eval::FeatureSet::kMultimodal:
            append(swapped ? vis : st);
            append(swapped ? st : vis);
            break;
    }
    return names;
}

struct LoadedModel {
    models::Model model;
    eval::FeatureSet fset;
    bool swapped = false;
};

LoadedModel load_trained_model(const PipelineConfig& cfg) {
    const std::string ckpt = wp(cfg, "model.ckpt").string();
    const std::string meta_path = wp(cfg, "model_meta.json").string();
    require_file(ckpt, "train");
    require_file(meta_path, "train");

    std::ifstream meta_in(meta_path);
    json meta;
    try {
        meta_in >> meta;
    } catch (const json::exception& e) {
        corrupt(meta_path, "train", e.what());
    }
    LoadedModel loaded{models::load_checkpoint(ckpt), eval::FeatureSet::kMultimodal, false};
    try {
        loaded.fset = eval::parse_feature_set(meta.at("feature_set").get<std::string>());
        loaded.swapped = meta.at("swapped").get<bool>();
    } catch (const std::exception& e) {
        corrupt(meta_path, "train", e.what());
    }
    return loaded;
}

eval::RawFeatures load_raw_features(const PipelineConfig& cfg, const RegionGrid& grid,
                                    bool with_labels) {
    eval::RawFeatures raw;
    raw.xu = read_feature_csv(grid, cfg.features.st_dim(), wp(cfg, "features_st.csv").string(),
                              "featurize");
    raw.xv = read_feature_csv(grid, cfg.features.visual_dim(),
                              wp(cfg, "features_visual.csv").string(), "featurize");
    if (with_labels) {
        raw.labels = read_labels_csv(grid, wp(cfg, "labels.csv").string()).level;
    } else {
        raw.labels.assign(raw.xu.size(), 0);
    }
    return raw;
}

std::string percent(double x) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << 100.0 * x;
    return out.str();
}

}  // namespace

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"synth",   "featurize", "label",
                                                   "train",   "eval",      "predict",
                                                   "attribute", "heatmap"};
    return names;
}

void run(const std::string& stage, const PipelineConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.workdir);
    StageLock lock(cfg.workdir);
    if (stage == "synth") return stage_synth(cfg);
    if (stage == "featurize") return stage_featurize(cfg);
    if (stage == "label") return stage_label(cfg);
    if (stage == "train") return stage_train(cfg);
    if (stage == "eval") return stage_eval(cfg);
    if (stage == "predict") return stage_predict(cfg);
    if (stage == "attribute") return stage_attribute(cfg);
    if (stage == "heatmap") return stage_heatmap(cfg);
    throw ConfigError("unknown subcommand: " + stage);
}

// --- Stages -------------------------------------------------------------------

void stage_synth(const PipelineConfig& cfg) {
    const synth::SynthSpec spec = cfg.synth_spec();
    const std::string city_dir = wp(cfg, "city").string();
    synth::GeneratedCity city = synth::generate(spec, city_dir);
    write_grid_json(city.grid, wp(cfg, "grid.json").string());
    std::cout << "synth: " << city.grid.rows() << "x" << city.grid.cols() << " cells into "
              << city_dir << " (seed " << spec.seed << ", eta " << spec.eta << ")\n";
}

void stage_featurize(const PipelineConfig& cfg) {
    RegionGrid grid = resolve_grid(cfg);
    write_grid_json(grid, wp(cfg, "grid.json").string());
    const auto n = static_cast<std::size_t>(grid.n_cells());

    // Spatio-temporal block.
    const std::string gps_path = input_path(cfg, cfg.paths.gps, "gps.csv");
    const std::string poi_path = input_path(cfg, cfg.paths.poi, "poi.csv");
    const std::string osm_path = input_path(cfg, cfg.paths.osm, "osm.xml");
    require_file(gps_path, "synth");
    require_file(poi_path, "synth");
    require_file(osm_path, "synth");

    ParseStats gps_stats;
    std::vector<TrafficPattern> tra;
    {
        std::vector<GpsPoint> gps = read_gps(gps_path, &gps_stats);
        tra = traffic_patterns(gps, grid);
    }
    ParseStats poi_stats;
    std::vector<PoiHistogram> poi =
        poi_bow(read_poi(poi_path, cfg.features.poi_categories, &poi_stats), grid,
                cfg.features.poi_categories);
    OsmGraph osm = parse_osm(osm_path);
    std::vector<ConnectivityHistogram> con = node_connectivity(osm, grid);
    std::int64_t unknown_tags = 0;
    std::vector<WidthHistogram> wid = road_width(osm, grid, &unknown_tags);
    std::vector<std::vector<double>> xu = assemble_xu(tra, poi, con, wid);
    write_feature_csv(grid, xu, wp(cfg, "features_st.csv").string());

    // Visual block.
    const std::string tiles_dir = input_path(cfg, cfg.paths.tiles, "tiles");
    require_file(tiles_dir, "synth");
    TileLoadStats tile_stats;
    auto tiles = load_tiles(tiles_dir, grid, kPatchSize, &tile_stats);

    std::vector<FractalSpectrum> corpus;
    std::map<std::int64_t, std::vector<FractalSpectrum>> spectra_by_cell;
    for (std::int64_t idx = 0; idx < grid.n_cells(); ++idx) {
        auto it = tiles.find(idx);
        if (it == tiles.end()) continue;
        auto spectra =
            tile_spectra(it->second.pixels, cfg.features.patches_per_tile,
                         derive_seed(cfg.seed, "patches", static_cast<std::uint64_t>(idx)));
        corpus.insert(corpus.end(), spectra.begin(), spectra.end());
        spectra_by_cell.emplace(idx, std::move(spectra));
    }
    FractalDictionary dict =
        build_dictionary(corpus, cfg.features.dictionary_k, derive_seed(cfg.seed, "dict"));
    save_dictionary(dict, wp(cfg, "dictionary.txt").string());

    CnnVectors cnn = cfg.features.use_cnn
                         ? load_cnn_vectors(input_path(cfg, cfg.paths.cnn, "cnn.csv"), grid,
                                            cfg.features.cnn)
                         : zero_cnn_vectors(grid, cfg.features.cnn);

    std::vector<std::vector<double>> xv(n);
    std::size_t missing_tiles = 0;
    for (std::int64_t idx = 0; idx < grid.n_cells(); ++idx) {
        std::vector<double> fra(static_cast<std::size_t>(cfg.features.dictionary_k), 0.0);
        auto it = spectra_by_cell.find(idx);
        if (it != spectra_by_cell.end()) {
            fra = bow_from_spectra(it->second, dict);
        } else {
            ++missing_tiles;
        }
        xv[static_cast<std::size_t>(idx)] =
            assemble_xv(fra, cnn.values[static_cast<std::size_t>(idx)],
                        cfg.features.dictionary_k, cfg.features.cnn);
    }
    if (missing_tiles > 0) {
        std::cerr << "warning: " << missing_tiles
                  << " cells have no usable tile; their fractal block is zero\n";
    }
    write_feature_csv(grid, xv, wp(cfg, "features_visual.csv").string());

    std::cout << "featurize: " << n << " cells; gps " << gps_stats.parsed << " rows ("
              << gps_stats.malformed << " malformed), poi " << poi_stats.parsed << " rows ("
              << poi_stats.malformed << " malformed), osm " << osm.ways.size() << " ways ("
              << osm.dropped_ways << " dropped, " << unknown_tags << " unknown highway), tiles "
              << tile_stats.loaded << " loaded (" << tile_stats.skipped << " skipped)\n";
}

void stage_label(const PipelineConfig& cfg) {
    RegionGrid grid = resolve_grid(cfg);
    const std::string acc_path = input_path(cfg, cfg.paths.accidents, "accidents.csv");
    require_file(acc_path, "synth");

    ParseStats stats;
    std::vector<AccidentRecord> accidents = read_accidents(acc_path, &stats);
    LabelTable table;
    table.severity = aggregate_severity(accidents, grid);
    RiskLabels labels = kmeans_levels(table.severity, derive_seed(cfg.seed, "labels"));
    table.level = labels.level;
    write_labels_csv(grid, table, wp(cfg, "labels.csv").string());

    std::array<std::size_t, 3> counts{};
    for (int lv : table.level) counts[static_cast<std::size_t>(lv)]++;
    std::cout << "label: " << stats.parsed << " accidents (" << stats.malformed
              << " malformed) over " << grid.n_cells() << " cells; low/mid/high = " << counts[0]
              << "/" << counts[1] << "/" << counts[2] << "; centroids " << labels.centroids[0]
              << ", " << labels.centroids[1] << ", " << labels.centroids[2] << "\n";
}

void stage_train(const PipelineConfig& cfg) {
    RegionGrid grid = resolve_grid(cfg, /*allow_build=*/false);
    eval::RawFeatures raw = load_raw_features(cfg, grid, /*with_labels=*/true);
    eval::FeatureSet fset = eval::parse_feature_set(cfg.model.feature_set);
    models::Dataset ds = eval::arrange(raw, cfg.model.kind, fset, cfg.model.swapped);

    const int dim_u = static_cast<int>(ds.xu.front().size());
    const int dim_v = ds.xv.empty() ? 0 : static_cast<int>(ds.xv.front().size());
    models::ModelConfig mc = cfg.model_config(dim_u, dim_v);

    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    auto [rest, val] = eval::stratified_holdout(all, ds.labels, cfg.protocol.val_fraction,
                                                derive_seed(cfg.seed, "val"));
    std::vector<std::size_t> train_idx =
        eval::rebalance(rest, ds.labels, derive_seed(cfg.seed, "resample"),
                        eval::parse_resample_mode(cfg.protocol.resample));

    models::Model model(mc, derive_seed(cfg.seed, "model"));
    models::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train");
    models::TrainResult result = models::train(model, ds, train_idx, val, tc);

    models::save_checkpoint(model, wp(cfg, "model.ckpt").string());
    models::write_history_csv(result, wp(cfg, "history.csv").string());
    json meta;
    meta["kind"] = models::to_string(cfg.model.kind);
    meta["feature_set"] = cfg.model.feature_set;
    meta["swapped"] = cfg.model.swapped;
    meta["dim_u"] = dim_u;
    meta["dim_v"] = dim_v;
    std::ofstream meta_out(wp(cfg, "model_meta.json"));
    meta_out << meta.dump(2) << "\n";
    if (!meta_out.good()) throw ConfigError("cannot write model_meta.json");

    std::cout << "train: " << models::to_string(cfg.model.kind) << " on "
              << cfg.model.feature_set << " features (" << dim_u << "+" << dim_v << " dims), "
              << result.history.size() << " epochs, best epoch " << result.best_epoch
              << " with validation accuracy " << percent(result.best_val_accuracy) << "%\n";
}

void stage_eval(const PipelineConfig& cfg) {
    RegionGrid grid = resolve_grid(cfg, /*allow_build=*/false);
    eval::RawFeatures raw = load_raw_features(cfg, grid, /*with_labels=*/true);

    const models::ModelKind kinds[] = {models::ModelKind::kFcn, models::ModelKind::kFeatureDfnn,
                                       models::ModelKind::kModelCnne,
                                       models::ModelKind::kModelDfnn};
    const eval::FeatureSet fsets[] = {eval::FeatureSet::kSpatioTemporal,
                                      eval::FeatureSet::kVisual, eval::FeatureSet::kMultimodal};

    std::ofstream grid_csv(wp(cfg, "eval_grid.csv"));
    if (!grid_csv) throw ConfigError("cannot write eval_grid.csv");
    grid_csv.precision(17);
    grid_csv << "model,feature_set,mean_accuracy";
    for (int f = 0; f < cfg.protocol.folds; ++f) grid_csv << ",fold" << f;
    grid_csv << "\n";

    std::map<std::string, std::map<std::string, double>> table;
    for (models::ModelKind kind : kinds) {
        for (eval::FeatureSet fset : fsets) {
            models::Dataset ds = eval::arrange(raw, kind, fset);
            const int dim_u = static_cast<int>(ds.xu.front().size());
            const int dim_v = ds.xv.empty() ? 0 : static_cast<int>(ds.xv.front().size());
            models::ModelConfig mc = cfg.model_config(dim_u, dim_v);
            mc.kind = kind;

            eval::CvOptions opts;
            opts.k = cfg.protocol.folds;
            opts.seed = derive_seed(cfg.seed, "eval-" + models::to_string(kind) + "-" +
                                                  eval::to_string(fset));
            opts.train = cfg.train;
            opts.train.seed = 0;  // per-fold seeds derive from opts.seed
            opts.resample = eval::parse_resample_mode(cfg.protocol.resample);
            opts.val_fraction = cfg.protocol.val_fraction;

            eval::CvResult cv = eval::cross_validate(mc, ds, opts);
            table[models::to_string(kind)][eval::to_string(fset)] = cv.report.mean_accuracy;

            grid_csv << models::to_string(kind) << "," << eval::to_string(fset) << ","
                     << cv.report.mean_accuracy;
            for (double acc : cv.report.fold_accuracy) grid_csv << "," << acc;
            grid_csv << "\n";

            if (kind == cfg.model.kind && eval::to_string(fset) == cfg.model.feature_set) {
                eval::write_report_csv(cv.report, wp(cfg, "eval_report.csv").string());
            }
            std::cout << "eval: " << models::to_string(kind) << " / " << eval::to_string(fset)
                      << " -> " << percent(cv.report.mean_accuracy) << "%\n";
        }
    }
    if (!grid_csv.good()) throw ConfigError("failed while writing eval_grid.csv");

    std::ostringstream text;
    text << std::left << std::setw(14) << "model";
    for (eval::FeatureSet fset : fsets) text << std::setw(10) << eval::to_string(fset);
    text << "\n";
    for (models::ModelKind kind : kinds) {
        text << std::left << std::setw(14) << models::to_string(kind);
        for (eval::FeatureSet fset : fsets) {
            text << std::setw(10) << percent(table[models::to_string(kind)][eval::to_string(fset)]);
        }
        text << "\n";
    }
    std::ofstream grid_txt(wp(cfg, "eval_grid.txt"));
    grid_txt << text.str();
    if (!grid_txt.good()) throw ConfigError("cannot write eval_grid.txt");
    std::cout << text.str();
}

void stage_predict(const PipelineConfig& cfg) {
    RegionGrid grid = resolve_grid(cfg, /*allow_build=*/false);
    LoadedModel loaded = load_trained_model(cfg);
    eval::RawFeatures raw = load_raw_features(cfg, grid, /*with_labels=*/false);
    models::Dataset ds =
        eval::arrange(raw, loaded.model.config().kind, loaded.fset, loaded.swapped);

    const int dim_u = static_cast<int>(ds.xu.front().size());
    const int dim_v = ds.xv.empty() ? 0 : static_cast<int>(ds.xv.front().size());
    if (dim_u != loaded.model.config().dim_u || dim_v != loaded.model.config().dim_v) {
        throw ArtifactError("model.ckpt expects dims " +
                            std::to_string(loaded.model.config().dim_u) + "+" +
                            std::to_string(loaded.model.config().dim_v) + " but features have " +
                            std::to_string(dim_u) + "+" + std::to_string(dim_v) +
                            "; re-run `train` after `featurize`");
    }

    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> preds = models::predict(loaded.model, ds, all);
    write_predictions_csv(grid, preds, wp(cfg, "predictions.csv").string());

    std::array<std::size_t, 3> counts{};
    for (int lv : preds) counts[static_cast<std::size_t>(lv)]++;
    std::cout << "predict: " << preds.size() << " cells; low/mid/high = " << counts[0] << "/"
              << counts[1] << "/" << counts[2] << "\n";
}

void stage_attribute(const PipelineConfig& cfg) {
    RegionGrid grid = resolve_grid(cfg, /*allow_build=*/false);
    LoadedModel loaded = load_trained_model(cfg);
    eval::RawFeatures raw = load_raw_features(cfg, grid, /*with_labels=*/false);
    models::Dataset ds =
        eval::arrange(raw, loaded.model.config().kind, loaded.fset, loaded.swapped);

    attribution::ModelScorer scorer(loaded.model);
    auto names = arrangement_names(cfg, loaded.model.config().kind, loaded.fset, loaded.swapped);
    if (static_cast<int>(names.size()) != scorer.input_dim()) {
        throw ArtifactError("feature layout does not match the checkpoint; re-run `train`");
    }

    attribution::IgConfig ig_cfg;
    ig_cfg.steps = cfg.attribution.steps;

    auto flat_input = [&ds](std::size_t i) {
        std::vector<double> x = ds.xu[i];
        if (!ds.xv.empty()) x.insert(x.end(), ds.xv[i].begin(), ds.xv[i].end());
        return x;
    };

    std::vector<double> mean_attr(static_cast<std::size_t>(scorer.input_dim()), 0.0);
    double mean_gap = 0.0;
    std::size_t n_attributed = 0;
    if (cfg.attribution.cell) {
        if (!grid.contains(*cfg.attribution.cell)) {
            throw ConfigError("config key 'attribution.cell': outside the grid");
        }
        const auto i = static_cast<std::size_t>(grid.linear(*cfg.attribution.cell));
        attribution::IgResult res = integrated_gradients(scorer, flat_input(i), ig_cfg);
        mean_attr = res.attributions;
        mean_gap = res.completeness_gap;
        n_attributed = 1;
        std::cout << "attribute: cell (" << cfg.attribution.cell->row << ","
                  << cfg.attribution.cell->col << "), predicted class " << res.target
                  << ", completeness gap " << res.completeness_gap << "\n";
    } else {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            attribution::IgResult res = integrated_gradients(scorer, flat_input(i), ig_cfg);
            for (std::size_t d = 0; d < mean_attr.size(); ++d) {
                mean_attr[d] += res.attributions[d];
            }
            mean_gap += res.completeness_gap;
            ++n_attributed;
        }
        for (double& v : mean_attr) v /= static_cast<double>(n_attributed);
        mean_gap /= static_cast<double>(n_attributed);
        std::cout << "attribute: averaged over " << n_attributed
                  << " cells, mean completeness gap " << mean_gap << "\n";
    }

    auto ranked = attribution::rank_dimensions(mean_attr, names);
    attribution::write_attribution_csv(ranked, wp(cfg, "attributions.csv").string());
    std::string table = attribution::format_attribution_table(ranked, 20);
    std::ofstream txt(wp(cfg, "attributions.txt"));
    txt << table;
    if (!txt.good()) throw ConfigError("cannot write attributions.txt");
    std::cout << table;
}

void stage_heatmap(const PipelineConfig& cfg) {
    RegionGrid grid = resolve_grid(cfg, /*allow_build=*/false);
    const std::string labels_path = wp(cfg, "labels.csv").string();
    require_file(labels_path, "label");
    LabelTable labels = read_labels_csv(grid, labels_path);

    export_heatmap(grid, labels.level, &labels.severity,
                   wp(cfg, "heatmap_truth.geojson").string());
    export_heatmap_png(grid, labels.level, wp(cfg, "heatmap_truth.png").string());
    std::cout << "heatmap: wrote heatmap_truth.geojson (" << grid.n_cells() << " cells)\n";

    const std::string pred_path = wp(cfg, "predictions.csv").string();
    if (fs::exists(pred_path)) {
        std::vector<int> preds = read_predictions_csv(grid, pred_path);
        export_heatmap(grid, preds, &labels.severity, wp(cfg, "heatmap_pred.geojson").string());
        export_heatmap_png(grid, preds, wp(cfg, "heatmap_pred.png").string());
        std::cout << "heatmap: wrote heatmap_pred.geojson (" << grid.n_cells() << " cells)\n";
    }
}

// --- Artifact files ------------------------------------------------------------

void write_grid_json(const RegionGrid& grid, const std::string& path) {
    json j;
    j["lat_min"] = grid.bbox().lat_min;
    j["lat_max"] = grid.bbox().lat_max;
    j["lon_min"] = grid.bbox().lon_min;
    j["lon_max"] = grid.bbox().lon_max;
    j["rows"] = grid.rows();
    j["cols"] = grid.cols();
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out.good()) throw ConfigError("failed while writing " + path);
}

RegionGrid read_grid_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArtifactError("missing " + path + "; run `synth` or configure grid.bbox");
    json j;
    try {
        in >> j;
        BoundingBox bbox{j.at("lat_min").get<double>(), j.at("lat_max").get<double>(),
                         j.at("lon_min").get<double>(), j.at("lon_max").get<double>()};
        return RegionGrid::forced(bbox, j.at("rows").get<int>(), j.at("cols").get<int>());
    } catch (const json::exception& e) {
        throw ArtifactError(path + ": " + e.what() + "; re-run `synth`");
    }
}

void write_feature_csv(const RegionGrid& grid, const std::vector<std::vector<double>>& rows,
                       const std::string& path) {
    if (rows.size() != static_cast<std::size_t>(grid.n_cells())) {
        throw ConfigError("feature rows do not cover the grid");
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out.precision(17);
    const std::size_t dim = rows.empty() ? 0 : rows.front().size();
    out << "row,col";
    for (std::size_t d = 1; d <= dim; ++d) out << ",f" << d;
    out << "\n";
    for (std::int64_t idx = 0; idx < grid.n_cells(); ++idx) {
        CellId cell = grid.from_linear(idx);
        out << cell.row << "," << cell.col;
        for (double v : rows[static_cast<std::size_t>(idx)]) out << "," << v;
        out << "\n";
    }
    if (!out.good()) throw ConfigError("failed while writing " + path);
}

std::vector<std::vector<double>> read_feature_csv(const RegionGrid& grid, int expect_dim,
                                                  const std::string& path,
                                                  const std::string& producer_stage) {
    require_file(path, producer_stage);
    std::ifstream in(path);
    if (!in) throw ArtifactError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) corrupt(path, producer_stage, "empty file");

    std::vector<std::vector<double>> rows(static_cast<std::size_t>(grid.n_cells()));
    std::vector<bool> seen(rows.size(), false);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (static_cast<int>(fields.size()) != expect_dim + 2) {
            corrupt(path, producer_stage,
                    "expected " + std::to_string(expect_dim) + " feature dims, line has " +
                        std::to_string(fields.size() - 2));
        }
        try {
            CellId cell{std::stoi(fields[0]), std::stoi(fields[1])};
            if (!grid.contains(cell)) corrupt(path, producer_stage, "cell outside grid: " + line);
            const auto idx = static_cast<std::size_t>(grid.linear(cell));
            if (seen[idx]) corrupt(path, producer_stage, "duplicate cell: " + line);
            seen[idx] = true;
            rows[idx].reserve(static_cast<std::size_t>(expect_dim));
            for (int d = 0; d < expect_dim; ++d) {
                rows[idx].push_back(std::stod(fields[static_cast<std::size_t>(d) + 2]));
            }
        } catch (const std::invalid_argument&) {
            corrupt(path, producer_stage, "malformed line: " + line);
        } catch (const std::out_of_range&) {
            corrupt(path, producer_stage, "malformed line: " + line);
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) {
            corrupt(path, producer_stage,
                    "no row for cell " + std::to_string(grid.from_linear(
                        static_cast<std::int64_t>(i)).row) + "," +
                        std::to_string(grid.from_linear(static_cast<std::int64_t>(i)).col));
        }
    }
    return rows;
}

void write_labels_csv(const RegionGrid& grid, const LabelTable& labels, const std::string& path) {
    if (labels.severity.size() != static_cast<std::size_t>(grid.n_cells()) ||
        labels.level.size() != labels.severity.size()) {
        throw ConfigError("label table does not cover the grid");
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out.precision(17);
    out << "row,col,na,level\n";
    for (std::int64_t idx = 0; idx < grid.n_cells(); ++idx) {
        CellId cell = grid.from_linear(idx);
        out << cell.row << "," << cell.col << "," << labels.severity[static_cast<std::size_t>(idx)]
            << "," << labels.level[static_cast<std::size_t>(idx)] << "\n";
    }
    if (!out.good()) throw ConfigError("failed while writing " + path);
}

LabelTable read_labels_csv(const RegionGrid& grid, const std::string& path) {
    require_file(path, "label");
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    LabelTable table;
    table.severity.assign(static_cast<std::size_t>(grid.n_cells()), 0.0);
    table.level.assign(table.severity.size(), -1);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != 4) corrupt(path, "label", "malformed line: " + line);
        try {
            CellId cell{std::stoi(fields[0]), std::stoi(fields[1])};
            if (!grid.contains(cell)) corrupt(path, "label", "cell outside grid: " + line);
            const auto idx = static_cast<std::size_t>(grid.linear(cell));
            table.severity[idx] = std::stod(fields[2]);
            int level = std::stoi(fields[3]);
            if (level < 0 || level >= kRiskLevels) {
                corrupt(path, "label", "risk level out of range: " + line);
            }
            table.level[idx] = level;
        } catch (const std::invalid_argument&) {
            corrupt(path, "label", "malformed line: " + line);
        } catch (const std::out_of_range&) {
            corrupt(path, "label", "malformed line: " + line);
        }
    }
    for (int lv : table.level) {
        if (lv < 0) corrupt(path, "label", "labels do not cover the grid");
    }
    return table;
}

void write_predictions_csv(const RegionGrid& grid, const std::vector<int>& level,
                           const std::string& path) {
    if (level.size() != static_cast<std::size_t>(grid.n_cells())) {
        throw ConfigError("predictions do not cover the grid");
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "row,col,level\n";
    for (std::int64_t idx = 0; idx < grid.n_cells(); ++idx) {
        CellId cell = grid.from_linear(idx);
        out << cell.row << "," << cell.col << "," << level[static_cast<std::size_t>(idx)] << "\n";
    }
    if (!out.good()) throw ConfigError("failed while writing " + path);
}

std::vector<int> read_predictions_csv(const RegionGrid& grid, const std::string& path) {
    require_file(path, "predict");
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    std::vector<int> level(static_cast<std::size_t>(grid.n_cells()), -1);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != 3) corrupt(path, "predict", "malformed line: " + line);
        try {
            CellId cell{std::stoi(fields[0]), std::stoi(fields[1])};
            if (!grid.contains(cell)) corrupt(path, "predict", "cell outside grid: " + line);
            int lv = std::stoi(fields[2]);
            if (lv < 0 || lv >= kRiskLevels) {
                corrupt(path, "predict", "risk level out of range: " + line);
            }
            level[static_cast<std::size_t>(grid.linear(cell))] = lv;
        } catch (const std::invalid_argument&) {
            corrupt(path, "predict", "malformed line: " + line);
        } catch (const std::out_of_range&) {
            corrupt(path, "predict", "malformed line: " + line);
        }
    }
    for (int lv : level) {
        if (lv < 0) corrupt(path, "predict", "predictions do not cover the grid");
    }
    return level;
}

// --- Heatmap export -------------------------------------------------------------

void export_heatmap(const RegionGrid& grid, const std::vector<int>& risk,
                    const std::vector<double>* severity, const std::string& path) {
    if (risk.size() != static_cast<std::size_t>(grid.n_cells())) {
        throw ConfigError("risk classes do not cover the grid");
    }
    if (severity && severity->size() != risk.size()) {
        throw ConfigError("severity sums do not cover the grid");
    }
    json features = json::array();
    for (std::int64_t idx = 0; idx < grid.n_cells(); ++idx) {
        const auto i = static_cast<std::size_t>(idx);
        if (risk[i] < 0 || risk[i] >= kRiskLevels) {
            throw ConfigError("risk level out of range at cell " + std::to_string(idx));
        }
        CellId cell = grid.from_linear(idx);
        BoundingBox b = grid.cell_bounds(cell);
        json ring = json::array({json::array({b.lon_min, b.lat_min}),
                                 json::array({b.lon_max, b.lat_min}),
                                 json::array({b.lon_max, b.lat_max}),
                                 json::array({b.lon_min, b.lat_max}),
                                 json::array({b.lon_min, b.lat_min})});
        json props;
        props["row"] = cell.row;
        props["col"] = cell.col;
        props["risk"] = risk[i];
        if (severity) props["na"] = (*severity)[i];
        features.push_back(json{{"type", "Feature"},
                                {"geometry", json{{"type", "Polygon"},
                                                  {"coordinates", json::array({ring})}}},
                                {"properties", props}});
    }
    json fc{{"type", "FeatureCollection"}, {"features", features}};
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << fc.dump() << "\n";
    if (!out.good()) throw ConfigError("failed while writing " + path);
}

void export_heatmap_png(const RegionGrid& grid, const std::vector<int>& risk,
                        const std::string& path) {
    if (risk.size() != static_cast<std::size_t>(grid.n_cells())) {
        throw ConfigError("risk classes do not cover the grid");
    }
    static constexpr std::uint8_t palette[3][3] = {
        {76, 175, 80},   // low: green
        {255, 193, 7},   // medium: amber
        {211, 47, 47},   // high: red
    };
    RgbImage img(grid.rows(), grid.cols());
    for (std::int64_t idx = 0; idx < grid.n_cells(); ++idx) {
        CellId cell = grid.from_linear(idx);
        int lv = risk[static_cast<std::size_t>(idx)];
        if (lv < 0 || lv >= kRiskLevels) {
            throw ConfigError("risk level out of range at cell " + std::to_string(idx));
        }
        std::uint8_t* px = img.at(grid.rows() - 1 - cell.row, cell.col);
        px[0] = palette[lv][0];
        px[1] = palette[lv][1];
        px[2] = palette[lv][2];
    }
    write_png_rgb(path, img);
}

}  // namespace riskgrid::pipeline
