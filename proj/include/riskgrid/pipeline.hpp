#pragma once

#include <string>
#include <vector>

#include "riskgrid/config.hpp"
#include "riskgrid/geo.hpp"

namespace riskgrid::pipeline {

/// Stage names accepted by run(), in pipeline order.
const std::vector<std::string>& stage_names();

/// Execute one stage against the workdir. Throws ConfigError (exit 1),
/// ArtifactError (exit 2), or any other exception for numeric failures
/// (exit 3); returns normally on success.
void run(const std::string& stage, const PipelineConfig& cfg);

void stage_synth(const PipelineConfig& cfg);
void stage_featurize(const PipelineConfig& cfg);
void stage_label(const PipelineConfig& cfg);
void stage_train(const PipelineConfig& cfg);
void stage_eval(const PipelineConfig& cfg);
void stage_predict(const PipelineConfig& cfg);
void stage_attribute(const PipelineConfig& cfg);
void stage_heatmap(const PipelineConfig& cfg);

// --- Artifact files ----------------------------------------------------------

void write_grid_json(const RegionGrid& grid, const std::string& path);
RegionGrid read_grid_json(const std::string& path);

/// `row,col,f1..fD` with a header line; rows in row-major cell order and
/// exactly one row per cell.
void write_feature_csv(const RegionGrid& grid, const std::vector<std::vector<double>>& rows,
                       const std::string& path);
std::vector<std::vector<double>> read_feature_csv(const RegionGrid& grid, int expect_dim,
                                                  const std::string& path,
                                                  const std::string& producer_stage);

struct LabelTable {
    std::vector<double> severity;  // per-cell severity sum (N_a)
    std::vector<int> level;
};

void write_labels_csv(const RegionGrid& grid, const LabelTable& labels, const std::string& path);
LabelTable read_labels_csv(const RegionGrid& grid, const std::string& path);

void write_predictions_csv(const RegionGrid& grid, const std::vector<int>& level,
                           const std::string& path);
std::vector<int> read_predictions_csv(const RegionGrid& grid, const std::string& path);

// --- Heatmap export ----------------------------------------------------------

/// RFC 7946 FeatureCollection: one closed counterclockwise polygon ring per
/// cell in row-major order, properties {row, col, risk, na?}. Coordinates are
/// (lon, lat).
void export_heatmap(const RegionGrid& grid, const std::vector<int>& risk,
                    const std::vector<double>* severity, const std::string& path);

/// One pixel per cell, three-color palette, northmost row on top.
void export_heatmap_png(const RegionGrid& grid, const std::vector<int>& risk,
                        const std::string& path);

}  // namespace riskgrid::pipeline
