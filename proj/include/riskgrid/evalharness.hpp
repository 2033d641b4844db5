#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskgrid/models.hpp"

namespace riskgrid::eval {

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FoldPlan {
    std::vector<std::vector<std::size_t>> folds;
    std::uint64_t seed = 0;
};

/// Stratified k-fold assignment. Classes are dealt round-robin in label
/// order from one continuous cursor, so fold sizes differ by at most one
/// overall and per class. A class with fewer than k members triggers a
/// warning and is simply dealt as-is.
FoldPlan kfold_split(std::size_t n, int k, const std::vector<int>& labels, std::uint64_t seed);

enum class ResampleMode { kNone, kOversample, kUndersample };

ResampleMode parse_resample_mode(const std::string& name);
std::string to_string(ResampleMode mode);

/// Class rebalancing over training indices only. Oversampling draws minority
/// samples with replacement up to the majority count; undersampling keeps a
/// seeded subset of each class down to the minority count.
std::vector<std::size_t> rebalance(const std::vector<std::size_t>& train_indices,
                                   const std::vector<int>& labels, std::uint64_t seed,
                                   ResampleMode mode = ResampleMode::kOversample);

/// Split indices into (rest, holdout) with a stratified seeded holdout of
/// roughly `fraction` per class (floor; classes with fewer than
/// 1/fraction members contribute nothing).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const std::vector<std::size_t>& indices, const std::vector<int>& labels, double fraction,
    std::uint64_t seed);

struct EvalReport {
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
    std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
    std::vector<double> recall;                        // per class
};

/// Single-fold evaluation: argmax predictions (ties to the lowest class),
/// accuracy, confusion counts, per-class recall.
EvalReport evaluate(const models::Model& model, const models::Dataset& ds,
                    const std::vector<std::size_t>& test_idx);

/// Which feature blocks a model variant consumes.
enum class FeatureSet { kSpatioTemporal, kVisual, kMultimodal };

std::string to_string(FeatureSet fs);
FeatureSet parse_feature_set(const std::string& name);

/// Raw per-cell feature rows before model-specific arrangement.
struct RawFeatures {
    std::vector<std::vector<double>> xu;  // spatio-temporal block
    std::vector<std::vector<double>> xv;  // visual block
    std::vector<int> labels;
};

/// Arrange raw features for a (model, feature set) pair. Single-input models
/// receive the selected blocks concatenated in xu; two-input models receive
/// the same block on both inputs for single-modality variants. `swapped`
/// routes the visual block to the first input and the spatio-temporal block
/// to the second (multimodal two-input models only).
models::Dataset arrange(const RawFeatures& raw, models::ModelKind kind, FeatureSet fs,
                        bool swapped = false);

struct CvOptions {
    int k = 5;
    std::uint64_t seed = 0;
    models::TrainConfig train;
    ResampleMode resample = ResampleMode::kOversample;
    double val_fraction = 0.1;
};

struct CvResult {
    EvalReport report;
    std::vector<models::TrainResult> fold_training;
};

/// Full protocol on one arranged dataset: stratified folds, per-fold inner
/// validation holdout, training-side rebalancing, fresh seeded model per
/// fold, test-fold evaluation.
CvResult cross_validate(const models::ModelConfig& model_cfg, const models::Dataset& ds,
                        const CvOptions& opts);

void write_report_csv(const EvalReport& report, const std::string& path);
std::string format_report(const EvalReport& report);

}  // namespace riskgrid::eval
