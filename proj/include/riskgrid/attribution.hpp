#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgrid/models.hpp"

namespace riskgrid::attribution {

class AttributionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Differentiable class-score function F_c(x) over a flat input vector.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual int input_dim() const = 0;
    virtual int num_classes() const = 0;
    /// Score of class `target` at `x`; when `grad` is non-null it receives
    /// dF_target/dx (resized to input_dim).
    virtual double score(const std::vector<double>& x, int target,
                         std::vector<double>* grad) const = 0;
};

/// Adapts a trained network: the flat input is the first-input block followed
/// by the second-input block (when the model has one). The score is the
/// pre-softmax logit, or the log-probability for ensembles.
class ModelScorer : public Scorer {
public:
    explicit ModelScorer(const models::Model& model, bool training_mode = false);

    int input_dim() const override;
    int num_classes() const override;
    double score(const std::vector<double>& x, int target,
                 std::vector<double>* grad) const override;

private:
    const models::Model& model_;
};

struct IgConfig {
    int steps = 50;
    std::vector<double> baseline;  // empty = all zeros
    std::optional<int> target;     // default: predicted class at x
};

struct IgResult {
    std::vector<double> attributions;
    int target = 0;
    double score_input = 0.0;
    double score_baseline = 0.0;
    double completeness_gap = 0.0;  // |sum(attributions) - (F(x) - F(baseline))|
};

/// Right-Riemann integrated gradients along the straight path from the
/// baseline to `x`:
///   IG_i = (x_i - b_i) * (1/m) * sum_{k=1..m} dF(b + (k/m)(x-b))/dx_i.
IgResult integrated_gradients(const Scorer& scorer, const std::vector<double>& x,
                              const IgConfig& cfg = {});

/// (block, name) pairs for the feature blocks, in assembly order.
std::vector<std::pair<std::string, std::string>> st_feature_names(int poi_categories = 16);
std::vector<std::pair<std::string, std::string>> visual_feature_names(int spectrum_dim = 8,
                                                                      int cnn_dim = 45);

struct RankedDimension {
    int dim = 0;
    std::string block;
    std::string name;
    double attribution = 0.0;
};

/// Sort dimensions by signed attribution, descending; ties keep index order.
std::vector<RankedDimension> rank_dimensions(
    const std::vector<double>& attributions,
    const std::vector<std::pair<std::string, std::string>>& names);

void write_attribution_csv(const std::vector<RankedDimension>& ranked, const std::string& path);

/// Human-readable table plus per-block totals. `top_n` = 0 prints all rows.
std::string format_attribution_table(const std::vector<RankedDimension>& ranked,
                                     std::size_t top_n = 0);

}  // namespace riskgrid::attribution
