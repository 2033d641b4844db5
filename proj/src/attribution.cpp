#include "riskgrid/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "riskgrid/autodiff.hpp"

namespace riskgrid::attribution {

ModelScorer::ModelScorer(const models::Model& model, bool training_mode) : model_(model) {
    if (training_mode) {
        throw AttributionError("attribution requires an evaluation-mode model (dropout disabled)");
    }
}

int ModelScorer::input_dim() const {
    const auto& cfg = model_.config();
    int dim = cfg.dim_u;
    if (cfg.kind != models::ModelKind::kFcn) dim += cfg.dim_v;
    return dim;
}

int ModelScorer::num_classes() const { return model_.config().classes; }

double ModelScorer::score(const std::vector<double>& x, int target,
                          std::vector<double>* grad) const {
    const auto& cfg = model_.config();
    if (static_cast<int>(x.size()) != input_dim()) {
        throw AttributionError("input has " + std::to_string(x.size()) + " dimensions, expected " +
                               std::to_string(input_dim()));
    }
    if (target < 0 || target >= cfg.classes) {
        throw AttributionError("target class " + std::to_string(target) + " out of range");
    }

    models::Batch batch;
    batch.xu = ad::Tensor(cfg.dim_u, 1);
    std::copy(x.begin(), x.begin() + cfg.dim_u, batch.xu.v.begin());
    const int dv = cfg.kind == models::ModelKind::kFcn ? 0 : cfg.dim_v;
    batch.xv = ad::Tensor(dv, 1);
    std::copy(x.begin() + cfg.dim_u, x.begin() + cfg.dim_u + dv, batch.xv.v.begin());

    ad::Graph g;
    models::Forward f = model_.forward(g, batch, /*input_grads=*/grad != nullptr);
    int picked = g.pick(f.score, target, 0);
    double value = g.value(picked).at(0, 0);
    if (grad) {
        g.backward(picked);
        grad->assign(x.size(), 0.0);
        const ad::Tensor& gu = g.grad(f.xu_node);
        std::copy(gu.v.begin(), gu.v.end(), grad->begin());
        if (dv > 0 && f.xv_node >= 0) {
            const ad::Tensor& gv = g.grad(f.xv_node);
            std::copy(gv.v.begin(), gv.v.end(), grad->begin() + cfg.dim_u);
        }
    }
    return value;
}

IgResult integrated_gradients(const Scorer& scorer, const std::vector<double>& x,
                              const IgConfig& cfg) {
    const int dim = scorer.input_dim();
    if (static_cast<int>(x.size()) != dim) {
        throw AttributionError("input has " + std::to_string(x.size()) + " dimensions, expected " +
                               std::to_string(dim));
    }
    if (cfg.steps < 1) throw AttributionError("step count must be positive");
    std::vector<double> baseline = cfg.baseline;
    if (baseline.empty()) {
        baseline.assign(static_cast<std::size_t>(dim), 0.0);
    } else if (static_cast<int>(baseline.size()) != dim) {
        throw AttributionError("baseline has " + std::to_string(baseline.size()) +
                               " dimensions, expected " + std::to_string(dim));
    }
    for (double b : baseline) {
        if (!std::isfinite(b)) throw AttributionError("baseline has non-finite entries");
    }

    IgResult result;
    if (cfg.target) {
        result.target = *cfg.target;
        if (result.target < 0 || result.target >= scorer.num_classes()) {
            throw AttributionError("target class " + std::to_string(result.target) +
                                   " out of range");
        }
    } else {
        double best = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < scorer.num_classes(); ++c) {
            double s = scorer.score(x, c, nullptr);
            if (s > best) {
                best = s;
                result.target = c;
            }
        }
    }

    result.attributions.assign(static_cast<std::size_t>(dim), 0.0);
    std::vector<double> point(static_cast<std::size_t>(dim));
    std::vector<double> grad;
    for (int k = 1; k <= cfg.steps; ++k) {
        const double t = static_cast<double>(k) / cfg.steps;
        for (int i = 0; i < dim; ++i) {
            point[static_cast<std::size_t>(i)] =
                baseline[static_cast<std::size_t>(i)] +
                t * (x[static_cast<std::size_t>(i)] - baseline[static_cast<std::size_t>(i)]);
        }
        scorer.score(point, result.target, &grad);
        for (int i = 0; i < dim; ++i) {
            result.attributions[static_cast<std::size_t>(i)] += grad[static_cast<std::size_t>(i)];
        }
    }
    double total = 0.0;
    for (int i = 0; i < dim; ++i) {
        result.attributions[static_cast<std::size_t>(i)] *=
            (x[static_cast<std::size_t>(i)] - baseline[static_cast<std::size_t>(i)]) / cfg.steps;
        total += result.attributions[static_cast<std::size_t>(i)];
    }
    result.score_input = scorer.score(x, result.target, nullptr);
    result.score_baseline = scorer.score(baseline, result.target, nullptr);
    result.completeness_gap = std::abs(total - (result.score_input - result.score_baseline));
    return result;
}

std::vector<std::pair<std::string, std::string>> st_feature_names(int poi_categories) {
    std::vector<std::pair<std::string, std::string>> names;
    auto two = [](int v) {
        std::ostringstream s;
        s << std::setw(2) << std::setfill('0') << v;
        return s.str();
    };
    for (int h = 0; h < 24; ++h) names.emplace_back("tra", "in_h" + two(h));
    for (int h = 0; h < 24; ++h) names.emplace_back("tra", "out_h" + two(h));
    for (int c = 0; c < poi_categories; ++c) names.emplace_back("poi", "poi_c" + two(c));
    names.emplace_back("con", "deg_high");
    names.emplace_back("con", "deg_mid");
    names.emplace_back("con", "deg_low");
    for (int l = 1; l <= 4; ++l) names.emplace_back("wid", "width_l" + std::to_string(l));
    return names;
}

std::vector<std::pair<std::string, std::string>> visual_feature_names(int spectrum_dim,
                                                                      int cnn_dim) {
    std::vector<std::pair<std::string, std::string>> names;
    auto two = [](int v) {
        std::ostringstream s;
        s << std::setw(2) << std::setfill('0') << v;
        return s.str();
    };
    for (int i = 0; i < spectrum_dim; ++i) names.emplace_back("fra", "fra_b" + two(i));
    for (int i = 0; i < cnn_dim; ++i) names.emplace_back("cnn", "cnn_" + two(i));
    return names;
}

std::vector<RankedDimension> rank_dimensions(
    const std::vector<double>& attributions,
    const std::vector<std::pair<std::string, std::string>>& names) {
    if (attributions.size() != names.size()) {
        throw AttributionError("have " + std::to_string(names.size()) + " names for " +
                               std::to_string(attributions.size()) + " attribution values");
    }
    std::vector<RankedDimension> ranked(attributions.size());
    for (std::size_t i = 0; i < attributions.size(); ++i) {
        ranked[i] = {static_cast<int>(i), names[i].first, names[i].second, attributions[i]};
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedDimension& a, const RankedDimension& b) {
                         return a.attribution > b.attribution;
                     });
    return ranked;
}

void write_attribution_csv(const std::vector<RankedDimension>& ranked, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw AttributionError("cannot write " + path);
    out.precision(17);
    out << "dim_index,block,name,attribution\n";
    for (const auto& row : ranked) {
        out << row.dim << "," << row.block << "," << row.name << "," << row.attribution << "\n";
    }
    if (!out.good()) throw AttributionError("failed while writing " + path);
}

std::string format_attribution_table(const std::vector<RankedDimension>& ranked,
                                     std::size_t top_n) {
    std::map<std::string, double> block_totals;
    for (const auto& row : ranked) block_totals[row.block] += row.attribution;

    std::ostringstream out;
    out << std::setprecision(6);
    out << std::left << std::setw(6) << "dim" << std::setw(7) << "block" << std::setw(12) << "name"
        << "attribution\n";
    std::size_t limit = top_n == 0 ? ranked.size() : std::min(top_n, ranked.size());
    for (std::size_t i = 0; i < limit; ++i) {
        const auto& row = ranked[i];
        out << std::left << std::setw(6) << row.dim << std::setw(7) << row.block << std::setw(12)
            << row.name << row.attribution << "\n";
    }
    out << "block totals:\n";
    for (const auto& [block, total] : block_totals) {
        out << "  " << std::left << std::setw(7) << block << total << "\n";
    }
    return out.str();
}

}  // namespace riskgrid::attribution
