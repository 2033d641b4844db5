#include "riskgrid/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "riskgrid/rng.hpp"

namespace riskgrid::eval {

namespace {

std::map<int, std::vector<std::size_t>> group_by_label(const std::vector<std::size_t>& indices,
                                                       const std::vector<int>& labels) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i : indices) {
        if (i >= labels.size()) {
            throw EvalError("index " + std::to_string(i) + " out of range for " +
                            std::to_string(labels.size()) + " labels");
        }
        groups[labels[i]].push_back(i);
    }
    return groups;
}

void shuffle_in_place(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.uniform_index(i)]);
    }
}

}  // namespace

FoldPlan kfold_split(std::size_t n, int k, const std::vector<int>& labels, std::uint64_t seed) {
    if (k < 2) throw EvalError("fold count must be at least 2");
    if (labels.size() != n) throw EvalError("label count does not match sample count");
    if (n < static_cast<std::size_t>(k)) throw EvalError("fewer samples than folds");

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    auto groups = group_by_label(all, labels);

    Rng rng(derive_seed(seed, "kfold"));
    FoldPlan plan;
    plan.seed = seed;
    plan.folds.assign(static_cast<std::size_t>(k), {});
    std::size_t cursor = 0;
    for (auto& [label, members] : groups) {
        if (members.size() < static_cast<std::size_t>(k)) {
            std::cerr << "warning: class " << label << " has " << members.size()
                      << " samples, fewer than " << k << " folds; left unstratified\n";
        }
        shuffle_in_place(members, rng);
        for (std::size_t idx : members) {
            plan.folds[cursor % static_cast<std::size_t>(k)].push_back(idx);
            ++cursor;
        }
    }
    return plan;
}

ResampleMode parse_resample_mode(const std::string& name) {
    if (name == "none") return ResampleMode::kNone;
    if (name == "oversample") return ResampleMode::kOversample;
    if (name == "undersample") return ResampleMode::kUndersample;
    throw EvalError("unknown resample mode: " + name);
}

std::string to_string(ResampleMode mode) {
    switch (mode) {
        case ResampleMode::kNone: return "none";
        case ResampleMode::kOversample: return "oversample";
        case ResampleMode::kUndersample: return "undersample";
    }
    throw EvalError("unknown resample mode");
}

std::vector<std::size_t> rebalance(const std::vector<std::size_t>& train_indices,
                                   const std::vector<int>& labels, std::uint64_t seed,
                                   ResampleMode mode) {
    if (mode == ResampleMode::kNone) return train_indices;
    if (train_indices.empty()) throw EvalError("rebalance: empty training set");

    auto groups = group_by_label(train_indices, labels);
    std::unordered_set<int> universe(labels.begin(), labels.end());
    for (int label : universe) {
        if (!groups.count(label)) {
            throw EvalError("rebalance: class " + std::to_string(label) +
                            " has no training samples");
        }
    }

    Rng rng(derive_seed(seed, "rebalance"));
    if (mode == ResampleMode::kOversample) {
        std::size_t target = 0;
        for (const auto& [label, members] : groups) target = std::max(target, members.size());
        std::vector<std::size_t> out = train_indices;
        for (const auto& [label, members] : groups) {
            for (std::size_t need = target - members.size(); need > 0; --need) {
                out.push_back(members[rng.uniform_index(members.size())]);
            }
        }
        return out;
    }

    // Undersample: keep a seeded subset of each class, preserving input order.
    std::size_t target = train_indices.size();
    for (const auto& [label, members] : groups) target = std::min(target, members.size());
    std::unordered_set<std::size_t> kept;
    for (auto& [label, members] : groups) {
        shuffle_in_place(members, rng);
        kept.insert(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(target));
    }
    std::vector<std::size_t> out;
    out.reserve(kept.size());
    for (std::size_t i : train_indices) {
        if (kept.count(i)) out.push_back(i);
    }
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const std::vector<std::size_t>& indices, const std::vector<int>& labels, double fraction,
    std::uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0) throw EvalError("holdout fraction must be in [0,1)");
    auto groups = group_by_label(indices, labels);
    Rng rng(derive_seed(seed, "holdout"));
    std::unordered_set<std::size_t> held;
    for (auto& [label, members] : groups) {
        auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(members.size())));
        if (take == 0) continue;
        shuffle_in_place(members, rng);
        held.insert(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::vector<std::size_t> rest;
    std::vector<std::size_t> holdout;
    for (std::size_t i : indices) {
        (held.count(i) ? holdout : rest).push_back(i);
    }
    return {std::move(rest), std::move(holdout)};
}

EvalReport evaluate(const models::Model& model, const models::Dataset& ds,
                    const std::vector<std::size_t>& test_idx) {
    if (test_idx.empty()) throw EvalError("evaluate: empty test set");
    const int classes = model.config().classes;
    std::vector<int> preds = models::predict(model, ds, test_idx);

    EvalReport report;
    report.confusion.assign(static_cast<std::size_t>(classes),
                            std::vector<std::int64_t>(static_cast<std::size_t>(classes), 0));
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
        int truth = ds.labels.at(test_idx[i]);
        if (truth < 0 || truth >= classes) {
            throw EvalError("label " + std::to_string(truth) + " outside class range");
        }
        report.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(preds[i])]++;
        if (truth == preds[i]) ++correct;
    }
    double acc = static_cast<double>(correct) / static_cast<double>(test_idx.size());
    report.fold_accuracy = {acc};
    report.mean_accuracy = acc;
    report.recall.assign(static_cast<std::size_t>(classes), 0.0);
    for (int c = 0; c < classes; ++c) {
        std::int64_t row = 0;
        for (int p = 0; p < classes; ++p) row += report.confusion[c][p];
        report.recall[static_cast<std::size_t>(c)] =
            row > 0 ? static_cast<double>(report.confusion[c][c]) / static_cast<double>(row) : 0.0;
    }
    return report;
}

std::string to_string(FeatureSet fs) {
    switch (fs) {
        case FeatureSet::kSpatioTemporal: return "st";
        case FeatureSet::kVisual: return "visual";
        case FeatureSet::kMultimodal: return "multi";
    }
    throw EvalError("unknown feature set");
}

FeatureSet parse_feature_set(const std::string& name) {
    if (name == "st") return FeatureSet::kSpatioTemporal;
    if (name == "visual") return FeatureSet::kVisual;
    if (name == "multi") return FeatureSet::kMultimodal;
    throw EvalError("unknown feature set: " + name);
}

models::Dataset arrange(const RawFeatures& raw, models::ModelKind kind, FeatureSet fs,
                        bool swapped) {
    if (raw.xu.size() != raw.xv.size() || raw.xu.size() != raw.labels.size()) {
        throw EvalError("feature blocks and labels cover different cell counts");
    }
    if (swapped && !(kind != models::ModelKind::kFcn && fs == FeatureSet::kMultimodal)) {
        throw EvalError("swapped routing only applies to multimodal two-input models");
    }
    const std::size_t n = raw.xu.size();
    models::Dataset ds;
    ds.labels = raw.labels;
    ds.xu.reserve(n);

    if (kind == models::ModelKind::kFcn) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row;
            if (fs != FeatureSet::kVisual) row.insert(row.end(), raw.xu[i].begin(), raw.xu[i].end());
            if (fs != FeatureSet::kSpatioTemporal)
                row.insert(row.end(), raw.xv[i].begin(), raw.xv[i].end());
            ds.xu.push_back(std::move(row));
        }
        return ds;
    }

    const auto& first = fs == FeatureSet::kVisual ? raw.xv : raw.xu;
    const auto& second = fs == FeatureSet::kSpatioTemporal ? raw.xu : raw.xv;
    ds.xu = swapped ? second : first;
    ds.xv = swapped ? first : second;
    return ds;
}

CvResult cross_validate(const models::ModelConfig& model_cfg, const models::Dataset& ds,
                        const CvOptions& opts) {
    const std::size_t n = ds.size();
    FoldPlan plan = kfold_split(n, opts.k, ds.labels, derive_seed(opts.seed, "folds"));

    CvResult result;
    const int classes = model_cfg.classes;
    result.report.confusion.assign(static_cast<std::size_t>(classes),
                                   std::vector<std::int64_t>(static_cast<std::size_t>(classes), 0));

    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        std::vector<std::size_t> train_all;
        for (std::size_t g = 0; g < plan.folds.size(); ++g) {
            if (g == f) continue;
            train_all.insert(train_all.end(), plan.folds[g].begin(), plan.folds[g].end());
        }
        auto [rest, val] = stratified_holdout(train_all, ds.labels, opts.val_fraction,
                                              derive_seed(opts.seed, "val", f));
        std::vector<std::size_t> train_idx =
            rebalance(rest, ds.labels, derive_seed(opts.seed, "resample", f), opts.resample);

        models::Model model(model_cfg, derive_seed(opts.seed, "model", f));
        models::TrainConfig tc = opts.train;
        tc.seed = derive_seed(opts.seed, "train", f);
        result.fold_training.push_back(models::train(model, ds, train_idx, val, tc));

        EvalReport fold = evaluate(model, ds, plan.folds[f]);
        result.report.fold_accuracy.push_back(fold.mean_accuracy);
        for (int c = 0; c < classes; ++c) {
            for (int p = 0; p < classes; ++p) {
                result.report.confusion[c][p] += fold.confusion[c][p];
            }
        }
    }

    const auto& accs = result.report.fold_accuracy;
    result.report.mean_accuracy =
        std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
    result.report.recall.assign(static_cast<std::size_t>(classes), 0.0);
    for (int c = 0; c < classes; ++c) {
        std::int64_t row = 0;
        for (int p = 0; p < classes; ++p) row += result.report.confusion[c][p];
        result.report.recall[static_cast<std::size_t>(c)] =
            row > 0 ? static_cast<double>(result.report.confusion[c][c]) / static_cast<double>(row)
                    : 0.0;
    }
    return result;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw EvalError("cannot write " + path);
    out.precision(17);
    out << "metric,value\n";
    for (std::size_t f = 0; f < report.fold_accuracy.size(); ++f) {
        out << "fold" << f << "_accuracy," << report.fold_accuracy[f] << "\n";
    }
    out << "mean_accuracy," << report.mean_accuracy << "\n";
    for (std::size_t c = 0; c < report.recall.size(); ++c) {
        out << "recall_class" << c << "," << report.recall[c] << "\n";
    }
    for (std::size_t c = 0; c < report.confusion.size(); ++c) {
        for (std::size_t p = 0; p < report.confusion[c].size(); ++p) {
            out << "confusion_" << c << "_" << p << "," << report.confusion[c][p] << "\n";
        }
    }
    if (!out.good()) throw EvalError("failed while writing " + path);
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out.precision(4);
    out << "accuracy: " << report.mean_accuracy * 100.0 << "%";
    if (report.fold_accuracy.size() > 1) {
        out << " over " << report.fold_accuracy.size() << " folds (";
        for (std::size_t f = 0; f < report.fold_accuracy.size(); ++f) {
            if (f) out << ", ";
            out << report.fold_accuracy[f] * 100.0;
        }
        out << ")";
    }
    out << "\n";
    out << "recall:";
    for (double r : report.recall) out << " " << r * 100.0;
    out << "\n";
    out << "confusion (rows = true, cols = predicted):\n";
    for (const auto& row : report.confusion) {
        for (std::size_t p = 0; p < row.size(); ++p) {
            out << (p ? "\t" : "  ") << row[p];
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace riskgrid::eval
