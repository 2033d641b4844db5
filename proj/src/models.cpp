#include "riskgrid/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>

#include <nlohmann/json.hpp>

#include "riskgrid/rng.hpp"

namespace riskgrid::models {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::kFcn: return "fcn";
        case ModelKind::kFeatureDfnn: return "feature-dfnn";
        case ModelKind::kModelCnne: return "model-cnne";
        case ModelKind::kModelDfnn: return "model-dfnn";
    }
    throw ModelError("unknown model kind");
}

ModelKind parse_model_kind(const std::string& name) {
    if (name == "fcn") return ModelKind::kFcn;
    if (name == "feature-dfnn") return ModelKind::kFeatureDfnn;
    if (name == "model-cnne") return ModelKind::kModelCnne;
    if (name == "model-dfnn") return ModelKind::kModelDfnn;
    throw ModelError("unknown model kind: " + name);
}

namespace {

void validate_config(const ModelConfig& cfg) {
    bool two_input = cfg.kind != ModelKind::kFcn;
    if (cfg.dim_u <= 0) throw ModelError("dim_u must be positive");
    if (two_input && cfg.dim_v <= 0) throw ModelError("dim_v must be positive");
    if (cfg.classes < 2) throw ModelError("need at least two classes");
    if (cfg.hidden <= 0 || cfg.dz <= 0 || cfg.dz_gate_u <= 0 || cfg.dz_gate_v <= 0 ||
        cfg.gate_hidden <= 0)
        throw ModelError("layer widths must be positive");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) throw ModelError("dropout outside [0,1)");
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    validate_config(cfg_);
    auto emit = [&](const std::string& name, int rows, int cols) {
        params_.push_back({name, ad::xavier_init(rows, cols, derive_seed(seed, name))});
    };
    const int c = cfg_.classes;
    switch (cfg_.kind) {
        case ModelKind::kFcn:
            emit("w1", cfg_.hidden, cfg_.dim_u);
            emit("ws", cfg_.hidden, cfg_.hidden);
            emit("w2", c, cfg_.hidden);
            break;
        case ModelKind::kFeatureDfnn:
            emit("w1", cfg_.hidden, cfg_.dim_u);
            emit("wz", cfg_.dz, cfg_.dim_v);
            emit("p", cfg_.hidden, cfg_.dz);
            emit("q", cfg_.dz, cfg_.hidden);
            emit("w2", c, cfg_.hidden);
            break;
        case ModelKind::kModelCnne:
            emit("u.w1", cfg_.hidden, cfg_.dim_u);
            emit("u.w2", c, cfg_.hidden);
            emit("v.w1", cfg_.hidden, cfg_.dim_v);
            emit("v.w2", c, cfg_.hidden);
            emit("gate_u.w1", cfg_.gate_hidden, cfg_.dim_u + c);
            emit("gate_u.w2", c, cfg_.gate_hidden);
            emit("gate_v.w1", cfg_.gate_hidden, cfg_.dim_v + c);
            emit("gate_v.w2", c, cfg_.gate_hidden);
            break;
        case ModelKind::kModelDfnn:
            emit("u.w1", cfg_.hidden, cfg_.dim_u);
            emit("u.w2", c, cfg_.hidden);
            emit("v.w1", cfg_.hidden, cfg_.dim_v);
            emit("v.w2", c, cfg_.hidden);
            emit("gate_u.wz", cfg_.dz_gate_u, cfg_.dim_u + c);
            emit("gate_u.p", c, cfg_.dz_gate_u);
            emit("gate_u.q", cfg_.dz_gate_u, cfg_.dim_u + c);
            emit("gate_v.wz", cfg_.dz_gate_v, cfg_.dim_v + c);
            emit("gate_v.p", c, cfg_.dz_gate_v);
            emit("gate_v.q", cfg_.dz_gate_v, cfg_.dim_v + c);
            break;
    }
}

std::int64_t Model::param_count() const {
    std::int64_t n = 0;
    for (const Parameter& p : params_) n += static_cast<std::int64_t>(p.value.size());
    return n;
}

std::vector<ad::Tensor> Model::snapshot() const {
    std::vector<ad::Tensor> snap;
    snap.reserve(params_.size());
    for (const Parameter& p : params_) snap.push_back(p.value);
    return snap;
}

void Model::restore(const std::vector<ad::Tensor>& snap) {
    if (snap.size() != params_.size()) throw ModelError("snapshot does not match parameter list");
    for (std::size_t i = 0; i < snap.size(); ++i) {
        if (!snap[i].same_shape(params_[i].value))
            throw ModelError("snapshot shape mismatch at " + params_[i].name);
        params_[i].value = snap[i];
    }
}

namespace {

struct ParamNodes {
    std::vector<int> ids;
    const std::vector<Parameter>* params;

    int operator()(const std::string& name) const {
        for (std::size_t i = 0; i < params->size(); ++i)
            if ((*params)[i].name == name) return ids[i];
        throw ModelError("no parameter named " + name);
    }
};

ParamNodes bind_params(ad::Graph& g, const std::vector<Parameter>& params) {
    ParamNodes pn;
    pn.params = &params;
    pn.ids.reserve(params.size());
    for (const Parameter& p : params) pn.ids.push_back(g.leaf(p.value, true));
    return pn;
}

// (x - mean) * inv_sd as tape ops, so gradients keep flowing to the raw leaf.
int standardize(ad::Graph& g, int x, const Standardizer& s, int rows, int cols) {
    if (!s.active()) return x;
    if (static_cast<int>(s.mean.size()) != rows)
        throw ModelError("standardizer dimension mismatch");
    ad::Tensor ones(1, cols);
    std::fill(ones.v.begin(), ones.v.end(), 1.0);
    std::vector<double> neg_mean(s.mean.size());
    for (std::size_t i = 0; i < s.mean.size(); ++i) neg_mean[i] = -s.mean[i];
    int ones_node = g.leaf(ones);
    int centered = g.add(x, g.matmul(g.leaf(ad::Tensor::column(neg_mean)), ones_node));
    return g.mul(centered, g.matmul(g.leaf(ad::Tensor::column(s.inv_sd)), ones_node));
}

}  // namespace

Standardizer fit_standardizer(const std::vector<std::vector<double>>& columns,
                              const std::vector<std::size_t>& rows) {
    Standardizer s;
    if (rows.empty() || columns.empty() || columns[rows[0]].empty()) return s;
    const std::size_t dim = columns[rows[0]].size();
    s.mean.assign(dim, 0.0);
    s.inv_sd.assign(dim, 1.0);
    for (std::size_t r : rows) {
        if (columns[r].size() != dim) throw ModelError("ragged feature table");
        for (std::size_t i = 0; i < dim; ++i) s.mean[i] += columns[r][i];
    }
    for (double& m : s.mean) m /= static_cast<double>(rows.size());
    std::vector<double> var(dim, 0.0);
    for (std::size_t r : rows)
        for (std::size_t i = 0; i < dim; ++i) {
            double d = columns[r][i] - s.mean[i];
            var[i] += d * d;
        }
    for (std::size_t i = 0; i < dim; ++i) {
        double sd = std::sqrt(var[i] / static_cast<double>(rows.size()));
        if (sd > 1e-12) s.inv_sd[i] = 1.0 / sd;
    }
    return s;
}

void Model::set_standardizer(Standardizer u, Standardizer v) {
    if (u.active() && static_cast<int>(u.mean.size()) != cfg_.dim_u)
        throw ModelError("standardizer dimension mismatch for the first input");
    int dv = cfg_.kind == ModelKind::kFcn ? 0 : cfg_.dim_v;
    if (v.active() && static_cast<int>(v.mean.size()) != dv)
        throw ModelError("standardizer dimension mismatch for the second input");
    std_u_ = std::move(u);
    std_v_ = std::move(v);
}

Forward Model::forward(ad::Graph& g, const Batch& batch, bool input_grads) const {
    switch (cfg_.kind) {
        case ModelKind::kFcn: return forward_fcn(g, batch, input_grads);
        case ModelKind::kFeatureDfnn: return forward_feature(g, batch, input_grads);
        case ModelKind::kModelCnne:
        case ModelKind::kModelDfnn: return forward_ensemble(g, batch, input_grads);
    }
    throw ModelError("unknown model kind");
}

Forward Model::forward_fcn(ad::Graph& g, const Batch& b, bool input_grads) const {
    ParamNodes pn = bind_params(g, params_);
    Forward f;
    f.param_nodes = pn.ids;
    f.xu_node = g.leaf(b.xu, input_grads);
    int xu = standardize(g, f.xu_node, std_u_, b.xu.rows, b.xu.cols);
    int h1 = g.dropout(g.relu(g.matmul(pn("w1"), xu)), cfg_.dropout);
    int h2 = g.dropout(g.relu(g.matmul(pn("ws"), h1)), cfg_.dropout);
    f.logits = g.matmul(pn("w2"), h2);
    f.score = f.logits;
    f.output = g.softmax(f.logits);
    if (!b.labels.empty()) f.loss = g.cross_entropy(f.output, b.labels);
    return f;
}

Forward Model::forward_feature(ad::Graph& g, const Batch& b, bool input_grads) const {
    ParamNodes pn = bind_params(g, params_);
    Forward f;
    f.param_nodes = pn.ids;
    f.xu_node = g.leaf(b.xu, input_grads);
    f.xv_node = g.leaf(b.xv, input_grads);
    int xu = standardize(g, f.xu_node, std_u_, b.xu.rows, b.xu.cols);
    int xv = standardize(g, f.xv_node, std_v_, b.xv.rows, b.xv.cols);
    int h1 = g.dropout(g.relu(g.matmul(pn("w1"), xu)), cfg_.dropout);
    int z = g.relu(g.matmul(pn("wz"), xv));
    int gated = g.mul(z, g.matmul(pn("q"), h1));
    int h2 = g.dropout(g.relu(g.matmul(pn("p"), gated)), cfg_.dropout);
    f.logits = g.matmul(pn("w2"), h2);
    f.score = f.logits;
    f.output = g.softmax(f.logits);
    if (!b.labels.empty()) f.loss = g.cross_entropy(f.output, b.labels);
    return f;
}

Forward Model::forward_ensemble(ad::Graph& g, const Batch& b, bool input_grads) const {
    ParamNodes pn = bind_params(g, params_);
    Forward f;
    f.param_nodes = pn.ids;
    f.xu_node = g.leaf(b.xu, input_grads);
    f.xv_node = g.leaf(b.xv, input_grads);
    int xu = standardize(g, f.xu_node, std_u_, b.xu.rows, b.xu.cols);
    int xv = standardize(g, f.xv_node, std_v_, b.xv.rows, b.xv.cols);

    int hu = g.dropout(g.relu(g.matmul(pn("u.w1"), xu)), cfg_.dropout);
    f.branch_u = g.softmax(g.matmul(pn("u.w2"), hu));
    int hv = g.dropout(g.relu(g.matmul(pn("v.w1"), xv)), cfg_.dropout);
    f.branch_v = g.softmax(g.matmul(pn("v.w2"), hv));

    int xhu = g.concat_rows(xu, f.branch_u);
    int xhv = g.concat_rows(xv, f.branch_v);

    int su, sv;
    if (cfg_.kind == ModelKind::kModelCnne) {
        int gu = g.dropout(g.relu(g.matmul(pn("gate_u.w1"), xhu)), cfg_.dropout);
        su = g.matmul(pn("gate_u.w2"), gu);
        int gv = g.dropout(g.relu(g.matmul(pn("gate_v.w1"), xhv)), cfg_.dropout);
        sv = g.matmul(pn("gate_v.w2"), gv);
    } else {
        int zu = g.relu(g.matmul(pn("gate_u.wz"), xhu));
        su = g.matmul(pn("gate_u.p"), g.mul(zu, g.matmul(pn("gate_u.q"), xhu)));
        int zv = g.relu(g.matmul(pn("gate_v.wz"), xhv));
        sv = g.matmul(pn("gate_v.p"), g.mul(zv, g.matmul(pn("gate_v.q"), xhv)));
    }
    int wu = g.softmax(su);
    int wv = g.softmax(sv);

    int combo = g.add(g.mul(wu, f.branch_u), g.mul(wv, f.branch_v));
    f.output = cfg_.renormalize ? g.l1_normalize_columns(combo) : combo;
    f.score = g.log(f.output);
    if (!b.labels.empty()) {
        int loss_v = g.cross_entropy(f.branch_v, b.labels);
        int loss_u = g.cross_entropy(f.branch_u, b.labels);
        int loss_o = g.cross_entropy(f.output, b.labels);
        f.loss = g.add(g.add(loss_v, loss_u), loss_o);
    }
    return f;
}

// --- Low-rank hypernetwork primitives ---------------------------------------

ad::Tensor hypernet_matrix(const std::vector<double>& x, const HypernetParams& params) {
    ad::Graph g;
    int xn = g.leaf(ad::Tensor::column(x));
    int z = g.relu(g.matmul(g.leaf(params.wz), xn));
    int w = g.matmul(g.leaf(params.p), g.matmul(g.diag_embed(z), g.leaf(params.q)));
    return g.value(w);
}

std::vector<double> hypernet_vector(const std::vector<double>& x, const HypernetParams& params) {
    ad::Graph g;
    int xn = g.leaf(ad::Tensor::column(x));
    int z = g.relu(g.matmul(g.leaf(params.wz), xn));
    int v = g.matmul(g.leaf(params.p), g.mul(z, g.matmul(g.leaf(params.q), xn)));
    return g.value(v).v;
}

std::int64_t hypernet_param_count(int d_in, int dz, int rows, int cols) {
    return static_cast<std::int64_t>(dz) * d_in + static_cast<std::int64_t>(rows) * dz +
           static_cast<std::int64_t>(dz) * cols;
}

std::int64_t dense_hypernet_param_count(int d_in, int rows, int cols) {
    return static_cast<std::int64_t>(d_in) * rows * cols;
}

// --- Training ----------------------------------------------------------------

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices, bool with_labels) {
    if (indices.empty()) throw ModelError("empty batch");
    const int n = static_cast<int>(indices.size());
    const int du = static_cast<int>(ds.xu.at(indices[0]).size());
    const int dv = ds.xv.empty() ? 0 : static_cast<int>(ds.xv.at(indices[0]).size());

    Batch b;
    b.xu = ad::Tensor(du, n);
    b.xv = ad::Tensor(dv, n);
    for (int j = 0; j < n; ++j) {
        const std::vector<double>& u = ds.xu.at(indices[j]);
        if (static_cast<int>(u.size()) != du) throw ModelError("ragged feature rows");
        for (int i = 0; i < du; ++i) b.xu.at(i, j) = u[i];
        if (dv > 0) {
            const std::vector<double>& v = ds.xv.at(indices[j]);
            if (static_cast<int>(v.size()) != dv) throw ModelError("ragged feature rows");
            for (int i = 0; i < dv; ++i) b.xv.at(i, j) = v[i];
        }
    }
    if (with_labels) {
        b.labels.reserve(indices.size());
        for (std::size_t idx : indices) b.labels.push_back(ds.labels.at(idx));
    }
    return b;
}

int argmax_lowest(const std::vector<double>& scores) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

std::vector<std::vector<double>> predict_proba(const Model& model, const Dataset& ds,
                                               const std::vector<std::size_t>& indices) {
    Batch b = make_batch(ds, indices, false);
    ad::Graph g;
    Forward f = model.forward(g, b);
    const ad::Tensor& out = g.value(f.output);
    std::vector<std::vector<double>> probs(indices.size(), std::vector<double>(out.rows));
    for (int j = 0; j < out.cols; ++j)
        for (int i = 0; i < out.rows; ++i) probs[j][i] = out.at(i, j);
    return probs;
}

std::vector<int> predict(const Model& model, const Dataset& ds,
                         const std::vector<std::size_t>& indices) {
    std::vector<std::vector<double>> probs = predict_proba(model, ds, indices);
    std::vector<int> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = argmax_lowest(probs[i]);
    return out;
}

namespace {

double accuracy(const Model& model, const Dataset& ds, const std::vector<std::size_t>& indices) {
    std::vector<int> pred = predict(model, ds, indices);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < indices.size(); ++i)
        if (pred[i] == ds.labels.at(indices[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(indices.size());
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
}

}  // namespace

TrainResult train(Model& model, const Dataset& ds, const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const TrainConfig& cfg) {
    if (train_idx.empty()) throw ModelError("empty training set");
    if (cfg.batch < 1 || cfg.max_epochs < 1 || cfg.patience < 1)
        throw ModelError("train config values must be positive");
    if (cfg.patience >= cfg.max_epochs)
        throw ModelError("patience must be smaller than max_epochs");

    Standardizer su = fit_standardizer(ds.xu, train_idx);
    Standardizer sv = model.config().kind == ModelKind::kFcn
                          ? Standardizer{}
                          : fit_standardizer(ds.xv, train_idx);
    model.set_standardizer(std::move(su), std::move(sv));

    std::vector<ad::Tensor*> param_ptrs;
    for (Parameter& p : model.parameters()) param_ptrs.push_back(&p.value);
    ad::Adam adam({.lr = cfg.lr}, param_ptrs);

    const std::vector<std::size_t>& monitor = val_idx.empty() ? train_idx : val_idx;

    TrainResult res;
    std::vector<ad::Tensor> best = model.snapshot();
    std::vector<ad::Tensor> last_finite = model.snapshot();
    double best_acc = -1.0;
    int best_epoch = 0;

    std::vector<std::size_t> order = train_idx;
    std::uint64_t step = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_indices(order, shuffle_rng);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            std::size_t stop = std::min(order.size(), start + cfg.batch);
            std::vector<std::size_t> slice(order.begin() + start, order.begin() + stop);
            Batch b = make_batch(ds, slice, true);

            ad::Graph g(true, derive_seed(cfg.seed, "dropout", step));
            Forward f = model.forward(g, b);
            double batch_loss = g.value(f.loss).v[0];
            if (!std::isfinite(batch_loss)) {
                model.restore(last_finite);
                throw ModelError("diverged: non-finite loss at epoch " + std::to_string(epoch));
            }
            g.backward(f.loss);

            std::vector<ad::Tensor> grads;
            grads.reserve(f.param_nodes.size());
            for (int id : f.param_nodes) grads.push_back(g.grad(id));
            try {
                adam.step(grads);
            } catch (const ad::AutodiffError& e) {
                model.restore(last_finite);
                throw ModelError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
            }
            loss_sum += batch_loss * static_cast<double>(slice.size());
            ++step;
        }

        double val_acc = accuracy(model, ds, monitor);
        res.history.push_back(
            {epoch, loss_sum / static_cast<double>(order.size()), val_acc});
        last_finite = model.snapshot();

        if (val_acc > best_acc) {
            best_acc = val_acc;
            best_epoch = epoch;
            best = model.snapshot();
        } else if (epoch - best_epoch >= cfg.patience) {
            break;
        }
    }

    model.restore(best);
    res.best_epoch = best_epoch;
    res.best_val_accuracy = best_acc;
    return res;
}

// --- Checkpointing -----------------------------------------------------------

namespace {

template <typename T>
void write_pod(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw ModelError("truncated checkpoint");
    return value;
}

constexpr char kMagic[] = "RGMODEL1";

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelError("cannot write checkpoint: " + path);

    const ModelConfig& cfg = model.config();
    nlohmann::json manifest{
        {"kind", to_string(cfg.kind)},
        {"dim_u", cfg.dim_u},
        {"dim_v", cfg.dim_v},
        {"classes", cfg.classes},
        {"hidden", cfg.hidden},
        {"dz", cfg.dz},
        {"dz_gate_u", cfg.dz_gate_u},
        {"dz_gate_v", cfg.dz_gate_v},
        {"gate_hidden", cfg.gate_hidden},
        {"dropout", cfg.dropout},
        {"renormalize", cfg.renormalize},
        {"tensors", model.parameters().size()},
    };
    if (model.standardizer_u().active())
        manifest["scale_u"] = {{"mean", model.standardizer_u().mean},
                               {"inv_sd", model.standardizer_u().inv_sd}};
    if (model.standardizer_v().active())
        manifest["scale_v"] = {{"mean", model.standardizer_v().mean},
                               {"inv_sd", model.standardizer_v().inv_sd}};
    std::string text = manifest.dump();

    out.write(kMagic, sizeof(kMagic) - 1);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const Parameter& p : model.parameters()) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_pod<std::int32_t>(out, p.value.rows);
        write_pod<std::int32_t>(out, p.value.cols);
        out.write(reinterpret_cast<const char*>(p.value.v.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!out) throw ModelError("write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot read checkpoint: " + path);

    char magic[sizeof(kMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw ModelError("not a model checkpoint: " + path);

    auto manifest_len = read_pod<std::uint32_t>(in);
    std::string text(manifest_len, '\0');
    in.read(text.data(), manifest_len);
    if (!in) throw ModelError("truncated checkpoint");
    nlohmann::json manifest = nlohmann::json::parse(text);

    ModelConfig cfg;
    cfg.kind = parse_model_kind(manifest.at("kind").get<std::string>());
    cfg.dim_u = manifest.at("dim_u").get<int>();
    cfg.dim_v = manifest.at("dim_v").get<int>();
    cfg.classes = manifest.at("classes").get<int>();
    cfg.hidden = manifest.at("hidden").get<int>();
    cfg.dz = manifest.at("dz").get<int>();
    cfg.dz_gate_u = manifest.at("dz_gate_u").get<int>();
    cfg.dz_gate_v = manifest.at("dz_gate_v").get<int>();
    cfg.gate_hidden = manifest.at("gate_hidden").get<int>();
    cfg.dropout = manifest.at("dropout").get<double>();
    cfg.renormalize = manifest.at("renormalize").get<bool>();

    Model model(cfg, 0);
    Standardizer su, sv;
    if (manifest.contains("scale_u")) {
        manifest["scale_u"].at("mean").get_to(su.mean);
        manifest["scale_u"].at("inv_sd").get_to(su.inv_sd);
    }
    if (manifest.contains("scale_v")) {
        manifest["scale_v"].at("mean").get_to(sv.mean);
        manifest["scale_v"].at("inv_sd").get_to(sv.inv_sd);
    }
    model.set_standardizer(std::move(su), std::move(sv));
    auto tensor_count = manifest.at("tensors").get<std::size_t>();
    if (tensor_count != model.parameters().size())
        throw ModelError("checkpoint tensor count does not match the model");

    for (Parameter& p : model.parameters()) {
        auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        auto rows = read_pod<std::int32_t>(in);
        auto cols = read_pod<std::int32_t>(in);
        if (!in || name != p.name || rows != p.value.rows || cols != p.value.cols)
            throw ModelError("checkpoint tensor " + name + " does not match parameter " + p.name);
        in.read(reinterpret_cast<char*>(p.value.v.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(double)));
        if (!in) throw ModelError("truncated checkpoint");
        ad::check_finite(p.value, "checkpoint " + p.name);
    }
    return model;
}

void write_history_csv(const TrainResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write history: " + path);
    out << "epoch,train_loss,val_accuracy\n";
    out << std::setprecision(17);
    for (const EpochStats& e : result.history)
        out << e.epoch << ',' << e.train_loss << ',' << e.val_accuracy << '\n';
}

}  // namespace riskgrid::models
