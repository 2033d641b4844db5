#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskgrid/autodiff.hpp"

namespace riskgrid::models {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind {
    kFcn,          // static 3-layer classifier
    kFeatureDfnn,  // classifier whose middle weights come from a hypernetwork
    kModelCnne,    // two-branch ensemble, plain MLP weighting heads
    kModelDfnn,    // two-branch ensemble, low-rank hypernetwork weighting heads
};

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct ModelConfig {
    ModelKind kind = ModelKind::kFeatureDfnn;
    int dim_u = 71;  // first input width (trunk / branch u); the only input for FCN
    int dim_v = 53;  // second input width (hypernetwork / branch v); 0 for FCN
    int classes = 3;
    int hidden = 64;       // classifier hidden width (= dynamic block size d)
    int dz = 64;           // hypernetwork bottleneck for the feature-level model
    int dz_gate_u = 32;    // ensemble weighting-head bottlenecks
    int dz_gate_v = 64;
    int gate_hidden = 64;  // hidden width of the plain-MLP weighting heads
    double dropout = 0.4;
    bool renormalize = true;  // rescale the combined ensemble output to sum 1
};

struct Parameter {
    std::string name;
    ad::Tensor value;
};

/// One column per sample.
struct Batch {
    ad::Tensor xu;
    ad::Tensor xv;            // ignored by FCN
    std::vector<int> labels;  // empty for pure prediction
};

/// Node handles into the graph that produced them.
struct Forward {
    int output = -1;    // class probabilities, C x N
    int logits = -1;    // pre-softmax scores of the (primary) head; -1 for ensembles
    int score = -1;     // attribution target: logits, or log(output) for ensembles
    int loss = -1;      // scalar; -1 when the batch carries no labels
    int branch_u = -1;  // ensemble branch probabilities
    int branch_v = -1;
    int xu_node = -1;   // input leaves
    int xv_node = -1;
    std::vector<int> param_nodes;  // leaf per parameter, in parameters() order
};

/// Per-dimension affine input transform (x - mean) * inv_sd, fitted on the
/// training split and frozen into the model. Empty vectors mean identity.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> inv_sd;

    bool active() const { return !mean.empty(); }
};

/// Mean / inverse-stddev per dimension over the given column vectors.
/// Dimensions with (near-)zero spread get inv_sd = 1 so they pass through.
Standardizer fit_standardizer(const std::vector<std::vector<double>>& columns,
                              const std::vector<std::size_t>& rows);

class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    std::vector<Parameter>& parameters() { return params_; }
    const std::vector<Parameter>& parameters() const { return params_; }
    std::int64_t param_count() const;

    /// Input scaling applied inside forward(); gradients still reach the raw
    /// input leaves, so attribution stays in raw feature units.
    void set_standardizer(Standardizer u, Standardizer v);
    const Standardizer& standardizer_u() const { return std_u_; }
    const Standardizer& standardizer_v() const { return std_v_; }

    /// Build the forward pass on the given tape. Dropout fires only when the
    /// graph is in training mode. `input_grads` marks the input leaves as
    /// gradient-tracked (for attribution).
    Forward forward(ad::Graph& g, const Batch& batch, bool input_grads = false) const;

    /// Snapshot / restore of all parameter values (early stopping support).
    std::vector<ad::Tensor> snapshot() const;
    void restore(const std::vector<ad::Tensor>& snap);

private:
    Forward forward_fcn(ad::Graph& g, const Batch& b, bool input_grads) const;
    Forward forward_feature(ad::Graph& g, const Batch& b, bool input_grads) const;
    Forward forward_ensemble(ad::Graph& g, const Batch& b, bool input_grads) const;

    ModelConfig cfg_;
    std::vector<Parameter> params_;
    Standardizer std_u_;
    Standardizer std_v_;
};

// --- Low-rank hypernetwork primitives ---------------------------------------

struct HypernetParams {
    ad::Tensor wz;  // D_z x D_in
    ad::Tensor p;   // rows x D_z
    ad::Tensor q;   // D_z x cols
};

/// W(x) = P * Diag(relu(Wz x)) * Q, the dynamically generated weight matrix.
ad::Tensor hypernet_matrix(const std::vector<double>& x, const HypernetParams& params);

/// v = P * (relu(Wz x) ⊙ (Q x)) — the low-rank map applied to its own input,
/// producing one score per class (pre-softmax).
std::vector<double> hypernet_vector(const std::vector<double>& x, const HypernetParams& params);

/// Learnable scalars in a low-rank hypernetwork emitting a rows x cols matrix
/// from a D_in input through bottleneck D_z.
std::int64_t hypernet_param_count(int d_in, int dz, int rows, int cols);

/// Learnable scalars in the naive alternative: one dense layer mapping the
/// D_in input straight to all rows x cols entries.
std::int64_t dense_hypernet_param_count(int d_in, int rows, int cols);

// --- Training ----------------------------------------------------------------

struct TrainConfig {
    double lr = 1e-3;
    int batch = 32;
    int max_epochs = 128;
    int patience = 16;
    std::uint64_t seed = 0;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_accuracy = 0.0;
};

/// Feature rows per cell, already arranged for the model (xu = first input,
/// xv = second input).
struct Dataset {
    std::vector<std::vector<double>> xu;
    std::vector<std::vector<double>> xv;
    std::vector<int> labels;

    std::size_t size() const { return xu.size(); }
};

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices, bool with_labels);

/// Mini-batch Adam with per-epoch shuffling, early stopping on validation
/// accuracy, and best-weights restore. `train_idx` should already be
/// class-rebalanced by the caller; `val_idx` is the held-out monitor set
/// (falls back to monitoring the training set when empty). A non-finite
/// loss rolls the parameters back to the last finite epoch snapshot and
/// raises "diverged".
TrainResult train(Model& model, const Dataset& ds, const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const TrainConfig& cfg);

/// Argmax predictions (ties broken toward the lowest class index).
std::vector<int> predict(const Model& model, const Dataset& ds,
                         const std::vector<std::size_t>& indices);

std::vector<std::vector<double>> predict_proba(const Model& model, const Dataset& ds,
                                               const std::vector<std::size_t>& indices);

int argmax_lowest(const std::vector<double>& scores);

// --- Checkpointing -----------------------------------------------------------

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

void write_history_csv(const TrainResult& result, const std::string& path);

}  // namespace riskgrid::models
