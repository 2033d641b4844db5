#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgrid/rng.hpp"

namespace riskgrid::ad {

class AutodiffError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix; vectors are n x 1, scalars 1 x 1.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    static Tensor column(const std::vector<double>& values);
    static Tensor scalar(double value);

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
    std::string shape_str() const;
};

/// Raises AutodiffError when the tensor holds a NaN or infinity.
void check_finite(const Tensor& t, const std::string& where);

/// Seeded uniform initialization in +-sqrt(6 / (rows + cols)).
Tensor xavier_init(int rows, int cols, std::uint64_t seed);

/// Eager reverse-mode tape. Every op evaluates immediately and records how
/// to push gradients back to its inputs; backward() walks the tape in
/// reverse creation order. Dropout masks are drawn from the graph's own
/// generator, so a (training, seed) pair fixes the whole evaluation.
class Graph {
public:
    explicit Graph(bool training = false, std::uint64_t seed = 0);
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    int leaf(Tensor value, bool needs_grad = false);

    int matmul(int a, int b);
    int add(int a, int b);
    int mul(int a, int b);  // elementwise
    int relu(int x);
    int log(int x);  // elementwise natural log; rejects non-positive entries
    int softmax(int x);  // column-wise
    int diag_embed(int x);
    int concat_rows(int a, int b);
    int dropout(int x, double rate);
    int scale(int x, double factor);
    int l1_normalize_columns(int x);
    /// Mean over columns of -log(probs[label]), entries clamped to [1e-7, 1].
    int cross_entropy(int probs, const std::vector<int>& labels);
    /// Single entry of a column as a 1x1 scalar node.
    int pick(int x, int row, int col);

    const Tensor& value(int id) const { return nodes_[id].val; }
    const Tensor& grad(int id) const;
    bool training() const { return training_; }
    int size() const { return static_cast<int>(nodes_.size()); }

    /// Reverse sweep from a scalar node; gradients accumulate on every
    /// needs_grad node reachable from it.
    void backward(int loss);

private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool needs_grad = false;
        std::function<void()> back;
    };

    int push(Tensor val, bool needs_grad, std::function<void()> back);
    Tensor& grad_ref(int id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
    bool training_ = false;
    Rng rng_;
};

inline constexpr double kCrossEntropyClamp = 1e-7;

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction over a fixed parameter list. The tensors are
/// borrowed; moments are kept in step with their parameter shapes.
class Adam {
public:
    Adam(AdamConfig cfg, std::vector<Tensor*> params);

    /// One update; grads must parallel the parameter list. A NaN gradient
    /// raises "diverged".
    void step(const std::vector<Tensor>& grads);

    std::int64_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::vector<Tensor*> params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::int64_t t_ = 0;
};

}  // namespace riskgrid::ad
