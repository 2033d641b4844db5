#include "riskgrid/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace riskgrid::ad {

namespace {

// C(m x n) (+)= A(m x k) * B(k x n)
void mm_nn(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a_row = A + static_cast<std::size_t>(i) * k;
        double* c_row = C + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double a = a_row[p];
            if (a == 0.0) continue;
            const double* b_row = B + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

// C(m x n) += A(m x k) * B(n x k)^T
void mm_nt(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a_row = A + static_cast<std::size_t>(i) * k;
        double* c_row = C + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* b_row = B + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
            c_row[j] += acc;
        }
    }
}

// C(k x n) += A(m x k)^T * B(m x n)
void mm_tn(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a_row = A + static_cast<std::size_t>(i) * k;
        const double* b_row = B + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double a = a_row[p];
            if (a == 0.0) continue;
            double* c_row = C + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

[[noreturn]] void shape_fail(const std::string& op, const Tensor& a, const Tensor& b) {
    throw AutodiffError(op + ": shape mismatch (" + a.shape_str() + " vs " + b.shape_str() + ")");
}

}  // namespace

Tensor Tensor::column(const std::vector<double>& values) {
    Tensor t(static_cast<int>(values.size()), 1);
    t.v = values;
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t(1, 1);
    t.v[0] = value;
    return t;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << rows << 'x' << cols;
    return os.str();
}

void check_finite(const Tensor& t, const std::string& where) {
    for (double x : t.v)
        if (!std::isfinite(x)) throw AutodiffError(where + ": non-finite value");
}

Tensor xavier_init(int rows, int cols, std::uint64_t seed) {
    Tensor t(rows, cols);
    Rng rng(seed);
    double bound = std::sqrt(6.0 / (rows + cols));
    for (double& x : t.v) x = rng.uniform(-bound, bound);
    return t;
}

Graph::Graph(bool training, std::uint64_t seed) : training_(training), rng_(seed) {}

int Graph::push(Tensor val, bool needs_grad, std::function<void()> back) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = needs_grad;
    if (needs_grad) n.grad = Tensor(n.val.rows, n.val.cols);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Graph::leaf(Tensor value, bool needs_grad) {
    check_finite(value, "leaf");
    return push(std::move(value), needs_grad, nullptr);
}

const Tensor& Graph::grad(int id) const {
    if (!nodes_[id].needs_grad) throw AutodiffError("grad requested for a non-tracked node");
    return nodes_[id].grad;
}

int Graph::matmul(int a, int b) {
    const Tensor& A = nodes_[a].val;
    const Tensor& B = nodes_[b].val;
    if (A.cols != B.rows) shape_fail("matmul", A, B);
    Tensor C(A.rows, B.cols);
    mm_nn(A.v.data(), B.v.data(), C.v.data(), A.rows, A.cols, B.cols);
    bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
    int id = push(std::move(C), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, a, b, id] {
            const Tensor& g = nodes_[id].grad;
            const Tensor& Av = nodes_[a].val;
            const Tensor& Bv = nodes_[b].val;
            if (nodes_[a].needs_grad)
                mm_nt(g.v.data(), Bv.v.data(), nodes_[a].grad.v.data(), g.rows, g.cols, Av.cols);
            if (nodes_[b].needs_grad)
                mm_tn(Av.v.data(), g.v.data(), nodes_[b].grad.v.data(), Av.rows, Av.cols, g.cols);
        };
    return id;
}

int Graph::add(int a, int b) {
    const Tensor& A = nodes_[a].val;
    const Tensor& B = nodes_[b].val;
    if (!A.same_shape(B)) shape_fail("add", A, B);
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.v[i] += B.v[i];
    bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
    int id = push(std::move(C), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, a, b, id] {
            const Tensor& g = nodes_[id].grad;
            if (nodes_[a].needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) nodes_[a].grad.v[i] += g.v[i];
            if (nodes_[b].needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) nodes_[b].grad.v[i] += g.v[i];
        };
    return id;
}

int Graph::mul(int a, int b) {
    const Tensor& A = nodes_[a].val;
    const Tensor& B = nodes_[b].val;
    if (!A.same_shape(B)) shape_fail("mul", A, B);
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.v[i] *= B.v[i];
    bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
    int id = push(std::move(C), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, a, b, id] {
            const Tensor& g = nodes_[id].grad;
            if (nodes_[a].needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i)
                    nodes_[a].grad.v[i] += g.v[i] * nodes_[b].val.v[i];
            if (nodes_[b].needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i)
                    nodes_[b].grad.v[i] += g.v[i] * nodes_[a].val.v[i];
        };
    return id;
}

int Graph::relu(int x) {
    Tensor C = nodes_[x].val;
    for (double& v : C.v) v = v > 0.0 ? v : 0.0;
    bool ng = nodes_[x].needs_grad;
    int id = push(std::move(C), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, x, id] {
            const Tensor& g = nodes_[id].grad;
            const Tensor& in = nodes_[x].val;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (in.v[i] > 0.0) nodes_[x].grad.v[i] += g.v[i];
        };
    return id;
}

int Graph::log(int x) {
    Tensor C = nodes_[x].val;
    for (double& v : C.v) {
        if (v <= 0.0) throw AutodiffError("log: non-positive input");
        v = std::log(v);
    }
    bool ng = nodes_[x].needs_grad;
    int id = push(std::move(C), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, x, id] {
            const Tensor& g = nodes_[id].grad;
            const Tensor& in = nodes_[x].val;
            for (std::size_t i = 0; i < g.size(); ++i) nodes_[x].grad.v[i] += g.v[i] / in.v[i];
        };
    return id;
}

int Graph::softmax(int x) {
    const Tensor& X = nodes_[x].val;
    Tensor Y(X.rows, X.cols);
    for (int j = 0; j < X.cols; ++j) {
        double mx = X.at(0, j);
        for (int i = 1; i < X.rows; ++i) mx = std::max(mx, X.at(i, j));
        double sum = 0.0;
        for (int i = 0; i < X.rows; ++i) {
            double e = std::exp(X.at(i, j) - mx);
            Y.at(i, j) = e;
            sum += e;
        }
        for (int i = 0; i < X.rows; ++i) Y.at(i, j) /= sum;
    }
    bool ng = nodes_[x].needs_grad;
    int id = push(std::move(Y), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, x, id] {
            const Tensor& g = nodes_[id].grad;
            const Tensor& y = nodes_[id].val;
            Tensor& gx = nodes_[x].grad;
            for (int j = 0; j < g.cols; ++j) {
                double dot = 0.0;
                for (int i = 0; i < g.rows; ++i) dot += g.at(i, j) * y.at(i, j);
                for (int i = 0; i < g.rows; ++i) gx.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
            }
        };
    return id;
}

int Graph::diag_embed(int x) {
    const Tensor& X = nodes_[x].val;
    if (X.cols != 1) throw AutodiffError("diag_embed: expects a column vector, got " +
                                         X.shape_str());
    Tensor C(X.rows, X.rows);
    for (int i = 0; i < X.rows; ++i) C.at(i, i) = X.at(i, 0);
    bool ng = nodes_[x].needs_grad;
    int id = push(std::move(C), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, x, id] {
            const Tensor& g = nodes_[id].grad;
            for (int i = 0; i < g.rows; ++i) nodes_[x].grad.at(i, 0) += g.at(i, i);
        };
    return id;
}

int Graph::concat_rows(int a, int b) {
    const Tensor& A = nodes_[a].val;
    const Tensor& B = nodes_[b].val;
    if (A.cols != B.cols) shape_fail("concat_rows", A, B);
    Tensor C(A.rows + B.rows, A.cols);
    std::copy(A.v.begin(), A.v.end(), C.v.begin());
    std::copy(B.v.begin(), B.v.end(), C.v.begin() + static_cast<std::ptrdiff_t>(A.size()));
    bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
    int id = push(std::move(C), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, a, b, id] {
            const Tensor& g = nodes_[id].grad;
            std::size_t split = nodes_[a].val.size();
            if (nodes_[a].needs_grad)
                for (std::size_t i = 0; i < split; ++i) nodes_[a].grad.v[i] += g.v[i];
            if (nodes_[b].needs_grad)
                for (std::size_t i = 0; i < nodes_[b].val.size(); ++i)
                    nodes_[b].grad.v[i] += g.v[split + i];
        };
    return id;
}

int Graph::dropout(int x, double rate) {
    if (rate < 0.0 || rate >= 1.0) throw AutodiffError("dropout: rate outside [0,1)");
    if (!training_ || rate == 0.0) return x;
    const Tensor& X = nodes_[x].val;
    double keep = 1.0 - rate;
    auto mask = std::make_shared<std::vector<std::uint8_t>>(X.size());
    Tensor C = X;
    for (std::size_t i = 0; i < C.size(); ++i) {
        bool on = rng_.uniform() >= rate;
        (*mask)[i] = on;
        C.v[i] = on ? C.v[i] / keep : 0.0;
    }
    bool ng = nodes_[x].needs_grad;
    int id = push(std::move(C), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, x, id, mask, keep] {
            const Tensor& g = nodes_[id].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if ((*mask)[i]) nodes_[x].grad.v[i] += g.v[i] / keep;
        };
    return id;
}

int Graph::scale(int x, double factor) {
    Tensor C = nodes_[x].val;
    for (double& v : C.v) v *= factor;
    bool ng = nodes_[x].needs_grad;
    int id = push(std::move(C), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, x, id, factor] {
            const Tensor& g = nodes_[id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) nodes_[x].grad.v[i] += factor * g.v[i];
        };
    return id;
}

int Graph::l1_normalize_columns(int x) {
    const Tensor& X = nodes_[x].val;
    Tensor Y(X.rows, X.cols);
    auto sums = std::make_shared<std::vector<double>>(X.cols);
    for (int j = 0; j < X.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < X.rows; ++i) s += X.at(i, j);
        if (s <= 0.0) throw AutodiffError("l1_normalize_columns: non-positive column sum");
        (*sums)[j] = s;
        for (int i = 0; i < X.rows; ++i) Y.at(i, j) = X.at(i, j) / s;
    }
    bool ng = nodes_[x].needs_grad;
    int id = push(std::move(Y), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, x, id, sums] {
            const Tensor& g = nodes_[id].grad;
            const Tensor& y = nodes_[id].val;
            Tensor& gx = nodes_[x].grad;
            for (int j = 0; j < g.cols; ++j) {
                double dot = 0.0;
                for (int i = 0; i < g.rows; ++i) dot += g.at(i, j) * y.at(i, j);
                for (int i = 0; i < g.rows; ++i) gx.at(i, j) += (g.at(i, j) - dot) / (*sums)[j];
            }
        };
    return id;
}

int Graph::cross_entropy(int probs, const std::vector<int>& labels) {
    const Tensor& P = nodes_[probs].val;
    if (static_cast<int>(labels.size()) != P.cols)
        throw AutodiffError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(P.cols) + " columns");
    for (int y : labels)
        if (y < 0 || y >= P.rows) throw AutodiffError("cross_entropy: label out of range");
    double loss = 0.0;
    for (int j = 0; j < P.cols; ++j) {
        double p = std::clamp(P.at(labels[j], j), kCrossEntropyClamp, 1.0);
        loss -= std::log(p);
    }
    loss /= static_cast<double>(P.cols);
    bool ng = nodes_[probs].needs_grad;
    int id = push(Tensor::scalar(loss), ng, nullptr);
    if (ng) {
        auto labels_copy = std::make_shared<std::vector<int>>(labels);
        nodes_[id].back = [this, probs, id, labels_copy] {
            double g = nodes_[id].grad.v[0];
            const Tensor& P = nodes_[probs].val;
            Tensor& gp = nodes_[probs].grad;
            double inv_n = 1.0 / static_cast<double>(P.cols);
            for (int j = 0; j < P.cols; ++j) {
                double p = P.at((*labels_copy)[j], j);
                if (p < kCrossEntropyClamp || p > 1.0) continue;  // clamped: flat
                gp.at((*labels_copy)[j], j) -= g * inv_n / p;
            }
        };
    }
    return id;
}

int Graph::pick(int x, int row, int col) {
    const Tensor& X = nodes_[x].val;
    if (row < 0 || row >= X.rows || col < 0 || col >= X.cols)
        throw AutodiffError("pick: index outside " + X.shape_str());
    bool ng = nodes_[x].needs_grad;
    int id = push(Tensor::scalar(X.at(row, col)), ng, nullptr);
    if (ng)
        nodes_[id].back = [this, x, id, row, col] {
            nodes_[x].grad.at(row, col) += nodes_[id].grad.v[0];
        };
    return id;
}

void Graph::backward(int loss) {
    const Tensor& L = nodes_[loss].val;
    if (L.rows != 1 || L.cols != 1)
        throw AutodiffError("backward: loss must be scalar, got " + L.shape_str());
    if (!nodes_[loss].needs_grad)
        throw AutodiffError("backward: loss does not depend on any tracked parameter");
    nodes_[loss].grad.v[0] = 1.0;
    for (int i = loss; i >= 0; --i)
        if (nodes_[i].needs_grad && nodes_[i].back) nodes_[i].back();
}

Adam::Adam(AdamConfig cfg, std::vector<Tensor*> params) : cfg_(cfg), params_(std::move(params)) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor* p : params_) {
        m_.emplace_back(p->rows, p->cols);
        v_.emplace_back(p->rows, p->cols);
    }
}

void Adam::step(const std::vector<Tensor>& grads) {
    if (grads.size() != params_.size())
        throw AutodiffError("adam: gradient list does not match parameter list");
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (!params_[k]->same_shape(grads[k]))
            throw AutodiffError("adam: gradient shape mismatch at parameter " + std::to_string(k));
        for (double g : grads[k].v)
            if (!std::isfinite(g)) throw AutodiffError("diverged: non-finite gradient");
    }
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = *params_[k];
        const std::vector<double>& g = grads[k].v;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m_[k].v[i] = cfg_.beta1 * m_[k].v[i] + (1.0 - cfg_.beta1) * g[i];
            v_[k].v[i] = cfg_.beta2 * v_[k].v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            double mhat = m_[k].v[i] / bc1;
            double vhat = v_[k].v[i] / bc2;
            p.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace riskgrid::ad
