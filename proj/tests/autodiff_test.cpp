#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "riskgrid/autodiff.hpp"

using riskgrid::Rng;
using riskgrid::ad::Adam;
using riskgrid::ad::AutodiffError;
using riskgrid::ad::Graph;
using riskgrid::ad::Tensor;

namespace {

Tensor random_tensor(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(rows, cols);
    for (double& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

// Central finite differences of a scalar-valued builder with respect to one
// input tensor; the builder re-runs the whole graph at the perturbed value.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, Tensor at, double h = 1e-6) {
    Tensor grad(at.rows, at.cols);
    for (std::size_t i = 0; i < at.v.size(); ++i) {
        const double keep = at.v[i];
        at.v[i] = keep + h;
        const double up = f(at);
        at.v[i] = keep - h;
        const double down = f(at);
        at.v[i] = keep;
        grad.v[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

void check_close(const Tensor& got, const Tensor& want, double tol) {
    REQUIRE(got.rows == want.rows);
    REQUIRE(got.cols == want.cols);
    for (std::size_t i = 0; i < got.v.size(); ++i) {
        const double denom = std::max(1.0, std::abs(want.v[i]));
        CHECK(std::abs(got.v[i] - want.v[i]) / denom < tol);
    }
}

double weighted_sum(const Tensor& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.v.size(); ++i)
        s += v.v[i] * (0.3 + 0.1 * static_cast<double>(i % 7));
    return s;
}

// Backpropagates the fixed weighted sum by seeding backward() from a scalar
// built as sum(w ⊙ out) using matmul with constant row/column shapes.
Tensor tape_gradient(const std::function<int(Graph&, int)>& op, const Tensor& x) {
    Graph g;
    int in = g.leaf(x, true);
    int out = op(g, in);
    const Tensor& v = g.value(out);

    Tensor w(v.rows, v.cols);
    for (std::size_t i = 0; i < w.v.size(); ++i)
        w.v[i] = 0.3 + 0.1 * static_cast<double>(i % 7);

    // sum(w ⊙ out) = ones_row * (w ⊙ out) * ones_col
    int prod = g.mul(g.leaf(w), out);
    Tensor ones_row(1, v.rows);
    std::fill(ones_row.v.begin(), ones_row.v.end(), 1.0);
    Tensor ones_col(v.cols, 1);
    std::fill(ones_col.v.begin(), ones_col.v.end(), 1.0);
    int scalar = g.matmul(g.matmul(g.leaf(ones_row), prod), g.leaf(ones_col));
    g.backward(scalar);
    return g.grad(in);
}

double forward_value(const std::function<int(Graph&, int)>& op, const Tensor& at) {
    Graph g;
    int in = g.leaf(at, false);
    return weighted_sum(g.value(op(g, in)));
}

void fd_check(const std::function<int(Graph&, int)>& op, const Tensor& x, double tol = 1e-5) {
    Tensor got = tape_gradient(op, x);
    Tensor want = finite_diff([&](const Tensor& at) { return forward_value(op, at); }, x);
    check_close(got, want, tol);
}

}  // namespace

TEST_SUITE("autodiff") {
    TEST_CASE("tensor constructors") {
        Tensor c = Tensor::column({1.0, 2.0, 3.0});
        CHECK(c.rows == 3);
        CHECK(c.cols == 1);
        CHECK(c.at(2, 0) == 3.0);
        Tensor s = Tensor::scalar(7.5);
        CHECK(s.rows == 1);
        CHECK(s.cols == 1);
        CHECK(s.v[0] == 7.5);
    }

    TEST_CASE("matmul forward matches manual product") {
        Graph g;
        Tensor a(2, 3);
        a.v = {1, 2, 3, 4, 5, 6};
        Tensor b(3, 2);
        b.v = {7, 8, 9, 10, 11, 12};
        const Tensor& c = g.value(g.matmul(g.leaf(a), g.leaf(b)));
        CHECK(c.at(0, 0) == doctest::Approx(58));
        CHECK(c.at(0, 1) == doctest::Approx(64));
        CHECK(c.at(1, 0) == doctest::Approx(139));
        CHECK(c.at(1, 1) == doctest::Approx(154));
    }

    TEST_CASE("matmul shape mismatch rejected") {
        Graph g;
        int a = g.leaf(Tensor(2, 3));
        int b = g.leaf(Tensor(2, 2));
        CHECK_THROWS_AS(g.matmul(a, b), AutodiffError);
    }

    TEST_CASE("gradients match finite differences per op") {
        Rng rng(2024);
        Tensor x = random_tensor(4, 3, rng);

        SUBCASE("relu") {
            // keep entries away from the kink
            for (double& v : x.v)
                if (std::abs(v) < 0.05) v += 0.1;
            fd_check([](Graph& g, int in) { return g.relu(in); }, x);
        }
        SUBCASE("add") {
            Rng r2(7);
            Tensor other = random_tensor(4, 3, r2);
            fd_check([&](Graph& g, int in) { return g.add(in, g.leaf(other)); }, x);
        }
        SUBCASE("mul") {
            Rng r2(8);
            Tensor other = random_tensor(4, 3, r2);
            fd_check([&](Graph& g, int in) { return g.mul(in, g.leaf(other)); }, x);
        }
        SUBCASE("mul both sides tracked") {
            fd_check([](Graph& g, int in) { return g.mul(in, g.relu(in)); }, x);
        }
        SUBCASE("matmul left") {
            Rng r2(9);
            Tensor other = random_tensor(3, 2, r2);
            fd_check([&](Graph& g, int in) { return g.matmul(in, g.leaf(other)); }, x);
        }
        SUBCASE("matmul right") {
            Rng r2(10);
            Tensor other = random_tensor(2, 4, r2);
            fd_check([&](Graph& g, int in) { return g.matmul(g.leaf(other), in); }, x);
        }
        SUBCASE("softmax") {
            fd_check([](Graph& g, int in) { return g.softmax(in); }, x);
        }
        SUBCASE("log") {
            Tensor pos = x;
            for (double& v : pos.v) v = std::abs(v) + 0.2;
            fd_check([](Graph& g, int in) { return g.log(in); }, pos);
        }
        SUBCASE("scale") {
            fd_check([](Graph& g, int in) { return g.scale(in, -2.5); }, x);
        }
        SUBCASE("concat_rows upper") {
            Rng r2(11);
            Tensor other = random_tensor(2, 3, r2);
            fd_check([&](Graph& g, int in) { return g.concat_rows(in, g.leaf(other)); }, x);
        }
        SUBCASE("concat_rows lower") {
            Rng r2(12);
            Tensor other = random_tensor(2, 3, r2);
            fd_check([&](Graph& g, int in) { return g.concat_rows(g.leaf(other), in); }, x);
        }
        SUBCASE("l1_normalize_columns") {
            Tensor pos = x;
            for (double& v : pos.v) v = std::abs(v) + 0.1;
            fd_check([](Graph& g, int in) { return g.l1_normalize_columns(in); }, pos);
        }
        SUBCASE("diag_embed") {
            Rng r2(13);
            Tensor col = random_tensor(4, 1, r2);
            fd_check([](Graph& g, int in) { return g.diag_embed(in); }, col);
        }
        SUBCASE("softmax into mul chain") {
            Rng r2(14);
            Tensor other = random_tensor(4, 3, r2);
            fd_check([&](Graph& g, int in) { return g.mul(g.softmax(in), g.leaf(other)); }, x);
        }
        SUBCASE("ensemble-shaped composition") {
            // softmax products, add, renormalize, log — the ensemble tail
            Rng r2(15);
            Tensor other = random_tensor(4, 3, r2);
            fd_check(
                [&](Graph& g, int in) {
                    int yu = g.softmax(in);
                    int yv = g.softmax(g.leaf(other));
                    int wu = g.softmax(g.mul(in, in));
                    int combo = g.add(g.mul(wu, yu), g.mul(wu, yv));
                    return g.log(g.l1_normalize_columns(combo));
                },
                x, 1e-4);
        }
    }

    TEST_CASE("cross entropy gradient matches finite differences") {
        Rng rng(55);
        Tensor logits = random_tensor(3, 4, rng);
        std::vector<int> labels{0, 2, 1, 2};

        auto build = [&](Graph& g, int in) { return g.cross_entropy(g.softmax(in), labels); };

        Graph g;
        int in = g.leaf(logits, true);
        int loss = build(g, in);
        g.backward(loss);
        Tensor got = g.grad(in);

        Tensor want = finite_diff(
            [&](const Tensor& at) {
                Graph g2;
                int in2 = g2.leaf(at, false);
                return g2.value(build(g2, in2)).v[0];
            },
            logits);
        check_close(got, want, 1e-5);
    }

    TEST_CASE("cross entropy rejects non-probability input shape") {
        Graph g;
        int probs = g.leaf(Tensor(3, 2));
        CHECK_THROWS_AS(g.cross_entropy(probs, std::vector<int>{0}), AutodiffError);
    }

    TEST_CASE("backward requires scalar loss") {
        Graph g;
        int x = g.leaf(Tensor(2, 2), true);
        CHECK_THROWS_AS(g.backward(x), AutodiffError);
    }

    TEST_CASE("pick extracts a single entry") {
        Graph g;
        Tensor t(2, 2);
        t.v = {1, 2, 3, 4};
        int p = g.pick(g.leaf(t), 1, 0);
        CHECK(g.value(p).v[0] == 3.0);
        CHECK(g.value(p).rows == 1);
        CHECK(g.value(p).cols == 1);
    }

    TEST_CASE("dropout eval mode is identity") {
        Graph g(false, 99);
        Tensor x(5, 4);
        for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] = static_cast<double>(i) + 1.0;
        const Tensor& out = g.value(g.dropout(g.leaf(x), 0.4));
        for (std::size_t i = 0; i < x.v.size(); ++i) CHECK(out.v[i] == x.v[i]);
    }

    TEST_CASE("dropout training mode preserves expectation") {
        const double rate = 0.4;
        Tensor x(1, 1);
        x.v = {1.0};
        double sum = 0.0;
        const int trials = 10000;
        for (int t = 0; t < trials; ++t) {
            Graph g(true, static_cast<std::uint64_t>(t));
            sum += g.value(g.dropout(g.leaf(x), rate)).v[0];
        }
        CHECK(std::abs(sum / trials - 1.0) < 0.02);
    }

    TEST_CASE("dropout gradient respects the mask") {
        Graph g(true, 123);
        Tensor x(6, 1);
        std::fill(x.v.begin(), x.v.end(), 1.0);
        int in = g.leaf(x, true);
        int out = g.dropout(in, 0.4);
        Tensor ones_row(1, 6);
        std::fill(ones_row.v.begin(), ones_row.v.end(), 1.0);
        int loss = g.matmul(g.leaf(ones_row), out);
        g.backward(loss);
        const Tensor& val = g.value(out);
        const Tensor& grad = g.grad(in);
        for (int i = 0; i < 6; ++i) {
            // gradient equals the applied mask scaling (0 or 1/keep)
            CHECK(grad.at(i, 0) == doctest::Approx(val.at(i, 0)));
        }
    }

    TEST_CASE("log rejects non-positive input") {
        Graph g;
        Tensor x(2, 1);
        x.v = {0.5, -0.1};
        int in = g.leaf(x);
        CHECK_THROWS_AS(g.log(in), AutodiffError);
    }

    TEST_CASE("adam first step moves by about lr") {
        Tensor p = Tensor::scalar(1.0);
        Adam adam({.lr = 1e-3}, {&p});
        Tensor grad = Tensor::scalar(1.0);
        adam.step({grad});
        CHECK(p.v[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    }

    TEST_CASE("adam rejects NaN gradients") {
        Tensor p = Tensor::scalar(1.0);
        Adam adam({}, {&p});
        Tensor grad = Tensor::scalar(std::nan(""));
        CHECK_THROWS_WITH_AS(adam.step({grad}), doctest::Contains("diverged"), AutodiffError);
    }

    TEST_CASE("xavier init stays within the fan bound") {
        Tensor t = riskgrid::ad::xavier_init(24, 16, 77);
        const double bound = std::sqrt(6.0 / (24 + 16));
        for (double v : t.v) CHECK(std::abs(v) <= bound);
        // seeded determinism
        Tensor t2 = riskgrid::ad::xavier_init(24, 16, 77);
        CHECK(t.v == t2.v);
    }
}
