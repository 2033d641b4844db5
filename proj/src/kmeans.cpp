#include "riskgrid/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "riskgrid/rng.hpp"

namespace riskgrid {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::vector<std::vector<double>> plusplus_init(const std::vector<std::vector<double>>& points,
                                               int k, Rng& rng) {
    const std::size_t n = points.size();
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    centroids.push_back(points[rng.uniform_index(n)]);

    std::vector<double> d2(n);
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = sq_dist(points[i], centroids[0]);
            for (std::size_t c = 1; c < centroids.size(); ++c)
                best = std::min(best, sq_dist(points[i], centroids[c]));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // all remaining mass sits on chosen centroids; pick any point
            centroids.push_back(points[rng.uniform_index(n)]);
            continue;
        }
        double r = rng.uniform() * total;
        std::size_t pick = n - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += d2[i];
            if (r < acc) {
                pick = i;
                break;
            }
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

KMeansResult lloyd(const std::vector<std::vector<double>>& points, int k, Rng& rng, int max_iter,
                   double tol) {
    const std::size_t n = points.size();
    const std::size_t dim = points[0].size();

    KMeansResult res;
    res.centroids = plusplus_init(points, k, rng);
    res.assignment.assign(n, -1);

    std::vector<std::vector<double>> sums(k, std::vector<double>(dim));
    std::vector<std::size_t> counts(k);

    for (int iter = 0; iter < max_iter; ++iter) {
        res.iterations = iter + 1;
        for (auto& s : sums) std::fill(s.begin(), s.end(), 0.0);
        std::fill(counts.begin(), counts.end(), std::size_t{0});

        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(points[i], res.centroids[0]);
            for (int c = 1; c < k; ++c) {
                double d = sq_dist(points[i], res.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            res.assignment[i] = best;
            ++counts[best];
            for (std::size_t j = 0; j < dim; ++j) sums[best][j] += points[i][j];
        }

        // Re-seed empty clusters with the point farthest from its centroid.
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[res.assignment[i]] <= 1) continue;
                double d = sq_dist(points[i], res.centroids[res.assignment[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far_d < 0.0) continue;
            int old = res.assignment[far];
            --counts[old];
            for (std::size_t j = 0; j < dim; ++j) sums[old][j] -= points[far][j];
            res.assignment[far] = c;
            counts[c] = 1;
            sums[c] = points[far];
        }

        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            std::vector<double> next(dim);
            for (std::size_t j = 0; j < dim; ++j) next[j] = sums[c][j] / counts[c];
            shift = std::max(shift, std::sqrt(sq_dist(next, res.centroids[c])));
            res.centroids[c] = std::move(next);
        }
        if (shift <= tol) break;
    }

    res.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = sq_dist(points[i], res.centroids[0]);
        for (int c = 1; c < k; ++c) {
            double d = sq_dist(points[i], res.centroids[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        res.assignment[i] = best;
        res.inertia += best_d;
    }
    return res;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    int restarts, int max_iter, double tol) {
    if (k < 1) throw std::invalid_argument("k must be positive");
    if (points.empty()) throw std::invalid_argument("no points to cluster");
    const std::size_t dim = points[0].size();
    for (const auto& p : points)
        if (p.size() != dim) throw std::invalid_argument("points of mixed dimension");

    std::vector<std::vector<double>> distinct;
    for (const auto& p : points) {
        bool seen = false;
        for (const auto& q : distinct)
            if (p == q) {
                seen = true;
                break;
            }
        if (!seen) {
            distinct.push_back(p);
            if (static_cast<int>(distinct.size()) >= k) break;
        }
    }
    if (static_cast<int>(distinct.size()) < k)
        throw std::invalid_argument("fewer distinct points than clusters");

    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Rng rng(derive_seed(seed, "kmeans", static_cast<std::uint64_t>(r)));
        KMeansResult run = lloyd(points, k, rng, max_iter, tol);
        if (run.inertia < best.inertia) best = std::move(run);
    }
    return best;
}

}  // namespace riskgrid
