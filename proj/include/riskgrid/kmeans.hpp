#pragma once

#include <cstdint>
#include <vector>

namespace riskgrid {

struct KMeansResult {
    std::vector<std::vector<double>> centroids;  // k rows
    std::vector<int> assignment;                 // one entry per input point
    double inertia = 0.0;                        // sum of squared distances
    int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Runs `restarts` independent
/// initializations (seeds derived from `seed`) and keeps the lowest-inertia
/// result. Stops a run when no centroid moves more than `tol` (Euclidean)
/// or after `max_iter` sweeps. Requires at least k distinct points.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    int restarts = 10, int max_iter = 300, double tol = 1e-6);

}  // namespace riskgrid
