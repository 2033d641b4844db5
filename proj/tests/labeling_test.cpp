#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "riskgrid/geo.hpp"
#include "riskgrid/labeling.hpp"
#include "riskgrid/rng.hpp"

using riskgrid::AccidentRecord;
using riskgrid::RegionGrid;
using riskgrid::RiskLabels;
using riskgrid::Rng;

namespace {

RegionGrid unit_grid(int rows, int cols) {
    return RegionGrid::forced({0.0, 1.0, 0.0, 1.0}, rows, cols);
}

AccidentRecord crash(double lat, double lon, double severity = 1.0) {
    AccidentRecord a;
    a.lat = lat;
    a.lon = lon;
    a.severity = severity;
    return a;
}

// exact 1-D 3-means over the sorted values: every optimal clustering of
// points on a line is contiguous, so enumerating the C(n-1,2) split pairs
// finds the global optimum.
struct SplitOracle {
    double sse = std::numeric_limits<double>::infinity();
    int i = 0;   // first boundary in the sorted sequence
    int j = 0;   // second boundary
    int ties = 0;
};

SplitOracle best_contiguous_split(const std::vector<double>& sorted) {
    const int n = static_cast<int>(sorted.size());
    std::vector<double> sum(n + 1, 0.0), sumsq(n + 1, 0.0);
    for (int t = 0; t < n; ++t) {
        sum[t + 1] = sum[t] + sorted[t];
        sumsq[t + 1] = sumsq[t] + sorted[t] * sorted[t];
    }
    auto segment_sse = [&](int lo, int hi) {  // [lo, hi)
        double s = sum[hi] - sum[lo];
        double ss = sumsq[hi] - sumsq[lo];
        return ss - s * s / (hi - lo);
    };

    SplitOracle best;
    for (int i = 1; i <= n - 2; ++i)
        for (int j = i + 1; j <= n - 1; ++j) {
            double sse = segment_sse(0, i) + segment_sse(i, j) + segment_sse(j, n);
            if (sse < best.sse - 1e-9) {
                best = {sse, i, j, 1};
            } else if (sse < best.sse + 1e-9) {
                ++best.ties;
            }
        }
    return best;
}

double labels_sse(const std::vector<double>& severity, const RiskLabels& labels) {
    double sse = 0.0;
    for (std::size_t c = 0; c < severity.size(); ++c) {
        double d = severity[c] - labels.centroids[static_cast<std::size_t>(labels.level[c])];
        sse += d * d;
    }
    return sse;
}

}  // namespace

TEST_SUITE("labeling") {
    TEST_CASE("severities accumulate per cell") {
        RegionGrid grid = unit_grid(2, 2);
        std::vector<AccidentRecord> accidents{
            crash(0.25, 0.25), crash(0.26, 0.24), crash(0.20, 0.20),  // all cell (0,0)
            crash(0.75, 0.75, 0.5), crash(0.80, 0.70, 2.5),           // cell (1,1)
            crash(3.00, 0.25), crash(0.25, -1.0),                     // outside, dropped
        };
        std::vector<double> sums = riskgrid::aggregate_severity(accidents, grid);
        REQUIRE(sums.size() == 4);
        CHECK(sums[grid.linear({0, 0})] == doctest::Approx(3.0));
        CHECK(sums[grid.linear({1, 1})] == doctest::Approx(3.0));
        CHECK(sums[grid.linear({0, 1})] == 0.0);
        CHECK(sums[grid.linear({1, 0})] == 0.0);
    }

    TEST_CASE("no accidents means all-zero severity") {
        std::vector<double> sums = riskgrid::aggregate_severity({}, unit_grid(3, 3));
        CHECK(sums == std::vector<double>(9, 0.0));
    }

    TEST_CASE("three well-separated pairs split into the obvious levels") {
        std::vector<double> severity{0.0, 0.0, 10.0, 10.0, 100.0, 100.0};
        RiskLabels labels = riskgrid::kmeans_levels(severity, 1);
        CHECK(labels.level == std::vector<int>{0, 0, 1, 1, 2, 2});
        CHECK(labels.centroids[0] == doctest::Approx(0.0));
        CHECK(labels.centroids[1] == doctest::Approx(10.0));
        CHECK(labels.centroids[2] == doctest::Approx(100.0));
    }

    TEST_CASE("an outlier gets its own level") {
        std::vector<double> severity{1.0, 2.0, 10.0, 11.0, 100.0};
        RiskLabels labels = riskgrid::kmeans_levels(severity, 7);
        CHECK(labels.level == std::vector<int>{0, 0, 1, 1, 2});
        CHECK(labels.centroids[0] == doctest::Approx(1.5));
        CHECK(labels.centroids[1] == doctest::Approx(10.5));
        CHECK(labels.centroids[2] == doctest::Approx(100.0));
    }

    TEST_CASE("fewer than three distinct values is degenerate") {
        CHECK_THROWS_WITH_AS(riskgrid::kmeans_levels(std::vector<double>(10, 5.0), 1),
                             doctest::Contains("degenerate"), std::invalid_argument);
        CHECK_THROWS_WITH_AS(riskgrid::kmeans_levels({1.0, 2.0, 1.0, 2.0}, 1),
                             doctest::Contains("degenerate"), std::invalid_argument);
        CHECK_THROWS_WITH_AS(riskgrid::kmeans_levels({}, 1),
                             doctest::Contains("degenerate"), std::invalid_argument);
    }

    TEST_CASE("levels match the exact contiguous-partition optimum") {
        Rng rng(20260814);
        int unique_checked = 0;
        for (int trial = 0; trial < 200; ++trial) {
            int n = 3 + static_cast<int>(rng.uniform_index(62));
            bool tie_prone = rng.bernoulli(0.3);
            std::vector<double> severity(n);
            std::vector<bool> seen_distinct;
            for (double& v : severity) {
                v = rng.uniform(0.0, 100.0);
                if (tie_prone) v = std::floor(v / 10.0) * 10.0;
            }
            {
                std::vector<double> d = severity;
                std::sort(d.begin(), d.end());
                d.erase(std::unique(d.begin(), d.end()), d.end());
                if (d.size() < 3) continue;
            }

            std::vector<double> sorted = severity;
            std::sort(sorted.begin(), sorted.end());
            SplitOracle oracle = best_contiguous_split(sorted);

            RiskLabels labels = riskgrid::kmeans_levels(severity, 1234 + trial);
            CHECK(labels_sse(severity, labels) ==
                  doctest::Approx(oracle.sse).epsilon(1e-9).scale(1.0));

            // ordered levels: a higher severity never gets a lower level
            for (int a = 0; a < n; ++a)
                for (int b = a + 1; b < n; ++b)
                    if (severity[a] < severity[b]) CHECK(labels.level[a] <= labels.level[b]);

            if (oracle.ties == 1) {
                ++unique_checked;
                double upper_low = sorted[oracle.i - 1];
                double upper_mid = sorted[oracle.j - 1];
                for (int c = 0; c < n; ++c) {
                    int want = severity[c] <= upper_low ? 0 : (severity[c] <= upper_mid ? 1 : 2);
                    CHECK(labels.level[c] == want);
                }
            }
        }
        CHECK(unique_checked > 100);
    }

    TEST_CASE("labeling is deterministic in the seed") {
        Rng rng(5150);
        std::vector<double> severity(300);
        for (double& v : severity) v = rng.uniform(0.0, 50.0);
        RiskLabels a = riskgrid::kmeans_levels(severity, 99);
        RiskLabels b = riskgrid::kmeans_levels(severity, 99);
        CHECK(a.level == b.level);
        CHECK(a.centroids == b.centroids);
    }
}
