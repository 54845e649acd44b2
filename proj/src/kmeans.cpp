#include "udg/kmeans.hpp"

#include <limits>
#include <stdexcept>
#include <string>

#include "udg/rng.hpp"

namespace udg {

namespace {

// k-means++ seeding: first centroid uniform, then proportional to squared
// distance from the nearest chosen centroid. Falls back to uniform choice
// among unchosen points when all remaining distances are zero (duplicates).
Matrix seed_centroids(const Matrix& x, int k, Rng& rng) {
    const std::size_t n = x.rows, d = x.cols;
    Matrix centroids(static_cast<std::size_t>(k), d);
    std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
    std::vector<char> chosen(n, 0);

    std::size_t first = static_cast<std::size_t>(rng.bounded(n));
    for (std::size_t j = 0; j < d; ++j) centroids(0, j) = x(first, j);
    chosen[first] = 1;

    for (int c = 1; c < k; ++c) {
        const double* prev = centroids.row(static_cast<std::size_t>(c - 1));
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 = squared_distance(x.row(i), prev, d);
            if (d2 < dist2[i]) dist2[i] = d2;
            total += dist2[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = n - 1;
        } else {
            std::size_t offset = static_cast<std::size_t>(rng.bounded(n));
            for (std::size_t step = 0; step < n; ++step) {
                const std::size_t i = (offset + step) % n;
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = offset;
        }
        for (std::size_t j = 0; j < d; ++j) centroids(static_cast<std::size_t>(c), j) = x(pick, j);
        chosen[pick] = 1;
    }
    return centroids;
}

} // namespace

KmeansResult kmeans(const Matrix& features, int k, std::uint64_t seed, int max_iters) {
    const std::size_t n = features.rows, d = features.cols;
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (n < static_cast<std::size_t>(k))
        throw std::invalid_argument("kmeans: N=" + std::to_string(n) +
                                    " < k=" + std::to_string(k));
    if (!all_finite(features)) throw std::invalid_argument("kmeans: non-finite feature value");

    Rng rng(seed);
    KmeansResult res;
    res.centroids = seed_centroids(features, k, rng);
    res.assignments.assign(n, -1);

    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        // Assignment step (pure argmin; ties go to the lower index).
        bool changed = false;
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d2 = squared_distance(features.row(i), res.centroids.row(0), d);
            for (int c = 1; c < k; ++c) {
                const double d2 =
                    squared_distance(features.row(i), res.centroids.row(static_cast<std::size_t>(c)), d);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = c;
                }
            }
            if (best != res.assignments[i]) {
                changed = true;
                res.assignments[i] = best;
            }
            sse += best_d2;
        }

        // Re-seed empty clusters from the farthest member of the largest cluster.
        counts.assign(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(res.assignments[i])];
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            int largest = 0;
            for (int c2 = 1; c2 < k; ++c2)
                if (counts[static_cast<std::size_t>(c2)] > counts[static_cast<std::size_t>(largest)])
                    largest = c2;
            std::size_t farthest = n;
            double far_d2 = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (res.assignments[i] != largest) continue;
                const double d2 = squared_distance(
                    features.row(i), res.centroids.row(static_cast<std::size_t>(largest)), d);
                if (d2 > far_d2) {
                    far_d2 = d2;
                    farthest = i;
                }
            }
            if (farthest == n) continue; // all clusters empty only if n == 0
            for (std::size_t j = 0; j < d; ++j)
                res.centroids(static_cast<std::size_t>(c), j) = features(farthest, j);
            sse -= far_d2; // the moved point now sits on its centroid
            res.assignments[farthest] = c;
            --counts[static_cast<std::size_t>(largest)];
            ++counts[static_cast<std::size_t>(c)];
            changed = true;
        }

        res.sse_history.push_back(sse);
        res.iterations = iter + 1;
        if (!changed && iter > 0) {
            res.converged = true;
            break;
        }

        // Update step: centroid = mean of members (fixed summation order).
        Matrix sums(static_cast<std::size_t>(k), d);
        for (std::size_t i = 0; i < n; ++i) {
            double* s = sums.row(static_cast<std::size_t>(res.assignments[i]));
            const double* xi = features.row(i);
            for (std::size_t j = 0; j < d; ++j) s[j] += xi[j];
        }
        for (int c = 0; c < k; ++c) {
            const double inv = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            double* ctr = res.centroids.row(static_cast<std::size_t>(c));
            const double* s = sums.row(static_cast<std::size_t>(c));
            for (std::size_t j = 0; j < d; ++j) ctr[j] = s[j] * inv;
        }
    }
    return res;
}

} // namespace udg
