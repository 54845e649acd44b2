#pragma once

#include <cstdint>
#include <vector>

#include "udg/matrix.hpp"

namespace udg {

struct KmeansResult {
    Matrix centroids;             // k x d
    std::vector<int> assignments; // per-sample group index in [0, k)
    std::vector<double> sse_history; // SSE after each assignment step
    int iterations = 0;
    bool converged = false;
};

// Lloyd iterations with k-means++ seeding until the assignment fixpoint or
// max_iters. Empty clusters are re-seeded from the farthest point of the
// largest cluster. Distances are Euclidean.
KmeansResult kmeans(const Matrix& features, int k, std::uint64_t seed, int max_iters = 100);

} // namespace udg
