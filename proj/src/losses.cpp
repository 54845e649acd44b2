#include "udg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace udg {

namespace {

double neg_log_clamped(double p, LossDiagnostics* diag) {
    if (p < kProbClamp) {
        if (diag) ++diag->clamp_count;
        p = kProbClamp;
    }
    return -std::log(p);
}

// Summing in sorted order makes the batch mean exactly invariant under
// permutations of the batch.
double sorted_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc;
}

void check_labels(const Matrix& posteriors, const std::vector<int>& labels) {
    if (labels.size() != posteriors.rows)
        throw std::invalid_argument("loss: label count != batch size");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= posteriors.cols)
            throw std::invalid_argument("loss: label " + std::to_string(y) + " out of range");
}

} // namespace

double classification_loss(const Matrix& posteriors, const std::vector<int>& labels,
                           LossDiagnostics* diag) {
    check_labels(posteriors, labels);
    if (posteriors.rows == 0) return 0.0;
    std::vector<double> terms(posteriors.rows);
    for (std::size_t i = 0; i < posteriors.rows; ++i)
        terms[i] = neg_log_clamped(posteriors(i, static_cast<std::size_t>(labels[i])), diag);
    return sorted_sum(terms) / static_cast<double>(posteriors.rows);
}

double entropy_oe_loss(const Matrix& posteriors, LossDiagnostics* diag) {
    if (posteriors.rows == 0) return 0.0;
    std::vector<double> terms;
    terms.reserve(posteriors.data.size());
    for (std::size_t i = 0; i < posteriors.rows; ++i)
        for (std::size_t c = 0; c < posteriors.cols; ++c)
            terms.push_back(neg_log_clamped(posteriors(i, c), diag));
    return sorted_sum(terms) /
           (static_cast<double>(posteriors.rows) * static_cast<double>(posteriors.cols));
}

double auxiliary_loss(const Matrix& group_posteriors, const std::vector<int>& group_indices,
                      LossDiagnostics* diag) {
    return classification_loss(group_posteriors, group_indices, diag);
}

LossBreakdown total_loss(double l_ci, double l_co, double l_a, const LossWeights& weights) {
    if (weights.lambda_u < 0.0 || weights.lambda_a < 0.0)
        throw std::invalid_argument("total_loss: weights must be >= 0");
    LossBreakdown b;
    b.l_ci = l_ci;
    b.l_co = l_co;
    b.l_a = l_a;
    b.total = l_ci + weights.lambda_u * l_co + weights.lambda_a * l_a;
    return b;
}

Matrix classification_loss_grad(const Matrix& posteriors, const std::vector<int>& labels) {
    check_labels(posteriors, labels);
    Matrix g = posteriors;
    const double inv_n = posteriors.rows > 0 ? 1.0 / static_cast<double>(posteriors.rows) : 0.0;
    for (std::size_t i = 0; i < g.rows; ++i) {
        g(i, static_cast<std::size_t>(labels[i])) -= 1.0;
        for (std::size_t c = 0; c < g.cols; ++c) g(i, c) *= inv_n;
    }
    return g;
}

Matrix entropy_oe_loss_grad(const Matrix& posteriors) {
    // d/dz_j of -(1/NC) sum_c log p_c is (p_j - 1/C)/N.
    Matrix g = posteriors;
    const double inv_n = posteriors.rows > 0 ? 1.0 / static_cast<double>(posteriors.rows) : 0.0;
    const double inv_c = 1.0 / static_cast<double>(posteriors.cols);
    for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t c = 0; c < g.cols; ++c) g(i, c) = (g(i, c) - inv_c) * inv_n;
    return g;
}

Matrix auxiliary_loss_grad(const Matrix& group_posteriors, const std::vector<int>& group_indices) {
    return classification_loss_grad(group_posteriors, group_indices);
}

} // namespace udg
