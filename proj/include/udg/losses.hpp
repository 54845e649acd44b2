#pragma once

#include <cstddef>
#include <vector>

#include "udg/matrix.hpp"

namespace udg {

struct LossWeights {
    double lambda_u = 0.5;
    double lambda_a = 0.1;
};

struct LossBreakdown {
    double l_ci = 0.0;
    double l_co = 0.0;
    double l_a = 0.0;
    double total = 0.0;
};

struct LossDiagnostics {
    std::size_t clamp_count = 0; // times a probability hit the 1e-12 floor
};

// Probabilities are floored at this value before taking logs.
inline constexpr double kProbClamp = 1e-12;

// Mean over the batch of -log p_{y_i}.
double classification_loss(const Matrix& posteriors, const std::vector<int>& labels,
                           LossDiagnostics* diag = nullptr);

// -(1/N)(1/C) sum_i sum_c log p_c; minimum ln C at uniform rows.
double entropy_oe_loss(const Matrix& posteriors, LossDiagnostics* diag = nullptr);

// Mean over the batch of -log p_{g_i}.
double auxiliary_loss(const Matrix& group_posteriors, const std::vector<int>& group_indices,
                      LossDiagnostics* diag = nullptr);

LossBreakdown total_loss(double l_ci, double l_co, double l_a, const LossWeights& weights);

// Gradients w.r.t. the logits producing the given posteriors, with the same
// batch-mean normalization as the losses above.
Matrix classification_loss_grad(const Matrix& posteriors, const std::vector<int>& labels);
Matrix entropy_oe_loss_grad(const Matrix& posteriors);
Matrix auxiliary_loss_grad(const Matrix& group_posteriors, const std::vector<int>& group_indices);

} // namespace udg
