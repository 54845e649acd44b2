#pragma once

#include <array>
#include <vector>

#include "udg/detection.hpp"

namespace udg {

// CCR levels reported throughout: 1e-4, 1e-3, 1e-2, 1e-1.
inline constexpr std::array<double, 4> kCcrLevels = {1e-4, 1e-3, 1e-2, 1e-1};

struct MetricsReport {
    double fpr95 = 0.0;
    double auroc = 0.0;
    double aupr_in = 0.0;
    double aupr_out = 0.0;
    std::array<double, 4> ccr_at_fpr = {0.0, 0.0, 0.0, 0.0};
    double accuracy = 0.0;
};

// Threshold semantics everywhere: a sample is called positive iff score >= delta
// (closed), so every metric is exactly reproducible by an exhaustive scan over
// the observed score values.

// delta* = the largest observed score with TPR(delta) >= tpr_level; returns
// FPR(delta*). Requires at least one ID and one OOD sample.
double fpr_at_tpr(const ScoreTable& table, double tpr_level);

// Mann-Whitney statistic: P(score_ID > score_OOD) + 0.5*P(equal).
double auroc(const ScoreTable& table);

// Area under the precision-recall curve by right-continuous step integration
// over all distinct thresholds descending. id_positive=false negates scores
// and treats OOD as positive (AUPR-Out).
double aupr(const ScoreTable& table, bool id_positive);

// Candidate thresholds are the observed OOD scores; delta* is the smallest one
// with FPR(delta) <= n. CCR = |{ID : score >= delta* and pred == true}| / |ID|.
// When n is below the 1/|OOD| granularity, falls back to the FPR=0 threshold
// (ID strictly above the max OOD score) and sets *granularity_hit.
double ccr_at_fpr(const ScoreTable& table, double n, bool* granularity_hit = nullptr);

// Fraction of ID samples with pred == true; no rejection applied.
double accuracy(const ScoreTable& table);

MetricsReport compute_metrics(const ScoreTable& table);

// Field-wise average, used for the cross-dataset mean report.
MetricsReport mean_report(const std::vector<MetricsReport>& reports);

} // namespace udg
