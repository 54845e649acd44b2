#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "udg/matrix.hpp"

namespace udg {

enum class FilterStrategy { UDG, THRESH, SORT, OFF };

FilterStrategy parse_filter_strategy(const std::string& name);
std::string filter_strategy_name(FilterStrategy s);

struct FilterConfig {
    FilterStrategy strategy = FilterStrategy::UDG;
    double tau = 0.8;
    int k_groups = 100;
};

// sample id -> (pseudo or true) class label; ordered for deterministic iteration.
using LabelMap = std::map<int, int>;

// Splits sample ids [0, assignments.size()) into the k per-group member lists.
// The lists are disjoint and cover every sample.
std::vector<std::vector<int>> group_membership(const std::vector<int>& assignments, int k);

// gamma[k][c] = |D_k intersect reference_c| / |D_k|. The denominator counts all
// group members, labeled or not. Empty groups produce an all-zero row.
Matrix group_purity(const std::vector<std::vector<int>>& groups, const LabelMap& reference,
                    int n_classes);

struct FilterResult {
    LabelMap expanded_labeled;            // original labels plus pseudo-labels
    std::vector<int> remaining_unlabeled; // complement, ascending sample id
    std::size_t filtered_count = 0;       // pseudo-labeled samples added this epoch
};

// IDF with error correction: the union is always taken against the ORIGINAL
// labeled set, so a pseudo-label granted at a previous epoch is dropped when
// the sample's new group fails the purity test. Filtering uses strict
// gamma > tau; if several classes pass (tau < 0.5), the largest gamma wins and
// ties go to the lower class index.
FilterResult idf_filter(const std::vector<std::vector<int>>& groups, const Matrix& purity,
                        const LabelMap& original_labeled, std::size_t total_samples, double tau);

// Pseudo-labels unlabeled samples whose max softmax exceeds tau (strict).
FilterResult thresh_filter(const Matrix& class_posteriors,
                           const std::vector<int>& unlabeled_ids,
                           const LabelMap& original_labeled, std::size_t total_samples,
                           double tau);

// Pseudo-labels the top floor((1-tau)*N_U) unlabeled samples by max softmax,
// descending; ties broken by ascending sample id.
FilterResult sort_filter(const Matrix& class_posteriors, const std::vector<int>& unlabeled_ids,
                         const LabelMap& original_labeled, std::size_t total_samples, double tau);

// No filtering: the labeled set is unchanged, everything else stays unlabeled.
FilterResult no_filter(const LabelMap& original_labeled, std::size_t total_samples);

// Per-epoch grouping snapshot.
struct GroupingState {
    int epoch = 0;
    Matrix centroids;
    std::vector<int> assignments;
    Matrix purity; // k x n_classes
    LabelMap expanded_labeled;
    std::vector<int> remaining_unlabeled;
};

} // namespace udg
