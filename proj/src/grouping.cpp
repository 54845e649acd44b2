#include "udg/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udg {

FilterStrategy parse_filter_strategy(const std::string& name) {
    if (name == "UDG") return FilterStrategy::UDG;
    if (name == "THRESH") return FilterStrategy::THRESH;
    if (name == "SORT") return FilterStrategy::SORT;
    if (name == "OFF") return FilterStrategy::OFF;
    throw std::invalid_argument("unknown filter strategy: " + name);
}

std::string filter_strategy_name(FilterStrategy s) {
    switch (s) {
        case FilterStrategy::UDG: return "UDG";
        case FilterStrategy::THRESH: return "THRESH";
        case FilterStrategy::SORT: return "SORT";
        case FilterStrategy::OFF: return "OFF";
    }
    return "OFF";
}

std::vector<std::vector<int>> group_membership(const std::vector<int>& assignments, int k) {
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const int g = assignments[i];
        if (g < 0 || g >= k)
            throw std::invalid_argument("group_membership: assignment out of range");
        groups[static_cast<std::size_t>(g)].push_back(static_cast<int>(i));
    }
    return groups;
}

Matrix group_purity(const std::vector<std::vector<int>>& groups, const LabelMap& reference,
                    int n_classes) {
    Matrix gamma(groups.size(), static_cast<std::size_t>(n_classes));
    for (std::size_t k = 0; k < groups.size(); ++k) {
        if (groups[k].empty()) continue;
        for (int id : groups[k]) {
            const auto it = reference.find(id);
            if (it == reference.end()) continue;
            if (it->second < 0 || it->second >= n_classes)
                throw std::invalid_argument("group_purity: reference label out of range");
            gamma(k, static_cast<std::size_t>(it->second)) += 1.0;
        }
        const double inv = 1.0 / static_cast<double>(groups[k].size());
        for (int c = 0; c < n_classes; ++c) gamma(k, static_cast<std::size_t>(c)) *= inv;
    }
    return gamma;
}

namespace {

FilterResult finish(LabelMap expanded, std::size_t total_samples, std::size_t original_size) {
    FilterResult res;
    res.filtered_count = expanded.size() - original_size;
    res.remaining_unlabeled.reserve(total_samples - expanded.size());
    for (std::size_t i = 0; i < total_samples; ++i)
        if (!expanded.count(static_cast<int>(i)))
            res.remaining_unlabeled.push_back(static_cast<int>(i));
    res.expanded_labeled = std::move(expanded);
    return res;
}

void check_tau(double tau) {
    if (!(tau >= 0.0 && tau <= 1.0))
        throw std::invalid_argument("filter: tau must be in [0,1]");
}

} // namespace

FilterResult idf_filter(const std::vector<std::vector<int>>& groups, const Matrix& purity,
                        const LabelMap& original_labeled, std::size_t total_samples, double tau) {
    check_tau(tau);
    if (purity.rows != groups.size())
        throw std::invalid_argument("idf_filter: purity rows != group count");
    LabelMap expanded = original_labeled;
    for (std::size_t k = 0; k < groups.size(); ++k) {
        int best_class = -1;
        double best_gamma = tau; // strict inequality: gamma must exceed tau
        for (std::size_t c = 0; c < purity.cols; ++c) {
            const double g = purity(k, c);
            if (g > best_gamma) {
                best_gamma = g;
                best_class = static_cast<int>(c);
            }
        }
        if (best_class < 0) continue;
        for (int id : groups[k])
            if (!original_labeled.count(id)) expanded[id] = best_class;
    }
    return finish(std::move(expanded), total_samples, original_labeled.size());
}

FilterResult thresh_filter(const Matrix& class_posteriors, const std::vector<int>& unlabeled_ids,
                           const LabelMap& original_labeled, std::size_t total_samples,
                           double tau) {
    check_tau(tau);
    if (class_posteriors.rows != unlabeled_ids.size())
        throw std::invalid_argument("thresh_filter: posterior rows != unlabeled count");
    LabelMap expanded = original_labeled;
    for (std::size_t i = 0; i < unlabeled_ids.size(); ++i) {
        const double* p = class_posteriors.row(i);
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < class_posteriors.cols; ++c)
            if (p[c] > p[argmax]) argmax = c;
        if (p[argmax] > tau) expanded[unlabeled_ids[i]] = static_cast<int>(argmax);
    }
    return finish(std::move(expanded), total_samples, original_labeled.size());
}

FilterResult sort_filter(const Matrix& class_posteriors, const std::vector<int>& unlabeled_ids,
                         const LabelMap& original_labeled, std::size_t total_samples, double tau) {
    check_tau(tau);
    if (class_posteriors.rows != unlabeled_ids.size())
        throw std::invalid_argument("sort_filter: posterior rows != unlabeled count");
    struct Entry {
        double score;
        int id;
        int label;
    };
    std::vector<Entry> entries;
    entries.reserve(unlabeled_ids.size());
    for (std::size_t i = 0; i < unlabeled_ids.size(); ++i) {
        const double* p = class_posteriors.row(i);
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < class_posteriors.cols; ++c)
            if (p[c] > p[argmax]) argmax = c;
        entries.push_back({p[argmax], unlabeled_ids[i], static_cast<int>(argmax)});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    // floor with a tiny slack so decimal tau values hit their exact count,
    // e.g. (1 - 0.8) * 10 must select 2, not 1.
    const auto take = static_cast<std::size_t>(
        std::floor((1.0 - tau) * static_cast<double>(unlabeled_ids.size()) + 1e-9));
    LabelMap expanded = original_labeled;
    for (std::size_t i = 0; i < take && i < entries.size(); ++i)
        expanded[entries[i].id] = entries[i].label;
    return finish(std::move(expanded), total_samples, original_labeled.size());
}

FilterResult no_filter(const LabelMap& original_labeled, std::size_t total_samples) {
    return finish(original_labeled, total_samples, original_labeled.size());
}

} // namespace udg
