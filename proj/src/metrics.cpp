#include "udg/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>

namespace udg {

namespace {

struct SplitScores {
    std::vector<double> id;  // ID sample scores
    std::vector<double> ood; // OOD sample scores
};

SplitScores split_scores(const ScoreTable& table) {
    SplitScores s;
    for (const auto& row : table)
        (row.is_id ? s.id : s.ood).push_back(row.score);
    if (s.id.empty() || s.ood.empty())
        throw std::invalid_argument("metrics: need at least one ID and one OOD sample");
    return s;
}

std::vector<double> distinct_sorted_desc(std::vector<double> v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace

double fpr_at_tpr(const ScoreTable& table, double tpr_level) {
    if (!(tpr_level > 0.0 && tpr_level <= 1.0))
        throw std::invalid_argument("fpr_at_tpr: tpr_level must be in (0,1]");
    auto s = split_scores(table);
    std::vector<double> all;
    all.reserve(s.id.size() + s.ood.size());
    all.insert(all.end(), s.id.begin(), s.id.end());
    all.insert(all.end(), s.ood.begin(), s.ood.end());
    const auto thresholds = distinct_sorted_desc(std::move(all));

    std::sort(s.id.begin(), s.id.end(), std::greater<>());
    std::sort(s.ood.begin(), s.ood.end(), std::greater<>());
    const double n_id = static_cast<double>(s.id.size());
    const double n_ood = static_cast<double>(s.ood.size());

    std::size_t id_ge = 0, ood_ge = 0;
    for (double delta : thresholds) {
        while (id_ge < s.id.size() && s.id[id_ge] >= delta) ++id_ge;
        while (ood_ge < s.ood.size() && s.ood[ood_ge] >= delta) ++ood_ge;
        if (static_cast<double>(id_ge) / n_id >= tpr_level)
            return static_cast<double>(ood_ge) / n_ood;
    }
    // tpr_level <= 1 is always reached at the smallest observed score.
    return 1.0;
}

double auroc(const ScoreTable& table) {
    auto s = split_scores(table);
    std::sort(s.ood.begin(), s.ood.end());
    std::uint64_t greater = 0, equal = 0;
    for (double v : s.id) {
        const auto lo = std::lower_bound(s.ood.begin(), s.ood.end(), v);
        const auto hi = std::upper_bound(lo, s.ood.end(), v);
        greater += static_cast<std::uint64_t>(lo - s.ood.begin());
        equal += static_cast<std::uint64_t>(hi - lo);
    }
    const double pairs = static_cast<double>(s.id.size()) * static_cast<double>(s.ood.size());
    return (static_cast<double>(greater) + 0.5 * static_cast<double>(equal)) / pairs;
}

double aupr(const ScoreTable& table, bool id_positive) {
    std::vector<double> pos, neg;
    for (const auto& row : table) {
        const double score = id_positive ? row.score : -row.score;
        (row.is_id == id_positive ? pos : neg).push_back(score);
    }
    if (pos.empty() || neg.empty())
        throw std::invalid_argument("aupr: need at least one sample of each class");

    std::vector<double> all;
    all.reserve(pos.size() + neg.size());
    all.insert(all.end(), pos.begin(), pos.end());
    all.insert(all.end(), neg.begin(), neg.end());
    const auto thresholds = distinct_sorted_desc(std::move(all));

    std::sort(pos.begin(), pos.end(), std::greater<>());
    std::sort(neg.begin(), neg.end(), std::greater<>());
    const double n_pos = static_cast<double>(pos.size());

    std::size_t tp = 0, fp = 0;
    double area = 0.0;
    double prev_recall = 0.0;
    for (double delta : thresholds) {
        while (tp < pos.size() && pos[tp] >= delta) ++tp;
        while (fp < neg.size() && neg[fp] >= delta) ++fp;
        const double recall = static_cast<double>(tp) / n_pos;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

double ccr_at_fpr(const ScoreTable& table, double n, bool* granularity_hit) {
    if (granularity_hit) *granularity_hit = false;
    if (!(n >= 0.0 && n <= 1.0)) throw std::invalid_argument("ccr_at_fpr: n must be in [0,1]");
    auto s = split_scores(table);

    const auto ood_desc = distinct_sorted_desc(s.ood);
    std::sort(s.ood.begin(), s.ood.end(), std::greater<>());
    const double n_ood = static_cast<double>(s.ood.size());

    // Walk OOD thresholds descending; keep the smallest one whose FPR stays <= n.
    bool found = false;
    double delta_star = 0.0;
    std::size_t ood_ge = 0;
    for (double delta : ood_desc) {
        while (ood_ge < s.ood.size() && s.ood[ood_ge] >= delta) ++ood_ge;
        if (static_cast<double>(ood_ge) / n_ood <= n) {
            found = true;
            delta_star = delta;
        } else {
            break;
        }
    }

    double correct = 0.0;
    if (found) {
        for (const auto& row : table)
            if (row.is_id && row.score >= delta_star && row.pred_class == row.true_class)
                correct += 1.0;
    } else {
        // n below the 1/|OOD| resolution: most permissive threshold with FPR=0.
        if (granularity_hit) *granularity_hit = true;
        const double max_ood = ood_desc.front();
        for (const auto& row : table)
            if (row.is_id && row.score > max_ood && row.pred_class == row.true_class)
                correct += 1.0;
    }
    return correct / static_cast<double>(s.id.size());
}

double accuracy(const ScoreTable& table) {
    std::size_t n_id = 0, correct = 0;
    for (const auto& row : table) {
        if (!row.is_id) continue;
        ++n_id;
        if (row.pred_class == row.true_class) ++correct;
    }
    if (n_id == 0) throw std::invalid_argument("accuracy: no ID samples");
    return static_cast<double>(correct) / static_cast<double>(n_id);
}

MetricsReport compute_metrics(const ScoreTable& table) {
    MetricsReport r;
    r.fpr95 = fpr_at_tpr(table, 0.95);
    r.auroc = auroc(table);
    r.aupr_in = aupr(table, /*id_positive=*/true);
    r.aupr_out = aupr(table, /*id_positive=*/false);
    for (std::size_t i = 0; i < kCcrLevels.size(); ++i)
        r.ccr_at_fpr[i] = ccr_at_fpr(table, kCcrLevels[i]);
    r.accuracy = accuracy(table);
    return r;
}

MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
    MetricsReport m;
    if (reports.empty()) return m;
    const double inv = 1.0 / static_cast<double>(reports.size());
    for (const auto& r : reports) {
        m.fpr95 += r.fpr95 * inv;
        m.auroc += r.auroc * inv;
        m.aupr_in += r.aupr_in * inv;
        m.aupr_out += r.aupr_out * inv;
        for (std::size_t i = 0; i < kCcrLevels.size(); ++i)
            m.ccr_at_fpr[i] += r.ccr_at_fpr[i] * inv;
        m.accuracy += r.accuracy * inv;
    }
    return m;
}

} // namespace udg
