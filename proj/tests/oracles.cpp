#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "udg/rng.hpp"

namespace udg::oracle {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("naive_matmul: shape mismatch");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
            c(i, j) = acc;
        }
    return c;
}

std::vector<double> finite_difference(const std::function<double()>& f,
                                      std::vector<double*> params, double h) {
    std::vector<double> grads(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double original = *params[i];
        *params[i] = original + h;
        const double up = f();
        *params[i] = original - h;
        const double down = f();
        *params[i] = original;
        grads[i] = (up - down) / (2.0 * h);
    }
    return grads;
}

double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& fd,
                     double floor) {
    if (analytic.size() != fd.size()) throw std::invalid_argument("gradient size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i], b = fd[i];
        const double scale = std::max(std::abs(a), std::abs(b));
        const double err = scale > floor ? std::abs(a - b) / scale : std::abs(a - b);
        worst = std::max(worst, err);
    }
    return worst;
}

double sse_of(const Matrix& points, const Matrix& centroids,
              const std::vector<int>& assignments) {
    double sse = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i)
        sse += squared_distance(points.row(i),
                                centroids.row(static_cast<std::size_t>(assignments[i])),
                                points.cols);
    return sse;
}

double exhaustive_kmeans_sse(const Matrix& points, int k) {
    const std::size_t n = points.rows;
    if (n > 12) throw std::invalid_argument("exhaustive_kmeans_sse: instance too large");
    std::vector<int> assignment(n, 0);
    double best = std::numeric_limits<double>::infinity();
    const auto total = static_cast<std::uint64_t>(std::pow(k, static_cast<double>(n)));
    for (std::uint64_t code = 0; code < total; ++code) {
        std::uint64_t c = code;
        for (std::size_t i = 0; i < n; ++i) {
            assignment[i] = static_cast<int>(c % static_cast<std::uint64_t>(k));
            c /= static_cast<std::uint64_t>(k);
        }
        Matrix centroids(static_cast<std::size_t>(k), points.cols);
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[static_cast<std::size_t>(assignment[i])];
            for (std::size_t j = 0; j < points.cols; ++j)
                centroids(static_cast<std::size_t>(assignment[i]), j) += points(i, j);
        }
        bool empty = false;
        for (int c2 = 0; c2 < k; ++c2) {
            if (counts[static_cast<std::size_t>(c2)] == 0) {
                empty = true;
                break;
            }
            for (std::size_t j = 0; j < points.cols; ++j)
                centroids(static_cast<std::size_t>(c2), j) /=
                    static_cast<double>(counts[static_cast<std::size_t>(c2)]);
        }
        if (empty) continue;
        best = std::min(best, sse_of(points, centroids, assignment));
    }
    return best;
}

namespace {

std::vector<double> distinct_scores_desc(const ScoreTable& table) {
    std::set<double, std::greater<>> values;
    for (const auto& row : table) values.insert(row.score);
    return {values.begin(), values.end()};
}

struct Counts {
    std::size_t id_ge = 0, ood_ge = 0, n_id = 0, n_ood = 0;
};

Counts count_at(const ScoreTable& table, double delta) {
    Counts c;
    for (const auto& row : table) {
        if (row.is_id) {
            ++c.n_id;
            if (row.score >= delta) ++c.id_ge;
        } else {
            ++c.n_ood;
            if (row.score >= delta) ++c.ood_ge;
        }
    }
    return c;
}

} // namespace

double fpr_at_tpr(const ScoreTable& table, double tpr_level) {
    for (double delta : distinct_scores_desc(table)) {
        const Counts c = count_at(table, delta);
        if (static_cast<double>(c.id_ge) / static_cast<double>(c.n_id) >= tpr_level)
            return static_cast<double>(c.ood_ge) / static_cast<double>(c.n_ood);
    }
    return 1.0;
}

double auroc_pairwise(const ScoreTable& table) {
    std::uint64_t greater = 0, equal = 0, pairs = 0;
    for (const auto& a : table) {
        if (!a.is_id) continue;
        for (const auto& b : table) {
            if (b.is_id) continue;
            ++pairs;
            if (a.score > b.score) ++greater;
            else if (a.score == b.score) ++equal;
        }
    }
    return (static_cast<double>(greater) + 0.5 * static_cast<double>(equal)) /
           static_cast<double>(pairs);
}

double aupr_scan(const ScoreTable& table, bool id_positive) {
    ScoreTable adjusted = table;
    if (!id_positive)
        for (auto& row : adjusted) row.score = -row.score;

    double area = 0.0, prev_recall = 0.0;
    std::size_t n_pos = 0;
    for (const auto& row : adjusted)
        if (row.is_id == id_positive) ++n_pos;
    for (double delta : distinct_scores_desc(adjusted)) {
        std::size_t tp = 0, fp = 0;
        for (const auto& row : adjusted) {
            if (row.score < delta) continue;
            if (row.is_id == id_positive) ++tp;
            else ++fp;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

double ccr_at_fpr_scan(const ScoreTable& table, double n) {
    std::vector<double> ood_scores;
    std::size_t n_id = 0, n_ood = 0;
    double max_ood = -std::numeric_limits<double>::infinity();
    for (const auto& row : table) {
        if (row.is_id) {
            ++n_id;
        } else {
            ++n_ood;
            ood_scores.push_back(row.score);
            max_ood = std::max(max_ood, row.score);
        }
    }
    std::sort(ood_scores.begin(), ood_scores.end(), std::greater<>());
    ood_scores.erase(std::unique(ood_scores.begin(), ood_scores.end()), ood_scores.end());

    bool found = false;
    double delta_star = 0.0;
    for (double delta : ood_scores) {
        std::size_t ood_ge = 0;
        for (const auto& row : table)
            if (!row.is_id && row.score >= delta) ++ood_ge;
        if (static_cast<double>(ood_ge) / static_cast<double>(n_ood) <= n) {
            found = true;
            delta_star = delta; // keep walking: we want the smallest qualifying
        } else {
            break;
        }
    }

    std::size_t correct = 0;
    for (const auto& row : table) {
        if (!row.is_id || row.pred_class != row.true_class) continue;
        if (found ? row.score >= delta_star : row.score > max_ood) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n_id);
}

double accuracy_count(const ScoreTable& table) {
    std::size_t n_id = 0, correct = 0;
    for (const auto& row : table) {
        if (!row.is_id) continue;
        ++n_id;
        if (row.pred_class == row.true_class) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n_id);
}

ScoreTable random_score_table(std::uint64_t seed, std::size_t max_n, int n_classes) {
    Rng rng(seed);
    // At least 2 ID and 2 OOD.
    const std::size_t n = 4 + rng.bounded(max_n > 4 ? max_n - 4 : 1);
    ScoreTable table(n);
    for (std::size_t i = 0; i < n; ++i) {
        table[i].sample_id = static_cast<int>(i);
        // Half the scores land on a coarse grid to force ties.
        if (rng.uniform() < 0.5)
            table[i].score = static_cast<double>(rng.bounded(12)) / 10.0;
        else
            table[i].score = rng.uniform();
        table[i].is_id = i < 2 ? true : (i < 4 ? false : rng.uniform() < 0.5);
        table[i].true_class =
            table[i].is_id ? static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n_classes)))
                           : -1;
        table[i].pred_class = rng.uniform() < 0.7 && table[i].is_id
                                  ? table[i].true_class
                                  : static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n_classes)));
    }
    return table;
}

} // namespace udg::oracle
