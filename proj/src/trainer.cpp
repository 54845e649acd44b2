#include "udg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "udg/errors.hpp"
#include "udg/kmeans.hpp"
#include "udg/report.hpp"

namespace udg {

namespace {

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), m.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* src = m.row(rows[i]);
        double* dst = out.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) dst[j] = src[j];
    }
    return out;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
    if (!a.rows) return b;
    if (!b.rows) return a;
    if (a.cols != b.cols) throw std::invalid_argument("vstack: column mismatch");
    Matrix out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return out;
}

void validate(const TrainConfig& c, const LabeledSet& labeled, const UnlabeledSet& unlabeled) {
    if (c.epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");
    if (c.batch_labeled == 0 || c.batch_unlabeled == 0)
        throw std::invalid_argument("train: batch sizes must be >= 1");
    if (c.filter.tau < 0.0 || c.filter.tau > 1.0)
        throw std::invalid_argument("train: tau must be in [0,1]");
    if (c.filter.k_groups < 1) throw std::invalid_argument("train: k_groups must be >= 1");
    if (c.weights.lambda_u < 0.0 || c.weights.lambda_a < 0.0)
        throw std::invalid_argument("train: loss weights must be >= 0");
    if (labeled.samples.rows == 0) throw std::invalid_argument("train: empty labeled set");
    if (unlabeled.samples.rows > 0 && unlabeled.samples.cols != labeled.samples.cols)
        throw std::invalid_argument("train: labeled/unlabeled dimensionality differs");
    if (labeled.labels.size() != labeled.samples.rows)
        throw std::invalid_argument("train: labeled set label count mismatch");
}

} // namespace

TrainResult train(const TrainConfig& config, const LabeledSet& labeled,
                  const UnlabeledSet& unlabeled, const TrainHooks& hooks) {
    validate(config, labeled, unlabeled);

    const std::size_t n_l = labeled.samples.rows;
    const std::size_t n_u = unlabeled.samples.rows;
    const std::size_t n_total = n_l + n_u;
    const Matrix all = vstack(labeled.samples, unlabeled.samples);

    int n_classes = 0;
    for (int y : labeled.labels) n_classes = std::max(n_classes, y + 1);
    if (n_classes < 1) throw std::invalid_argument("train: no valid labels");

    LabelMap original_labeled;
    for (std::size_t i = 0; i < n_l; ++i) original_labeled[static_cast<int>(i)] = labeled.labels[i];

    std::size_t truly_id_unlabeled = 0;
    if (unlabeled.has_ground_truth)
        for (auto f : unlabeled.id_flags) truly_id_unlabeled += f ? 1 : 0;

    Rng init_rng(derive_seed(config.seed, 1));
    TrainResult result{
        DualHeadNetwork(all.cols, config.hidden_widths, static_cast<std::size_t>(n_classes),
                        static_cast<std::size_t>(config.filter.k_groups), init_rng),
        {}};
    DualHeadNetwork& net = result.net;
    SgdOptimizer optimizer(net.parameters(), config.momentum, config.weight_decay);

    const bool need_grouping =
        config.use_l_a || (config.use_idf && config.filter.strategy == FilterStrategy::UDG);
    const FilterStrategy effective_filter =
        config.use_idf ? config.filter.strategy : FilterStrategy::OFF;

    LabelMap previous_labeled = original_labeled; // previous epoch's labeled set

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lr = cosine_lr(epoch - 1, config.epochs, config.lr0);

        // Full-dataset forward in evaluation mode; grouping precedes loss work.
        const Matrix features = net.extract_features(all);
        if (!all_finite(features))
            throw NumericError("train: non-finite features at epoch " + std::to_string(epoch));

        std::vector<int> assignments;
        double sse = -1.0;
        if (need_grouping) {
            const KmeansResult km =
                kmeans(l2_normalize_rows(features), config.filter.k_groups,
                       derive_seed(derive_seed(config.seed, 2), epoch), config.kmeans_max_iters);
            assignments = km.assignments;
            sse = km.sse_history.empty() ? 0.0 : km.sse_history.back();
        }

        // Filtering. The union inside each filter is against the ORIGINAL
        // labeled set; previous pseudo-labels only survive via the purity
        // reference (error correction).
        FilterResult filt;
        const bool filter_active =
            effective_filter != FilterStrategy::OFF && epoch >= config.filter_start_epoch;
        if (filter_active && effective_filter == FilterStrategy::UDG) {
            const auto groups = group_membership(assignments, config.filter.k_groups);
            const Matrix purity = group_purity(groups, previous_labeled, n_classes);
            filt = idf_filter(groups, purity, original_labeled, n_total, config.filter.tau);
        } else if (filter_active) {
            std::vector<std::size_t> unlabeled_rows(n_u);
            std::vector<int> unlabeled_ids(n_u);
            for (std::size_t i = 0; i < n_u; ++i) {
                unlabeled_rows[i] = n_l + i;
                unlabeled_ids[i] = static_cast<int>(n_l + i);
            }
            const Matrix posteriors =
                softmax_rows(net.class_logits(take_rows(features, unlabeled_rows)));
            filt = effective_filter == FilterStrategy::THRESH
                       ? thresh_filter(posteriors, unlabeled_ids, original_labeled, n_total,
                                       config.filter.tau)
                       : sort_filter(posteriors, unlabeled_ids, original_labeled, n_total,
                                     config.filter.tau);
        } else {
            filt = no_filter(original_labeled, n_total);
        }

        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        log.labeled_size = filt.expanded_labeled.size();
        log.filtered_count = filt.filtered_count;
        log.grouping_sse = sse;
        if (unlabeled.has_ground_truth && filter_active) {
            std::size_t hit = 0;
            for (const auto& [id, label] : filt.expanded_labeled) {
                (void)label;
                if (id >= static_cast<int>(n_l) &&
                    unlabeled.id_flags[static_cast<std::size_t>(id) - n_l])
                    ++hit;
            }
            log.idf_precision = filt.filtered_count
                                    ? static_cast<double>(hit) /
                                          static_cast<double>(filt.filtered_count)
                                    : 1.0;
            log.idf_recall = truly_id_unlabeled
                                 ? static_cast<double>(hit) / static_cast<double>(truly_id_unlabeled)
                                 : 1.0;
        }

        if (hooks.grouping_dump && need_grouping) {
            for (std::size_t i = 0; i < n_total; ++i) {
                const auto it = filt.expanded_labeled.find(static_cast<int>(i));
                *hooks.grouping_dump << epoch << ',' << i << ',' << assignments[i] << ','
                                     << (it == filt.expanded_labeled.end() ? -1 : it->second)
                                     << '\n';
            }
        }

        // Minibatch optimization over the expanded labeled set and the rest.
        std::vector<std::size_t> labeled_rows;
        std::vector<int> labeled_targets;
        labeled_rows.reserve(filt.expanded_labeled.size());
        for (const auto& [id, label] : filt.expanded_labeled) {
            labeled_rows.push_back(static_cast<std::size_t>(id));
            labeled_targets.push_back(label);
        }

        const auto labeled_batches =
            make_batches(labeled_rows.size(), config.batch_labeled,
                         derive_seed(config.seed, 3), epoch);
        CyclingBatcher unlabeled_batcher(filt.remaining_unlabeled.size(), config.batch_unlabeled,
                                         derive_seed(config.seed, 4), epoch);

        const double lambda_u = config.use_l_co ? config.weights.lambda_u : 0.0;
        const double lambda_a = config.use_l_a ? config.weights.lambda_a : 0.0;
        LossWeights effective{lambda_u, lambda_a};

        double sum_ci = 0.0, sum_co = 0.0, sum_a = 0.0;
        LossDiagnostics diag;
        std::size_t steps = 0;

        for (const auto& batch_index : labeled_batches) {
            net.zero_grad();

            std::vector<std::size_t> rows_l(batch_index.size());
            std::vector<int> y_l(batch_index.size());
            std::vector<int> g_l(batch_index.size());
            for (std::size_t i = 0; i < batch_index.size(); ++i) {
                rows_l[i] = labeled_rows[batch_index[i]];
                y_l[i] = labeled_targets[batch_index[i]];
                if (need_grouping) g_l[i] = assignments[rows_l[i]];
            }
            const Matrix x_l = take_rows(all, rows_l);
            const auto trace_l = net.forward_trace(x_l);
            const Matrix p_l = softmax_rows(trace_l.class_logits);

            double l_ci = 0.0;
            Matrix d_class_l;
            if (config.use_l_ci) {
                l_ci = classification_loss(p_l, y_l, &diag);
                d_class_l = classification_loss_grad(p_l, y_l);
            }

            // Unlabeled batch (may be empty when everything got filtered).
            std::vector<std::size_t> rows_u;
            std::vector<int> g_u;
            for (std::size_t idx : unlabeled_batcher.next()) {
                const std::size_t row =
                    static_cast<std::size_t>(filt.remaining_unlabeled[idx]);
                rows_u.push_back(row);
                if (need_grouping) g_u.push_back(assignments[row]);
            }
            Matrix x_u;
            DualHeadNetwork::Trace trace_u;
            Matrix p_u;
            double l_co = 0.0;
            Matrix d_class_u;
            if (!rows_u.empty()) {
                x_u = take_rows(all, rows_u);
                trace_u = net.forward_trace(x_u);
                p_u = softmax_rows(trace_u.class_logits);
                if (config.use_l_co) {
                    l_co = entropy_oe_loss(p_u, &diag);
                    d_class_u = entropy_oe_loss_grad(p_u);
                    for (double& v : d_class_u.data) v *= lambda_u;
                }
            }

            // Auxiliary deep-clustering loss over the combined batch.
            double l_a = 0.0;
            Matrix d_group_l, d_group_u;
            if (config.use_l_a && need_grouping) {
                const Matrix q_l = softmax_rows(trace_l.group_logits);
                Matrix q_all = q_l;
                std::vector<int> g_all = g_l;
                if (!rows_u.empty()) {
                    const Matrix q_u = softmax_rows(trace_u.group_logits);
                    q_all = vstack(q_l, q_u);
                    g_all.insert(g_all.end(), g_u.begin(), g_u.end());
                }
                l_a = auxiliary_loss(q_all, g_all, &diag);
                Matrix d_all = auxiliary_loss_grad(q_all, g_all);
                for (double& v : d_all.data) v *= lambda_a;
                d_group_l = Matrix(q_l.rows, q_l.cols);
                std::copy(d_all.data.begin(),
                          d_all.data.begin() + static_cast<std::ptrdiff_t>(d_group_l.data.size()),
                          d_group_l.data.begin());
                if (!rows_u.empty()) {
                    d_group_u = Matrix(rows_u.size(), q_l.cols);
                    std::copy(d_all.data.begin() +
                                  static_cast<std::ptrdiff_t>(d_group_l.data.size()),
                              d_all.data.end(), d_group_u.data.begin());
                }
            }

            const LossBreakdown step_loss =
                total_loss(config.use_l_ci ? l_ci : 0.0, l_co, l_a, effective);
            if (!std::isfinite(step_loss.total)) {
                result.logs.push_back(log);
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
            }

            net.backward(trace_l, d_class_l, d_group_l);
            if (!rows_u.empty() && (!d_class_u.empty() || !d_group_u.empty()))
                net.backward(trace_u, d_class_u, d_group_u);
            optimizer.step(lr);

            sum_ci += config.use_l_ci ? l_ci : 0.0;
            sum_co += l_co;
            sum_a += l_a;
            ++steps;
        }

        if (steps > 0) {
            const double inv = 1.0 / static_cast<double>(steps);
            log.loss = total_loss(sum_ci * inv, sum_co * inv, sum_a * inv, effective);
        }
        log.clamp_count = diag.clamp_count;
        result.logs.push_back(log);
        if (hooks.epoch_log) *hooks.epoch_log << epoch_log_to_json(log).dump() << '\n';
        if (hooks.checkpoint_every && hooks.on_checkpoint && epoch % hooks.checkpoint_every == 0)
            hooks.on_checkpoint(epoch, net);

        previous_labeled = std::move(filt.expanded_labeled);
    }
    return result;
}

ScoreTable build_score_table(const DualHeadNetwork& net, const TestSet& test,
                             const DetectorConfig& detector, bool oracle_scores) {
    const Matrix posteriors = net.class_posterior(test.samples);
    std::vector<double> scores;
    if (oracle_scores) {
        scores.resize(test.samples.rows);
        for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = test.id_flags[i] ? 1.0 : 0.0;
    } else {
        scores = detector_scores(net, test.samples, detector);
    }
    ScoreTable table(test.samples.rows);
    for (std::size_t i = 0; i < table.size(); ++i) {
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < posteriors.cols; ++c)
            if (posteriors(i, c) > posteriors(i, argmax)) argmax = c;
        table[i] = {test.sample_ids.empty() ? static_cast<int>(i) : test.sample_ids[i],
                    scores[i], test.id_flags[i] != 0, test.true_class[i],
                    static_cast<int>(argmax)};
    }
    return table;
}

EvalReport evaluate(const DualHeadNetwork& net, const std::vector<TestSet>& test_sets,
                    const std::vector<DetectorConfig>& detectors, bool oracle_scores) {
    if (test_sets.empty()) throw std::invalid_argument("evaluate: no test sets");
    EvalReport report;
    for (const auto& det : detectors) {
        std::vector<MetricsReport> all_reports;
        for (const auto& test : test_sets) {
            const ScoreTable table = build_score_table(net, test, det, oracle_scores);
            const MetricsReport r = compute_metrics(table);
            report.per_dataset[det.name()][test.name] = r;
            all_reports.push_back(r);
        }
        report.mean[det.name()] = mean_report(all_reports);
    }
    return report;
}

} // namespace udg
