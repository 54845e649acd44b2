#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "udg/data.hpp"
#include "udg/detection.hpp"
#include "udg/grouping.hpp"
#include "udg/losses.hpp"
#include "udg/metrics.hpp"
#include "udg/model.hpp"

namespace udg {

struct TrainConfig {
    std::size_t epochs = 30;
    double lr0 = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    std::size_t batch_labeled = 128;
    std::size_t batch_unlabeled = 256;
    LossWeights weights;
    FilterConfig filter;
    std::uint64_t seed = 1;
    // Ablation switches: each loss term and the filter are independently toggleable.
    bool use_l_ci = true;
    bool use_l_co = true;
    bool use_l_a = true;
    bool use_idf = true;
    std::size_t filter_start_epoch = 1;
    std::vector<std::size_t> hidden_widths = {64, 32};
    int kmeans_max_iters = 100;
};

struct EpochLog {
    std::size_t epoch = 0;
    LossBreakdown loss; // means over the epoch's steps
    double lr = 0.0;
    std::size_t labeled_size = 0;   // expanded labeled set size this epoch
    std::size_t filtered_count = 0; // pseudo-labeled this epoch
    double idf_precision = -1.0;    // -1 when ground truth unavailable
    double idf_recall = -1.0;
    double grouping_sse = -1.0; // -1 when grouping skipped
    std::size_t clamp_count = 0;
};

struct TrainHooks {
    std::ostream* epoch_log = nullptr;     // one JSON object per line
    std::ostream* grouping_dump = nullptr; // epoch,sample_id,group,pseudo_label
    std::size_t checkpoint_every = 0;      // 0 = never
    std::function<void(std::size_t epoch, const DualHeadNetwork&)> on_checkpoint;
};

struct TrainResult {
    DualHeadNetwork net;
    std::vector<EpochLog> logs;
};

// Per epoch: full-dataset feature extraction in evaluation mode, k-means
// grouping, purity against the previous epoch's labeled set, filtering
// against the ORIGINAL labeled set, then minibatch SGD on the weighted
// objective. Deterministic under config.seed.
TrainResult train(const TrainConfig& config, const LabeledSet& labeled,
                  const UnlabeledSet& unlabeled, const TrainHooks& hooks = {});

ScoreTable build_score_table(const DualHeadNetwork& net, const TestSet& test,
                             const DetectorConfig& detector, bool oracle_scores = false);

struct EvalReport {
    // detector name -> dataset name -> metrics
    std::map<std::string, std::map<std::string, MetricsReport>> per_dataset;
    // detector name -> mean across datasets
    std::map<std::string, MetricsReport> mean;
};

EvalReport evaluate(const DualHeadNetwork& net, const std::vector<TestSet>& test_sets,
                    const std::vector<DetectorConfig>& detectors, bool oracle_scores = false);

} // namespace udg
