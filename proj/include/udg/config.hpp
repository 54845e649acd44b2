#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "udg/data.hpp"
#include "udg/detection.hpp"
#include "udg/trainer.hpp"

namespace udg {

// key = value per line, '#' comments, dotted keys for nesting.
class KvConfig {
public:
    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_text(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key) const; // comma separated
    std::vector<double> get_double_list(const std::string& key) const;

    // Entries whose key starts with prefix, in key order.
    std::vector<std::pair<std::string, std::string>> items_with_prefix(
        const std::string& prefix) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

struct TestSetSource {
    std::string name;
    std::string path;
    std::string truth_path;   // optional sidecar sample_id,is_id csv
    std::string default_flag; // "ID" or "OOD"; empty = derive from label bytes
};

struct RunConfig {
    TrainConfig train;
    std::vector<DetectorConfig> detectors;

    bool synthetic_source = true;
    SyntheticSpec synthetic;

    // file mode
    std::string data_format = "f64"; // "f64" or "cifar"
    std::size_t data_dim = 0;        // required for f64 files
    std::string labeled_path;
    std::string unlabeled_path;
    std::string unlabeled_truth_path;
    std::string manifest_path;
    std::array<double, 3> norm_mean = {0.0, 0.0, 0.0};
    std::array<double, 3> norm_std = {1.0, 1.0, 1.0};
    std::vector<TestSetSource> test_sources;

    std::string output_dir = "run";
    std::size_t checkpoint_every = 0;
    bool grouping_dump = false;
    bool eval_oracle_scores = false;
    bool eval_score_dump = false;

    // sweep axes
    std::vector<long long> sweep_k;
    std::vector<double> sweep_tau;
    std::vector<std::string> sweep_filter;
    std::vector<double> sweep_odin_temperatures;
    std::vector<double> sweep_odin_epsilons;
};

// Parses, validates (all referenced paths must exist), and applies the
// UDG_SEED environment override.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_kv(const KvConfig& kv);

// Exact resolved values, one key per line, sorted; suitable for byte-stable
// diffing and for re-running the experiment.
std::string resolved_config_text(const RunConfig& cfg);

struct LoadedData {
    LabeledSet labeled;
    UnlabeledSet unlabeled;
    std::vector<TestSet> test_sets;
};

LoadedData load_datasets(const RunConfig& cfg);

} // namespace udg
