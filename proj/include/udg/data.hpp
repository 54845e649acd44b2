#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "udg/matrix.hpp"
#include "udg/rng.hpp"

namespace udg {

// Label byte reserved for samples without a class (unlabeled / OOD records).
inline constexpr unsigned char kNoLabelByte = 255;

struct LabeledSet {
    Matrix samples;               // N x d
    std::vector<int> labels;      // class per sample, in [0, n_classes)
    std::vector<int> sample_ids;  // globally unique
};

struct UnlabeledSet {
    Matrix samples;
    std::vector<int> sample_ids;
    std::vector<std::uint8_t> id_flags; // ground truth for synthetic audits
    bool has_ground_truth = false;
};

struct TestSet {
    std::string name;
    Matrix samples;
    std::vector<int> true_class;        // -1 when unknown
    std::vector<std::uint8_t> id_flags; // 1 = ID, 0 = OOD
    std::vector<int> sample_ids;
};

struct SyntheticSpec {
    std::size_t dim = 16;
    std::size_t n_id_classes = 5;
    std::size_t n_ood_clusters = 5;
    std::size_t samples_per_cluster = 500;
    double cluster_separation = 10.0;
    double noise_sigma = 1.0;
    double unlabeled_id_fraction = 0.3;
    // OOD clusters present only in the test set, never in the unlabeled mix.
    std::size_t n_ood_holdout = 0;
    // 0 means samples_per_cluster/5 (min 1).
    std::size_t test_per_cluster = 0;
    std::uint64_t seed = 1;
};

struct SyntheticData {
    LabeledSet labeled;
    UnlabeledSet unlabeled;
    TestSet test;
};

// Isotropic Gaussian clusters around orthogonal directions scaled by
// cluster_separation. ID classes appear in the labeled set, in the unlabeled
// mix (making up unlabeled_id_fraction of it), and in the test split; OOD
// clusters appear in the unlabeled mix (minus holdouts) and in the test
// split. Deterministic in spec.seed.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// CIFAR binary: records of 1 label byte (0-9) + 3072 pixel bytes (R, G, B
// planes, 32x32 row-major). Pixels scaled to [0,1], then per-channel
// normalized as (x - mean_c) / std_c.
LabeledSet read_cifar_binary(const std::string& path,
                             const std::array<double, 3>& channel_mean = {0.0, 0.0, 0.0},
                             const std::array<double, 3>& channel_std = {1.0, 1.0, 1.0});

// Same record-per-sample layout with a float64 payload: 1 label byte
// (kNoLabelByte when classless) + dim little-endian doubles.
void write_f64_records(const std::string& path, const Matrix& samples,
                       const std::vector<int>& labels);
void read_f64_records(const std::string& path, std::size_t dim, Matrix& samples,
                      std::vector<int>& labels);

// Sidecar ground truth: header sample_id,is_id; one row per sample.
void write_truth_csv(const std::string& path, const std::vector<std::uint8_t>& id_flags);
std::vector<std::uint8_t> read_truth_csv(const std::string& path);

// Manifest lines: <dataset_name>/<record_index> <ID|OOD> [class_label].
// '#' starts a comment. Unknown datasets or out-of-range indices raise an
// error listing every offender.
void apply_split_manifest(std::vector<TestSet>& test_sets, const std::string& manifest_path);
void apply_split_manifest_text(std::vector<TestSet>& test_sets, const std::string& text,
                               const std::string& origin);

// Epoch-seeded shuffle; the final short batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::uint64_t epoch);

// Independent loader that restarts (with a fresh shuffle) when exhausted.
class CyclingBatcher {
public:
    CyclingBatcher(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                   std::uint64_t epoch);
    std::vector<std::size_t> next();

private:
    void reshuffle();

    std::size_t n_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    std::uint64_t epoch_;
    std::uint64_t wraps_ = 0;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
};

} // namespace udg
