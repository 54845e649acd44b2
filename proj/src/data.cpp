#include "udg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "udg/errors.hpp"

namespace udg {

namespace {

constexpr std::size_t kCifarPixels = 3072;
constexpr std::size_t kCifarRecord = kCifarPixels + 1;

void check_spec(const SyntheticSpec& spec) {
    if (spec.dim == 0 || spec.n_id_classes == 0 || spec.samples_per_cluster == 0)
        throw std::invalid_argument("synthetic: dim, n_id_classes, samples_per_cluster must be >= 1");
    if (spec.cluster_separation <= 0.0)
        throw std::invalid_argument("synthetic: cluster_separation must be > 0");
    if (spec.noise_sigma < 0.0) throw std::invalid_argument("synthetic: noise_sigma must be >= 0");
    if (spec.unlabeled_id_fraction < 0.0 || spec.unlabeled_id_fraction > 1.0)
        throw std::invalid_argument("synthetic: unlabeled_id_fraction must be in [0,1]");
    if (spec.n_ood_holdout > spec.n_ood_clusters)
        throw std::invalid_argument("synthetic: n_ood_holdout exceeds n_ood_clusters");
}

// Rows are unit vectors; orthonormal while the dimension allows, random unit
// vectors beyond that.
Matrix cluster_directions(std::size_t n_clusters, std::size_t dim, Rng& rng) {
    Matrix dirs(n_clusters, dim);
    for (std::size_t c = 0; c < n_clusters; ++c) {
        double* row = dirs.row(c);
        for (int attempt = 0; attempt < 64; ++attempt) {
            for (std::size_t j = 0; j < dim; ++j) row[j] = rng.normal();
            if (c < dim) {
                for (std::size_t prev = 0; prev < c; ++prev) {
                    const double* q = dirs.row(prev);
                    double dot = 0.0;
                    for (std::size_t j = 0; j < dim; ++j) dot += row[j] * q[j];
                    for (std::size_t j = 0; j < dim; ++j) row[j] -= dot * q[j];
                }
            }
            double norm2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) norm2 += row[j] * row[j];
            if (norm2 > 1e-12) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (std::size_t j = 0; j < dim; ++j) row[j] *= inv;
                break;
            }
        }
    }
    return dirs;
}

void append_cluster_samples(Matrix& out, const double* center, std::size_t count, double sigma,
                            std::size_t dim, Rng& rng) {
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t r = out.rows;
        out.rows += 1;
        out.data.resize(out.rows * dim);
        double* row = out.row(r);
        for (std::size_t j = 0; j < dim; ++j) row[j] = center[j] + sigma * rng.normal();
    }
}

} // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    check_spec(spec);
    const std::size_t n_clusters = spec.n_id_classes + spec.n_ood_clusters;
    const std::size_t spc = spec.samples_per_cluster;
    const std::size_t test_pc =
        spec.test_per_cluster > 0 ? spec.test_per_cluster : std::max<std::size_t>(1, spc / 5);

    Rng center_rng = Rng(spec.seed).fork(0x636e7472);
    Matrix dirs = cluster_directions(n_clusters, spec.dim, center_rng);
    Matrix centers(n_clusters, spec.dim);
    for (std::size_t c = 0; c < n_clusters; ++c)
        for (std::size_t j = 0; j < spec.dim; ++j)
            centers(c, j) = spec.cluster_separation * dirs(c, j);

    SyntheticData out;
    out.labeled.samples = Matrix(0, spec.dim);
    out.unlabeled.samples = Matrix(0, spec.dim);
    out.test.samples = Matrix(0, spec.dim);
    out.test.name = "synthetic";

    // D_L: samples_per_cluster per ID class.
    Rng labeled_rng = Rng(spec.seed).fork(0x6c61626c);
    for (std::size_t c = 0; c < spec.n_id_classes; ++c) {
        append_cluster_samples(out.labeled.samples, centers.row(c), spc, spec.noise_sigma,
                               spec.dim, labeled_rng);
        for (std::size_t i = 0; i < spc; ++i) out.labeled.labels.push_back(static_cast<int>(c));
    }

    // D_U: OOD clusters minus holdouts, plus an ID share so that ID makes up
    // unlabeled_id_fraction of D_U.
    const std::size_t n_ood_in_u = spec.n_ood_clusters - spec.n_ood_holdout;
    const std::size_t n_u_ood = n_ood_in_u * spc;
    std::size_t n_u_id = 0;
    const double f = spec.unlabeled_id_fraction;
    if (f >= 1.0)
        n_u_id = spec.n_id_classes * spc;
    else if (f > 0.0)
        n_u_id = static_cast<std::size_t>(std::llround(f / (1.0 - f) * static_cast<double>(n_u_ood)));

    Rng unlabeled_rng = Rng(spec.seed).fork(0x756e6c62);
    for (std::size_t c = 0; c < spec.n_id_classes; ++c) {
        const std::size_t count = n_u_id / spec.n_id_classes +
                                  (c < n_u_id % spec.n_id_classes ? 1 : 0);
        append_cluster_samples(out.unlabeled.samples, centers.row(c), count, spec.noise_sigma,
                               spec.dim, unlabeled_rng);
        for (std::size_t i = 0; i < count; ++i) out.unlabeled.id_flags.push_back(1);
    }
    for (std::size_t c = 0; c < n_ood_in_u; ++c) {
        append_cluster_samples(out.unlabeled.samples, centers.row(spec.n_id_classes + c), spc,
                               spec.noise_sigma, spec.dim, unlabeled_rng);
        for (std::size_t i = 0; i < spc; ++i) out.unlabeled.id_flags.push_back(0);
    }
    out.unlabeled.has_ground_truth = true;

    // Test: every cluster contributes, including held-out OOD clusters.
    Rng test_rng = Rng(spec.seed).fork(0x74657374);
    for (std::size_t c = 0; c < spec.n_id_classes; ++c) {
        append_cluster_samples(out.test.samples, centers.row(c), test_pc, spec.noise_sigma,
                               spec.dim, test_rng);
        for (std::size_t i = 0; i < test_pc; ++i) {
            out.test.true_class.push_back(static_cast<int>(c));
            out.test.id_flags.push_back(1);
        }
    }
    for (std::size_t c = 0; c < spec.n_ood_clusters; ++c) {
        append_cluster_samples(out.test.samples, centers.row(spec.n_id_classes + c), test_pc,
                               spec.noise_sigma, spec.dim, test_rng);
        for (std::size_t i = 0; i < test_pc; ++i) {
            out.test.true_class.push_back(-1);
            out.test.id_flags.push_back(0);
        }
    }

    int next_id = 0;
    for (std::size_t i = 0; i < out.labeled.samples.rows; ++i)
        out.labeled.sample_ids.push_back(next_id++);
    for (std::size_t i = 0; i < out.unlabeled.samples.rows; ++i)
        out.unlabeled.sample_ids.push_back(next_id++);
    for (std::size_t i = 0; i < out.test.samples.rows; ++i)
        out.test.sample_ids.push_back(next_id++);
    return out;
}

LabeledSet read_cifar_binary(const std::string& path, const std::array<double, 3>& channel_mean,
                             const std::array<double, 3>& channel_std) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw ArtifactError("cifar: cannot open: " + path);
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size == 0 || size % kCifarRecord != 0)
        throw ArtifactError("cifar: file length " + std::to_string(size) +
                            " not a multiple of 3073: " + path);
    const std::size_t n = size / kCifarRecord;
    in.seekg(0);

    LabeledSet set;
    set.samples = Matrix(n, kCifarPixels);
    set.labels.resize(n);
    set.sample_ids.resize(n);
    std::vector<unsigned char> record(kCifarRecord);
    for (std::size_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(kCifarRecord));
        if (!in) throw ArtifactError("cifar: short read: " + path);
        if (record[0] > 9)
            throw ArtifactError("cifar: label byte " + std::to_string(record[0]) +
                                " out of range in record " + std::to_string(i));
        set.labels[i] = record[0];
        set.sample_ids[i] = static_cast<int>(i);
        double* row = set.samples.row(i);
        for (std::size_t j = 0; j < kCifarPixels; ++j) {
            const std::size_t channel = j / 1024;
            const double v = static_cast<double>(record[j + 1]) / 255.0;
            row[j] = (v - channel_mean[channel]) / channel_std[channel];
        }
    }
    return set;
}

void write_f64_records(const std::string& path, const Matrix& samples,
                       const std::vector<int>& labels) {
    if (labels.size() != samples.rows)
        throw std::invalid_argument("write_f64_records: label count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("records: cannot open for write: " + path);
    for (std::size_t i = 0; i < samples.rows; ++i) {
        const int label = labels[i];
        const unsigned char byte =
            label < 0 ? kNoLabelByte : static_cast<unsigned char>(label);
        out.write(reinterpret_cast<const char*>(&byte), 1);
        out.write(reinterpret_cast<const char*>(samples.row(i)),
                  static_cast<std::streamsize>(samples.cols * sizeof(double)));
    }
    if (!out) throw ArtifactError("records: write failed: " + path);
}

void read_f64_records(const std::string& path, std::size_t dim, Matrix& samples,
                      std::vector<int>& labels) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw ArtifactError("records: cannot open: " + path);
    const std::size_t record = 1 + dim * sizeof(double);
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size % record != 0)
        throw ArtifactError("records: file length " + std::to_string(size) +
                            " not a multiple of record size " + std::to_string(record) + ": " +
                            path);
    const std::size_t n = size / record;
    in.seekg(0);
    samples = Matrix(n, dim);
    labels.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char byte = 0;
        in.read(reinterpret_cast<char*>(&byte), 1);
        in.read(reinterpret_cast<char*>(samples.row(i)),
                static_cast<std::streamsize>(dim * sizeof(double)));
        if (!in) throw ArtifactError("records: short read: " + path);
        labels[i] = byte == kNoLabelByte ? -1 : static_cast<int>(byte);
    }
}

void write_truth_csv(const std::string& path, const std::vector<std::uint8_t>& id_flags) {
    std::ofstream out(path);
    if (!out) throw ArtifactError("truth csv: cannot open for write: " + path);
    out << "sample_id,is_id\n";
    for (std::size_t i = 0; i < id_flags.size(); ++i)
        out << i << ',' << (id_flags[i] ? 1 : 0) << '\n';
}

std::vector<std::uint8_t> read_truth_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArtifactError("truth csv: cannot open: " + path);
    std::vector<std::uint8_t> flags;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ArtifactError("truth csv: malformed line: " + line);
        flags.push_back(line.substr(comma + 1) == "1" ? 1 : 0);
    }
    return flags;
}

void apply_split_manifest_text(std::vector<TestSet>& test_sets, const std::string& text,
                               const std::string& origin) {
    std::vector<std::string> offenders;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string key, flag;
        if (!(fields >> key)) continue; // blank line
        if (!(fields >> flag) || (flag != "ID" && flag != "OOD")) {
            offenders.push_back(origin + ":" + std::to_string(lineno) + ": malformed record '" +
                                line + "'");
            continue;
        }
        int label = -1;
        fields >> label;

        const auto slash = key.rfind('/');
        const std::string name = slash == std::string::npos ? "" : key.substr(0, slash);
        TestSet* target = nullptr;
        for (auto& set : test_sets)
            if (set.name == name) target = &set;
        std::size_t index = 0;
        bool index_ok = slash != std::string::npos;
        if (index_ok) {
            try {
                index = std::stoul(key.substr(slash + 1));
            } catch (const std::exception&) {
                index_ok = false;
            }
        }
        if (!target || !index_ok || index >= target->id_flags.size()) {
            offenders.push_back(origin + ":" + std::to_string(lineno) + ": unknown sample '" +
                                key + "'");
            continue;
        }
        target->id_flags[index] = flag == "ID" ? 1 : 0;
        if (flag == "ID" && label >= 0) target->true_class[index] = label;
        if (flag == "OOD") target->true_class[index] = -1;
    }
    if (!offenders.empty()) {
        std::string msg = "manifest: " + std::to_string(offenders.size()) + " bad record(s):";
        for (const auto& o : offenders) msg += "\n  " + o;
        throw ArtifactError(msg);
    }
}

void apply_split_manifest(std::vector<TestSet>& test_sets, const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ArtifactError("manifest: cannot open: " + manifest_path);
    std::ostringstream text;
    text << in.rdbuf();
    apply_split_manifest_text(test_sets, text.str(), manifest_path);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be >= 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, epoch));
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

CyclingBatcher::CyclingBatcher(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                               std::uint64_t epoch)
    : n_(n), batch_size_(batch_size), seed_(seed), epoch_(epoch) {
    if (batch_size_ == 0) throw std::invalid_argument("CyclingBatcher: batch_size must be >= 1");
    reshuffle();
}

void CyclingBatcher::reshuffle() {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(derive_seed(derive_seed(seed_, epoch_), wraps_));
    rng.shuffle(order_);
    cursor_ = 0;
}

std::vector<std::size_t> CyclingBatcher::next() {
    if (n_ == 0) return {};
    if (cursor_ >= n_) {
        ++wraps_;
        reshuffle();
    }
    const std::size_t end = std::min(n_, cursor_ + batch_size_);
    std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                   order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return batch;
}

} // namespace udg
