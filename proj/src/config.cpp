#include "udg/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "udg/errors.hpp"

namespace udg {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_path_exists(const std::string& path, const std::string& key) {
    if (!std::filesystem::exists(path))
        throw ConfigError("config: path for '" + key + "' does not exist: " + path);
}

} // namespace

KvConfig KvConfig::parse_text(const std::string& text, const std::string& origin) {
    KvConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + trimmed + "'");
        const std::string key = trim(trimmed.substr(0, eq));
        const std::string value = trim(trimmed.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = value;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_text(text.str(), path);
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string KvConfig::require_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
        throw ConfigError("config: missing required key '" + key + "'");
    return it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not a number: " + it->second);
    }
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not an integer: " + it->second);
    }
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not an unsigned integer: " + it->second);
    }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: " + v);
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    const auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<double> KvConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_list(key)) {
        try {
            out.push_back(std::stod(s));
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' has a non-numeric item: " + s);
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> KvConfig::items_with_prefix(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (auto it = values_.lower_bound(prefix); it != values_.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        out.emplace_back(it->first.substr(prefix.size()), it->second);
    }
    return out;
}

RunConfig run_config_from_kv(const KvConfig& kv) {
    RunConfig cfg;

    cfg.train.seed = kv.get_u64("run.seed", 1);
    if (const char* env = std::getenv("UDG_SEED")) {
        try {
            cfg.train.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("UDG_SEED is not an unsigned integer: " + std::string(env));
        }
    }
    cfg.output_dir = kv.get_string("run.output_dir", "run");
    cfg.checkpoint_every = static_cast<std::size_t>(kv.get_int("run.checkpoint_every", 0));
    cfg.grouping_dump = kv.get_bool("run.grouping_dump", false);

    cfg.train.epochs = static_cast<std::size_t>(kv.get_int("train.epochs", 30));
    cfg.train.lr0 = kv.get_double("train.lr0", 0.1);
    cfg.train.momentum = kv.get_double("train.momentum", 0.9);
    cfg.train.weight_decay = kv.get_double("train.weight_decay", 0.0005);
    cfg.train.batch_labeled = static_cast<std::size_t>(kv.get_int("train.batch_labeled", 128));
    cfg.train.batch_unlabeled = static_cast<std::size_t>(kv.get_int("train.batch_unlabeled", 256));
    cfg.train.weights.lambda_u = kv.get_double("train.lambda_u", 0.5);
    cfg.train.weights.lambda_a = kv.get_double("train.lambda_a", 0.1);
    cfg.train.use_l_ci = kv.get_bool("train.use_l_ci", true);
    cfg.train.use_l_co = kv.get_bool("train.use_l_co", true);
    cfg.train.use_l_a = kv.get_bool("train.use_l_a", true);
    cfg.train.use_idf = kv.get_bool("train.use_idf", true);
    cfg.train.filter_start_epoch =
        static_cast<std::size_t>(kv.get_int("train.filter_start_epoch", 1));
    cfg.train.kmeans_max_iters = static_cast<int>(kv.get_int("train.kmeans_max_iters", 100));
    cfg.train.hidden_widths.clear();
    for (double w : kv.has("train.hidden_widths")
                        ? kv.get_double_list("train.hidden_widths")
                        : std::vector<double>{64, 32})
        cfg.train.hidden_widths.push_back(static_cast<std::size_t>(w));

    cfg.train.filter.strategy = parse_filter_strategy(kv.get_string("filter.strategy", "UDG"));
    cfg.train.filter.tau = kv.get_double("filter.tau", 0.8);
    cfg.train.filter.k_groups = static_cast<int>(kv.get_int("filter.k_groups", 100));

    const std::string source = kv.require_string("data.source");
    if (source == "synthetic") {
        cfg.synthetic_source = true;
        cfg.synthetic.dim = static_cast<std::size_t>(kv.get_int("synthetic.dim", 16));
        cfg.synthetic.n_id_classes =
            static_cast<std::size_t>(kv.get_int("synthetic.n_id_classes", 5));
        cfg.synthetic.n_ood_clusters =
            static_cast<std::size_t>(kv.get_int("synthetic.n_ood_clusters", 5));
        cfg.synthetic.samples_per_cluster =
            static_cast<std::size_t>(kv.get_int("synthetic.samples_per_cluster", 500));
        cfg.synthetic.cluster_separation = kv.get_double("synthetic.cluster_separation", 10.0);
        cfg.synthetic.noise_sigma = kv.get_double("synthetic.noise_sigma", 1.0);
        cfg.synthetic.unlabeled_id_fraction =
            kv.get_double("synthetic.unlabeled_id_fraction", 0.3);
        cfg.synthetic.n_ood_holdout =
            static_cast<std::size_t>(kv.get_int("synthetic.n_ood_holdout", 0));
        cfg.synthetic.test_per_cluster =
            static_cast<std::size_t>(kv.get_int("synthetic.test_per_cluster", 0));
        cfg.synthetic.seed = kv.get_u64("synthetic.seed", cfg.train.seed);
    } else if (source == "files") {
        cfg.synthetic_source = false;
        cfg.data_format = kv.get_string("data.format", "f64");
        if (cfg.data_format != "f64" && cfg.data_format != "cifar")
            throw ConfigError("config: data.format must be 'f64' or 'cifar'");
        cfg.data_dim = static_cast<std::size_t>(kv.get_int("data.dim", 0));
        if (cfg.data_format == "f64" && cfg.data_dim == 0)
            throw ConfigError("config: missing required key 'data.dim'");
        cfg.labeled_path = kv.require_string("data.labeled");
        cfg.unlabeled_path = kv.get_string("data.unlabeled", "");
        cfg.unlabeled_truth_path = kv.get_string("data.unlabeled_truth", "");
        cfg.manifest_path = kv.get_string("data.manifest", "");
        const auto mean = kv.get_double_list("data.norm_mean");
        const auto stdv = kv.get_double_list("data.norm_std");
        if (!mean.empty()) {
            if (mean.size() != 3) throw ConfigError("config: data.norm_mean needs 3 values");
            for (int i = 0; i < 3; ++i) cfg.norm_mean[i] = mean[static_cast<std::size_t>(i)];
        }
        if (!stdv.empty()) {
            if (stdv.size() != 3) throw ConfigError("config: data.norm_std needs 3 values");
            for (int i = 0; i < 3; ++i) cfg.norm_std[i] = stdv[static_cast<std::size_t>(i)];
        }
        for (const auto& [name, path] : kv.items_with_prefix("data.test.")) {
            TestSetSource src;
            src.name = name;
            src.path = path;
            src.truth_path = kv.get_string("data.test_truth." + name, "");
            src.default_flag = kv.get_string("data.test_default." + name, "");
            cfg.test_sources.push_back(src);
        }
        require_path_exists(cfg.labeled_path, "data.labeled");
        if (!cfg.unlabeled_path.empty()) require_path_exists(cfg.unlabeled_path, "data.unlabeled");
        if (!cfg.unlabeled_truth_path.empty())
            require_path_exists(cfg.unlabeled_truth_path, "data.unlabeled_truth");
        if (!cfg.manifest_path.empty()) require_path_exists(cfg.manifest_path, "data.manifest");
        for (const auto& src : cfg.test_sources) {
            require_path_exists(src.path, "data.test." + src.name);
            if (!src.truth_path.empty())
                require_path_exists(src.truth_path, "data.test_truth." + src.name);
        }
    } else {
        throw ConfigError("config: data.source must be 'synthetic' or 'files', got '" + source +
                          "'");
    }

    for (const auto& name : kv.has("eval.detectors") ? kv.get_list("eval.detectors")
                                                     : std::vector<std::string>{"MSP"}) {
        DetectorConfig det;
        det.method = parse_detector_method(name);
        const std::string prefix =
            det.method == DetectorMethod::MSP
                ? "detector.msp."
                : (det.method == DetectorMethod::ODIN ? "detector.odin." : "detector.ebo.");
        det.temperature = kv.get_double(prefix + "temperature", 1.0);
        det.odin_epsilon = kv.get_double(prefix + "epsilon", 0.0);
        det.decision_threshold = kv.get_double(prefix + "threshold", 0.5);
        cfg.detectors.push_back(det);
    }
    cfg.eval_oracle_scores = kv.get_bool("eval.oracle_scores", false);
    cfg.eval_score_dump = kv.get_bool("eval.score_dump", false);

    for (double k : kv.get_double_list("sweep.k_groups"))
        cfg.sweep_k.push_back(static_cast<long long>(k));
    cfg.sweep_tau = kv.get_double_list("sweep.tau");
    cfg.sweep_filter = kv.get_list("sweep.filter_strategy");
    cfg.sweep_odin_temperatures = kv.has("sweep.odin.temperatures")
                                      ? kv.get_double_list("sweep.odin.temperatures")
                                      : std::vector<double>{1, 10, 100, 1000};
    cfg.sweep_odin_epsilons = kv.has("sweep.odin.epsilons")
                                  ? kv.get_double_list("sweep.odin.epsilons")
                                  : std::vector<double>{0, 0.0005, 0.001, 0.0014, 0.002, 0.005};
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_kv(KvConfig::parse_file(path));
}

std::string resolved_config_text(const RunConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["run.seed"] = std::to_string(cfg.train.seed);
    kv["run.output_dir"] = cfg.output_dir;
    kv["run.checkpoint_every"] = std::to_string(cfg.checkpoint_every);
    kv["run.grouping_dump"] = cfg.grouping_dump ? "true" : "false";

    kv["train.epochs"] = std::to_string(cfg.train.epochs);
    kv["train.lr0"] = format_double(cfg.train.lr0);
    kv["train.momentum"] = format_double(cfg.train.momentum);
    kv["train.weight_decay"] = format_double(cfg.train.weight_decay);
    kv["train.batch_labeled"] = std::to_string(cfg.train.batch_labeled);
    kv["train.batch_unlabeled"] = std::to_string(cfg.train.batch_unlabeled);
    kv["train.lambda_u"] = format_double(cfg.train.weights.lambda_u);
    kv["train.lambda_a"] = format_double(cfg.train.weights.lambda_a);
    kv["train.use_l_ci"] = cfg.train.use_l_ci ? "true" : "false";
    kv["train.use_l_co"] = cfg.train.use_l_co ? "true" : "false";
    kv["train.use_l_a"] = cfg.train.use_l_a ? "true" : "false";
    kv["train.use_idf"] = cfg.train.use_idf ? "true" : "false";
    kv["train.filter_start_epoch"] = std::to_string(cfg.train.filter_start_epoch);
    kv["train.kmeans_max_iters"] = std::to_string(cfg.train.kmeans_max_iters);
    std::string widths;
    for (std::size_t w : cfg.train.hidden_widths) {
        if (!widths.empty()) widths += ',';
        widths += std::to_string(w);
    }
    kv["train.hidden_widths"] = widths;

    kv["filter.strategy"] = filter_strategy_name(cfg.train.filter.strategy);
    kv["filter.tau"] = format_double(cfg.train.filter.tau);
    kv["filter.k_groups"] = std::to_string(cfg.train.filter.k_groups);

    kv["data.source"] = cfg.synthetic_source ? "synthetic" : "files";
    if (cfg.synthetic_source) {
        kv["synthetic.dim"] = std::to_string(cfg.synthetic.dim);
        kv["synthetic.n_id_classes"] = std::to_string(cfg.synthetic.n_id_classes);
        kv["synthetic.n_ood_clusters"] = std::to_string(cfg.synthetic.n_ood_clusters);
        kv["synthetic.samples_per_cluster"] = std::to_string(cfg.synthetic.samples_per_cluster);
        kv["synthetic.cluster_separation"] = format_double(cfg.synthetic.cluster_separation);
        kv["synthetic.noise_sigma"] = format_double(cfg.synthetic.noise_sigma);
        kv["synthetic.unlabeled_id_fraction"] =
            format_double(cfg.synthetic.unlabeled_id_fraction);
        kv["synthetic.n_ood_holdout"] = std::to_string(cfg.synthetic.n_ood_holdout);
        kv["synthetic.test_per_cluster"] = std::to_string(cfg.synthetic.test_per_cluster);
        kv["synthetic.seed"] = std::to_string(cfg.synthetic.seed);
    } else {
        kv["data.format"] = cfg.data_format;
        kv["data.dim"] = std::to_string(cfg.data_dim);
        kv["data.labeled"] = cfg.labeled_path;
        if (!cfg.unlabeled_path.empty()) kv["data.unlabeled"] = cfg.unlabeled_path;
        if (!cfg.unlabeled_truth_path.empty())
            kv["data.unlabeled_truth"] = cfg.unlabeled_truth_path;
        if (!cfg.manifest_path.empty()) kv["data.manifest"] = cfg.manifest_path;
        kv["data.norm_mean"] = format_double(cfg.norm_mean[0]) + "," +
                               format_double(cfg.norm_mean[1]) + "," +
                               format_double(cfg.norm_mean[2]);
        kv["data.norm_std"] = format_double(cfg.norm_std[0]) + "," +
                              format_double(cfg.norm_std[1]) + "," +
                              format_double(cfg.norm_std[2]);
        for (const auto& src : cfg.test_sources) {
            kv["data.test." + src.name] = src.path;
            if (!src.truth_path.empty()) kv["data.test_truth." + src.name] = src.truth_path;
            if (!src.default_flag.empty()) kv["data.test_default." + src.name] = src.default_flag;
        }
    }

    std::string detectors;
    for (const auto& det : cfg.detectors) {
        if (!detectors.empty()) detectors += ',';
        detectors += det.name();
        const std::string prefix =
            det.method == DetectorMethod::MSP
                ? "detector.msp."
                : (det.method == DetectorMethod::ODIN ? "detector.odin." : "detector.ebo.");
        kv[prefix + "temperature"] = format_double(det.temperature);
        kv[prefix + "epsilon"] = format_double(det.odin_epsilon);
        kv[prefix + "threshold"] = format_double(det.decision_threshold);
    }
    kv["eval.detectors"] = detectors;
    kv["eval.oracle_scores"] = cfg.eval_oracle_scores ? "true" : "false";
    kv["eval.score_dump"] = cfg.eval_score_dump ? "true" : "false";

    std::string text;
    for (const auto& [key, value] : kv) text += key + " = " + value + "\n";
    return text;
}

LoadedData load_datasets(const RunConfig& cfg) {
    LoadedData out;
    if (cfg.synthetic_source) {
        SyntheticData data = generate_synthetic(cfg.synthetic);
        out.labeled = std::move(data.labeled);
        out.unlabeled = std::move(data.unlabeled);
        out.test_sets.push_back(std::move(data.test));
        return out;
    }

    if (cfg.data_format == "cifar") {
        out.labeled = read_cifar_binary(cfg.labeled_path, cfg.norm_mean, cfg.norm_std);
    } else {
        read_f64_records(cfg.labeled_path, cfg.data_dim, out.labeled.samples, out.labeled.labels);
        for (int y : out.labeled.labels)
            if (y < 0) throw ArtifactError("data.labeled contains unlabeled records");
    }
    int next_id = 0;
    out.labeled.sample_ids.resize(out.labeled.samples.rows);
    for (auto& id : out.labeled.sample_ids) id = next_id++;

    if (!cfg.unlabeled_path.empty()) {
        std::vector<int> ignored;
        if (cfg.data_format == "cifar") {
            LabeledSet raw = read_cifar_binary(cfg.unlabeled_path, cfg.norm_mean, cfg.norm_std);
            out.unlabeled.samples = std::move(raw.samples);
        } else {
            read_f64_records(cfg.unlabeled_path, cfg.data_dim, out.unlabeled.samples, ignored);
        }
        out.unlabeled.sample_ids.resize(out.unlabeled.samples.rows);
        for (auto& id : out.unlabeled.sample_ids) id = next_id++;
        if (!cfg.unlabeled_truth_path.empty()) {
            out.unlabeled.id_flags = read_truth_csv(cfg.unlabeled_truth_path);
            if (out.unlabeled.id_flags.size() != out.unlabeled.samples.rows)
                throw ArtifactError("data.unlabeled_truth row count mismatch");
            out.unlabeled.has_ground_truth = true;
        }
    }

    for (const auto& src : cfg.test_sources) {
        TestSet test;
        test.name = src.name;
        if (cfg.data_format == "cifar") {
            LabeledSet raw = read_cifar_binary(src.path, cfg.norm_mean, cfg.norm_std);
            test.samples = std::move(raw.samples);
            test.true_class = std::move(raw.labels);
        } else {
            read_f64_records(src.path, cfg.data_dim, test.samples, test.true_class);
        }
        test.id_flags.resize(test.samples.rows);
        for (std::size_t i = 0; i < test.samples.rows; ++i)
            test.id_flags[i] = test.true_class[i] >= 0 ? 1 : 0;
        if (src.default_flag == "ID")
            std::fill(test.id_flags.begin(), test.id_flags.end(), std::uint8_t{1});
        else if (src.default_flag == "OOD")
            std::fill(test.id_flags.begin(), test.id_flags.end(), std::uint8_t{0});
        else if (!src.default_flag.empty())
            throw ConfigError("config: data.test_default." + src.name + " must be ID or OOD");
        if (!src.truth_path.empty()) {
            const auto flags = read_truth_csv(src.truth_path);
            if (flags.size() != test.samples.rows)
                throw ArtifactError("data.test_truth." + src.name + " row count mismatch");
            test.id_flags = flags;
        }
        test.sample_ids.resize(test.samples.rows);
        for (auto& id : test.sample_ids) id = next_id++;
        out.test_sets.push_back(std::move(test));
    }

    if (!cfg.manifest_path.empty()) apply_split_manifest(out.test_sets, cfg.manifest_path);
    return out;
}

} // namespace udg
