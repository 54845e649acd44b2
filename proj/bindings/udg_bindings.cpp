#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "udg/config.hpp"
#include "udg/data.hpp"
#include "udg/detection.hpp"
#include "udg/kmeans.hpp"
#include "udg/metrics.hpp"
#include "udg/model.hpp"
#include "udg/trainer.hpp"

namespace py = pybind11;
using namespace udg;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DoubleArray& array) {
    const auto buf = array.request();
    if (buf.ndim != 2) throw std::invalid_argument("expected a 2-D array");
    Matrix m(static_cast<std::size_t>(buf.shape[0]), static_cast<std::size_t>(buf.shape[1]));
    const double* src = static_cast<const double*>(buf.ptr);
    std::copy(src, src + m.data.size(), m.data.begin());
    return m;
}

py::array_t<double> to_numpy(const Matrix& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

ScoreTable make_table(const std::vector<double>& scores, const std::vector<bool>& is_id,
                      const std::vector<int>& pred, const std::vector<int>& truth) {
    if (scores.size() != is_id.size())
        throw std::invalid_argument("score and is_id lengths differ");
    ScoreTable table(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        table[i].sample_id = static_cast<int>(i);
        table[i].score = scores[i];
        table[i].is_id = is_id[i];
        table[i].pred_class = pred.empty() ? -1 : pred[i];
        table[i].true_class = truth.empty() ? -1 : truth[i];
    }
    return table;
}

py::dict metrics_to_dict(const MetricsReport& r) {
    py::dict d;
    d["fpr95"] = r.fpr95;
    d["auroc"] = r.auroc;
    d["aupr_in"] = r.aupr_in;
    d["aupr_out"] = r.aupr_out;
    d["ccr_1e4"] = r.ccr_at_fpr[0];
    d["ccr_1e3"] = r.ccr_at_fpr[1];
    d["ccr_1e2"] = r.ccr_at_fpr[2];
    d["ccr_1e1"] = r.ccr_at_fpr[3];
    d["accuracy"] = r.accuracy;
    return d;
}

TrainConfig config_from_kwargs(const py::kwargs& kwargs) {
    TrainConfig cfg;
    for (const auto& item : kwargs) {
        const std::string key = py::cast<std::string>(item.first);
        if (key == "epochs") cfg.epochs = py::cast<std::size_t>(item.second);
        else if (key == "lr0") cfg.lr0 = py::cast<double>(item.second);
        else if (key == "momentum") cfg.momentum = py::cast<double>(item.second);
        else if (key == "weight_decay") cfg.weight_decay = py::cast<double>(item.second);
        else if (key == "batch_labeled") cfg.batch_labeled = py::cast<std::size_t>(item.second);
        else if (key == "batch_unlabeled") cfg.batch_unlabeled = py::cast<std::size_t>(item.second);
        else if (key == "lambda_u") cfg.weights.lambda_u = py::cast<double>(item.second);
        else if (key == "lambda_a") cfg.weights.lambda_a = py::cast<double>(item.second);
        else if (key == "seed") cfg.seed = py::cast<std::uint64_t>(item.second);
        else if (key == "use_l_ci") cfg.use_l_ci = py::cast<bool>(item.second);
        else if (key == "use_l_co") cfg.use_l_co = py::cast<bool>(item.second);
        else if (key == "use_l_a") cfg.use_l_a = py::cast<bool>(item.second);
        else if (key == "use_idf") cfg.use_idf = py::cast<bool>(item.second);
        else if (key == "filter_strategy")
            cfg.filter.strategy = parse_filter_strategy(py::cast<std::string>(item.second));
        else if (key == "tau") cfg.filter.tau = py::cast<double>(item.second);
        else if (key == "k_groups") cfg.filter.k_groups = py::cast<int>(item.second);
        else if (key == "hidden_widths")
            cfg.hidden_widths = py::cast<std::vector<std::size_t>>(item.second);
        else if (key == "filter_start_epoch")
            cfg.filter_start_epoch = py::cast<std::size_t>(item.second);
        else if (key == "kmeans_max_iters") cfg.kmeans_max_iters = py::cast<int>(item.second);
        else throw std::invalid_argument("unknown train option: " + key);
    }
    return cfg;
}

py::dict epoch_log_to_dict(const EpochLog& log) {
    py::dict d;
    d["epoch"] = log.epoch;
    d["lr"] = log.lr;
    d["l_ci"] = log.loss.l_ci;
    d["l_co"] = log.loss.l_co;
    d["l_a"] = log.loss.l_a;
    d["total"] = log.loss.total;
    d["labeled_size"] = log.labeled_size;
    d["filtered"] = log.filtered_count;
    d["idf_precision"] = log.idf_precision;
    d["idf_recall"] = log.idf_recall;
    d["grouping_sse"] = log.grouping_sse;
    return d;
}

DetectorConfig detector_from_name(const std::string& name, double temperature, double epsilon) {
    DetectorConfig det;
    det.method = parse_detector_method(name);
    det.temperature = temperature;
    det.odin_epsilon = epsilon;
    return det;
}

} // namespace

PYBIND11_MODULE(_udg, m) {
    m.doc() = "Unsupervised dual grouping for semantically coherent OOD detection";

    py::class_<DualHeadNetwork>(m, "Network")
        .def_property_readonly("input_dim", &DualHeadNetwork::input_dim)
        .def_property_readonly("feature_dim", &DualHeadNetwork::feature_dim)
        .def_property_readonly("n_classes", &DualHeadNetwork::n_classes)
        .def_property_readonly("k_groups", &DualHeadNetwork::k_groups)
        .def("extract_features",
             [](const DualHeadNetwork& net, const DoubleArray& x) {
                 return to_numpy(net.extract_features(to_matrix(x)));
             })
        .def("class_posterior",
             [](const DualHeadNetwork& net, const DoubleArray& x) {
                 return to_numpy(net.class_posterior(to_matrix(x)));
             })
        .def("group_posterior",
             [](const DualHeadNetwork& net, const DoubleArray& x) {
                 return to_numpy(net.group_posterior(to_matrix(x)));
             })
        .def("save", [](const DualHeadNetwork& net, const std::string& path) {
            save_checkpoint(net, path);
        });

    m.def("load_network", &load_checkpoint, py::arg("path"));

    m.def(
        "generate_synthetic",
        [](std::size_t dim, std::size_t n_id_classes, std::size_t n_ood_clusters,
           std::size_t samples_per_cluster, double cluster_separation, double noise_sigma,
           double unlabeled_id_fraction, std::size_t n_ood_holdout, std::size_t test_per_cluster,
           std::uint64_t seed) {
            SyntheticSpec spec{dim, n_id_classes, n_ood_clusters, samples_per_cluster,
                               cluster_separation, noise_sigma, unlabeled_id_fraction,
                               n_ood_holdout, test_per_cluster, seed};
            const SyntheticData data = generate_synthetic(spec);
            py::dict d;
            d["labeled_x"] = to_numpy(data.labeled.samples);
            d["labeled_y"] = py::cast(data.labeled.labels);
            d["unlabeled_x"] = to_numpy(data.unlabeled.samples);
            d["unlabeled_is_id"] = py::cast(
                std::vector<int>(data.unlabeled.id_flags.begin(), data.unlabeled.id_flags.end()));
            d["test_x"] = to_numpy(data.test.samples);
            d["test_y"] = py::cast(data.test.true_class);
            d["test_is_id"] = py::cast(
                std::vector<int>(data.test.id_flags.begin(), data.test.id_flags.end()));
            return d;
        },
        py::arg("dim") = 16, py::arg("n_id_classes") = 5, py::arg("n_ood_clusters") = 5,
        py::arg("samples_per_cluster") = 500, py::arg("cluster_separation") = 10.0,
        py::arg("noise_sigma") = 1.0, py::arg("unlabeled_id_fraction") = 0.3,
        py::arg("n_ood_holdout") = 0, py::arg("test_per_cluster") = 0, py::arg("seed") = 1);

    m.def(
        "kmeans",
        [](const DoubleArray& features, int k, std::uint64_t seed, int max_iters) {
            const KmeansResult res = kmeans(to_matrix(features), k, seed, max_iters);
            return py::make_tuple(to_numpy(res.centroids), py::cast(res.assignments),
                                  py::cast(res.sse_history));
        },
        py::arg("features"), py::arg("k"), py::arg("seed") = 1, py::arg("max_iters") = 100);

    m.def(
        "train",
        [](const DoubleArray& labeled_x, const std::vector<int>& labeled_y,
           const DoubleArray& unlabeled_x, const std::vector<int>& unlabeled_is_id,
           const py::kwargs& kwargs) {
            LabeledSet labeled;
            labeled.samples = to_matrix(labeled_x);
            labeled.labels = labeled_y;
            labeled.sample_ids.resize(labeled.samples.rows);
            for (std::size_t i = 0; i < labeled.samples.rows; ++i)
                labeled.sample_ids[i] = static_cast<int>(i);
            UnlabeledSet unlabeled;
            unlabeled.samples = to_matrix(unlabeled_x);
            unlabeled.sample_ids.resize(unlabeled.samples.rows);
            for (std::size_t i = 0; i < unlabeled.samples.rows; ++i)
                unlabeled.sample_ids[i] = static_cast<int>(labeled.samples.rows + i);
            if (!unlabeled_is_id.empty()) {
                if (unlabeled_is_id.size() != unlabeled.samples.rows)
                    throw std::invalid_argument("unlabeled_is_id length mismatch");
                unlabeled.id_flags.assign(unlabeled_is_id.size(), 0);
                for (std::size_t i = 0; i < unlabeled_is_id.size(); ++i)
                    unlabeled.id_flags[i] = unlabeled_is_id[i] ? 1 : 0;
                unlabeled.has_ground_truth = true;
            }
            TrainResult result = train(config_from_kwargs(kwargs), labeled, unlabeled);
            py::list logs;
            for (const auto& log : result.logs) logs.append(epoch_log_to_dict(log));
            return py::make_tuple(std::move(result.net), logs);
        },
        py::arg("labeled_x"), py::arg("labeled_y"), py::arg("unlabeled_x"),
        py::arg("unlabeled_is_id") = std::vector<int>{});

    m.def(
        "evaluate",
        [](const DualHeadNetwork& net, const DoubleArray& test_x, const std::vector<bool>& is_id,
           const std::vector<int>& true_class, const std::vector<std::string>& detectors,
           double temperature, double epsilon) {
            TestSet test;
            test.name = "test";
            test.samples = to_matrix(test_x);
            test.true_class = true_class;
            test.id_flags.assign(is_id.size(), 0);
            for (std::size_t i = 0; i < is_id.size(); ++i) test.id_flags[i] = is_id[i] ? 1 : 0;
            test.sample_ids.resize(test.samples.rows);
            for (std::size_t i = 0; i < test.samples.rows; ++i)
                test.sample_ids[i] = static_cast<int>(i);
            std::vector<DetectorConfig> dets;
            for (const auto& name : detectors)
                dets.push_back(detector_from_name(name, temperature, epsilon));
            const EvalReport report = evaluate(net, {test}, dets);
            py::dict out;
            for (const auto& [name, mean] : report.mean) out[name.c_str()] = metrics_to_dict(mean);
            return out;
        },
        py::arg("net"), py::arg("test_x"), py::arg("is_id"), py::arg("true_class"),
        py::arg("detectors") = std::vector<std::string>{"MSP"}, py::arg("temperature") = 1.0,
        py::arg("epsilon") = 0.0);

    m.def("msp_scores", [](const DualHeadNetwork& net, const DoubleArray& x) {
        return msp_scores(net, to_matrix(x));
    });
    m.def(
        "odin_scores",
        [](const DualHeadNetwork& net, const DoubleArray& x, double temperature, double epsilon) {
            return odin_scores(net, to_matrix(x), temperature, epsilon);
        },
        py::arg("net"), py::arg("x"), py::arg("temperature") = 1000.0, py::arg("epsilon") = 0.0014);
    m.def(
        "energy_scores",
        [](const DualHeadNetwork& net, const DoubleArray& x, double temperature) {
            return energy_scores(net, to_matrix(x), temperature);
        },
        py::arg("net"), py::arg("x"), py::arg("temperature") = 1.0);

    m.def(
        "auroc",
        [](const std::vector<double>& score, const std::vector<bool>& is_id) {
            return auroc(make_table(score, is_id, {}, {}));
        },
        py::arg("score"), py::arg("is_id"));
    m.def(
        "fpr_at_tpr",
        [](const std::vector<double>& score, const std::vector<bool>& is_id, double level) {
            return fpr_at_tpr(make_table(score, is_id, {}, {}), level);
        },
        py::arg("score"), py::arg("is_id"), py::arg("level") = 0.95);
    m.def(
        "aupr",
        [](const std::vector<double>& score, const std::vector<bool>& is_id, bool id_positive) {
            return aupr(make_table(score, is_id, {}, {}), id_positive);
        },
        py::arg("score"), py::arg("is_id"), py::arg("id_positive") = true);
    m.def(
        "compute_metrics",
        [](const std::vector<double>& score, const std::vector<bool>& is_id,
           const std::vector<int>& pred_class, const std::vector<int>& true_class) {
            return metrics_to_dict(compute_metrics(make_table(score, is_id, pred_class, true_class)));
        },
        py::arg("score"), py::arg("is_id"), py::arg("pred_class"), py::arg("true_class"));
}
