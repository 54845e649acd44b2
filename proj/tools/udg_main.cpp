#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "udg/config.hpp"
#include "udg/errors.hpp"
#include "udg/report.hpp"
#include "udg/trainer.hpp"

namespace fs = std::filesystem;
using namespace udg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitArtifact = 3;
constexpr int kExitNumeric = 4;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ArtifactError("cannot write: " + path.string());
    out << text;
}

struct RunOutputs {
    TrainResult result;
    EvalReport report;
};

TrainResult run_train(const RunConfig& cfg, const LoadedData& data, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_text(out_dir / "config.resolved", resolved_config_text(cfg));

    std::ofstream log_stream(out_dir / "train_log.jsonl");
    std::ofstream grouping_stream;
    TrainHooks hooks;
    hooks.epoch_log = &log_stream;
    if (cfg.grouping_dump) {
        grouping_stream.open(out_dir / "grouping.txt");
        hooks.grouping_dump = &grouping_stream;
    }
    hooks.checkpoint_every = cfg.checkpoint_every;
    hooks.on_checkpoint = [&](std::size_t epoch, const DualHeadNetwork& net) {
        save_checkpoint(net, (out_dir / ("model_epoch_" + std::to_string(epoch) + ".ckpt")).string());
    };

    TrainResult result = train(cfg.train, data.labeled, data.unlabeled, hooks);
    save_checkpoint(result.net, (out_dir / "model.ckpt").string());
    return result;
}

EvalReport run_eval(const RunConfig& cfg, const DualHeadNetwork& net,
                    const std::vector<TestSet>& test_sets, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const EvalReport report = evaluate(net, test_sets, cfg.detectors, cfg.eval_oracle_scores);
    write_text(out_dir / "metrics.json", eval_report_to_json(report).dump(2) + "\n");
    if (cfg.eval_score_dump) {
        for (const auto& det : cfg.detectors) {
            for (const auto& test : test_sets) {
                const ScoreTable table =
                    build_score_table(net, test, det, cfg.eval_oracle_scores);
                std::ofstream csv(out_dir / ("scores_" + det.name() + "_" + test.name + ".csv"));
                write_score_csv(csv, table);
            }
        }
    }
    return report;
}

RunOutputs run_train_eval(const RunConfig& cfg, const fs::path& out_dir) {
    const LoadedData data = load_datasets(cfg);
    RunOutputs out{run_train(cfg, data, out_dir), {}};
    out.report = run_eval(cfg, out.result.net, data.test_sets, out_dir);
    return out;
}

std::string metrics_csv_row(const std::string& axis_value, const MetricsReport& m) {
    std::ostringstream row;
    char buf[64];
    row << axis_value;
    for (double v : {m.fpr95, m.auroc, m.aupr_in, m.aupr_out, m.accuracy}) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        row << ',' << buf;
    }
    row << '\n';
    return row.str();
}

const MetricsReport& first_detector_mean(const EvalReport& report,
                                         const std::vector<DetectorConfig>& detectors) {
    return report.mean.at(detectors.front().name());
}

int cmd_train(const std::string& config_path) {
    const RunConfig cfg = load_run_config(config_path);
    const LoadedData data = load_datasets(cfg);
    const TrainResult result = run_train(cfg, data, cfg.output_dir);
    // A run directory carries everything needed to reproduce and judge the
    // run, so evaluate right away when test data is configured.
    if (!data.test_sets.empty()) run_eval(cfg, result.net, data.test_sets, cfg.output_dir);
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path) {
    const RunConfig cfg = load_run_config(config_path);
    const DualHeadNetwork net = load_checkpoint(checkpoint_path);
    const LoadedData data = load_datasets(cfg);
    run_eval(cfg, net, data.test_sets, cfg.output_dir);
    return kExitOk;
}

int cmd_gen_synthetic(const std::string& config_path) {
    const RunConfig cfg = load_run_config(config_path);
    if (!cfg.synthetic_source)
        throw ConfigError("gen-synthetic requires data.source = synthetic");
    const SyntheticData data = generate_synthetic(cfg.synthetic);
    const fs::path out_dir = cfg.output_dir;
    fs::create_directories(out_dir);
    write_text(out_dir / "config.resolved", resolved_config_text(cfg));
    write_f64_records((out_dir / "labeled.bin").string(), data.labeled.samples,
                      data.labeled.labels);
    write_f64_records((out_dir / "unlabeled.bin").string(), data.unlabeled.samples,
                      std::vector<int>(data.unlabeled.samples.rows, -1));
    write_truth_csv((out_dir / "unlabeled_truth.csv").string(), data.unlabeled.id_flags);
    write_f64_records((out_dir / "test.bin").string(), data.test.samples, data.test.true_class);
    write_truth_csv((out_dir / "test_truth.csv").string(), data.test.id_flags);
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& axis, int parallel) {
    const RunConfig base = load_run_config(config_path);
    const fs::path out_dir = base.output_dir;
    fs::create_directories(out_dir);

    struct Job {
        std::string axis_value;
        RunConfig cfg;
    };
    std::vector<Job> jobs;

    if (axis == "K") {
        if (base.sweep_k.empty()) throw ConfigError("config: missing required key 'sweep.k_groups'");
        for (long long k : base.sweep_k) {
            RunConfig cfg = base;
            cfg.train.filter.k_groups = static_cast<int>(k);
            jobs.push_back({std::to_string(k), cfg});
        }
    } else if (axis == "tau") {
        if (base.sweep_tau.empty()) throw ConfigError("config: missing required key 'sweep.tau'");
        for (double tau : base.sweep_tau) {
            RunConfig cfg = base;
            cfg.train.filter.tau = tau;
            std::ostringstream name;
            name << tau;
            jobs.push_back({name.str(), cfg});
        }
    } else if (axis == "filter_strategy") {
        if (base.sweep_filter.empty())
            throw ConfigError("config: missing required key 'sweep.filter_strategy'");
        for (const auto& name : base.sweep_filter) {
            RunConfig cfg = base;
            cfg.train.filter.strategy = parse_filter_strategy(name);
            cfg.train.use_idf = cfg.train.filter.strategy != FilterStrategy::OFF;
            jobs.push_back({name, cfg});
        }
    } else if (axis == "odin") {
        // Post-hoc detector grid: one training run, many evaluations.
        const LoadedData data = load_datasets(base);
        const TrainResult trained = run_train(base, data, out_dir / "sweep_odin" / "train");
        std::string csv = "axis_value,fpr95,auroc,aupr_in,aupr_out,accuracy\n";
        for (double temperature : base.sweep_odin_temperatures) {
            for (double epsilon : base.sweep_odin_epsilons) {
                DetectorConfig det;
                det.method = DetectorMethod::ODIN;
                det.temperature = temperature;
                det.odin_epsilon = epsilon;
                const EvalReport report = evaluate(trained.net, data.test_sets, {det});
                std::ostringstream value;
                value << "T=" << temperature << ";eps=" << epsilon;
                csv += metrics_csv_row(value.str(), report.mean.at("ODIN"));
            }
        }
        write_text(out_dir / "sweep_odin.csv", csv);
        return kExitOk;
    } else {
        throw ConfigError("sweep: axis must be one of K, tau, filter_strategy, odin");
    }

    std::vector<MetricsReport> results(jobs.size());
    const int workers = std::max(1, parallel);
    for (std::size_t start = 0; start < jobs.size(); start += static_cast<std::size_t>(workers)) {
        const std::size_t end = std::min(jobs.size(), start + static_cast<std::size_t>(workers));
        std::vector<std::future<MetricsReport>> futures;
        for (std::size_t i = start; i < end; ++i) {
            futures.push_back(std::async(std::launch::async, [&jobs, &out_dir, axis, i]() {
                Job& job = jobs[i];
                job.cfg.output_dir =
                    (out_dir / ("sweep_" + axis) / job.axis_value).string();
                const RunOutputs outputs = run_train_eval(job.cfg, job.cfg.output_dir);
                return first_detector_mean(outputs.report, job.cfg.detectors);
            }));
        }
        for (std::size_t i = start; i < end; ++i) results[i] = futures[i - start].get();
    }

    std::string csv = "axis_value,fpr95,auroc,aupr_in,aupr_out,accuracy\n";
    for (std::size_t i = 0; i < jobs.size(); ++i)
        csv += metrics_csv_row(jobs[i].axis_value, results[i]);
    write_text(out_dir / ("sweep_" + axis + ".csv"), csv);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised dual grouping for semantically coherent OOD detection"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, axis;
    int parallel = 1;

    auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
    train_cmd->add_option("config", config_path, "Run configuration")->required();

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required();
    eval_cmd->add_option("config", config_path, "Run configuration")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one configuration axis");
    sweep_cmd->add_option("config", config_path, "Run configuration")->required();
    sweep_cmd->add_option("--axis", axis, "K, tau, filter_strategy, or odin")->required();
    sweep_cmd->add_option("--parallel", parallel, "Concurrent runs");

    auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate a synthetic benchmark");
    gen_cmd->add_option("config", config_path, "Run configuration")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(config_path);
        if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, config_path);
        if (sweep_cmd->parsed()) return cmd_sweep(config_path, axis, parallel);
        if (gen_cmd->parsed()) return cmd_gen_synthetic(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ArtifactError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArtifact;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
