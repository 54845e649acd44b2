#include "udg/report.hpp"

namespace udg {

Json metrics_to_json(const MetricsReport& r) {
    Json j;
    j["fpr95"] = r.fpr95;
    j["auroc"] = r.auroc;
    j["aupr_in"] = r.aupr_in;
    j["aupr_out"] = r.aupr_out;
    j["ccr_1e4"] = r.ccr_at_fpr[0];
    j["ccr_1e3"] = r.ccr_at_fpr[1];
    j["ccr_1e2"] = r.ccr_at_fpr[2];
    j["ccr_1e1"] = r.ccr_at_fpr[3];
    j["accuracy"] = r.accuracy;
    return j;
}

Json epoch_log_to_json(const EpochLog& log) {
    Json j;
    j["epoch"] = log.epoch;
    j["lr"] = log.lr;
    j["l_ci"] = log.loss.l_ci;
    j["l_co"] = log.loss.l_co;
    j["l_a"] = log.loss.l_a;
    j["total"] = log.loss.total;
    j["labeled_size"] = log.labeled_size;
    j["filtered"] = log.filtered_count;
    j["idf_precision"] = log.idf_precision;
    j["idf_recall"] = log.idf_recall;
    j["grouping_sse"] = log.grouping_sse;
    j["clamp_count"] = log.clamp_count;
    return j;
}

Json eval_report_to_json(const EvalReport& report) {
    Json j;
    for (const auto& [detector, datasets] : report.per_dataset) {
        Json d;
        for (const auto& [name, metrics] : datasets) d[name] = metrics_to_json(metrics);
        d["mean"] = metrics_to_json(report.mean.at(detector));
        j[detector] = d;
    }
    return j;
}

} // namespace udg
