#pragma once

#include <json.hpp>

#include "udg/metrics.hpp"
#include "udg/trainer.hpp"

namespace udg {

using Json = nlohmann::ordered_json;

// Keys emitted in this exact order:
// fpr95, auroc, aupr_in, aupr_out, ccr_1e4, ccr_1e3, ccr_1e2, ccr_1e1, accuracy
Json metrics_to_json(const MetricsReport& r);

Json epoch_log_to_json(const EpochLog& log);

// One object per (detector, dataset) pair plus a "mean" object per detector.
Json eval_report_to_json(const EvalReport& report);

} // namespace udg
