#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "udg/model.hpp"

namespace udg {

enum class DetectorMethod { MSP, ODIN, EBO };

DetectorMethod parse_detector_method(const std::string& name);
std::string detector_method_name(DetectorMethod m);

struct DetectorConfig {
    DetectorMethod method = DetectorMethod::MSP;
    double temperature = 1.0;
    double odin_epsilon = 0.0;
    double decision_threshold = 0.5; // delta in the thresholded decision rule

    std::string name() const;
};

// All scores follow the "higher = more ID-like" convention.
std::vector<double> msp_scores(const DualHeadNetwork& net, const Matrix& batch);
std::vector<double> odin_scores(const DualHeadNetwork& net, const Matrix& batch,
                                double temperature, double epsilon);
// Negative free energy T*log sum_c exp(f_c/T).
std::vector<double> energy_scores(const DualHeadNetwork& net, const Matrix& batch,
                                  double temperature);

std::vector<double> detector_scores(const DualHeadNetwork& net, const Matrix& batch,
                                    const DetectorConfig& cfg);

// REJECT (nullopt) iff score < delta, otherwise the argmax class.
std::optional<int> predict(const DualHeadNetwork& net, const Matrix& sample, double delta,
                           const DetectorConfig& cfg);

struct ScoreRow {
    int sample_id = 0;
    double score = 0.0;
    bool is_id = false;   // ground truth
    int true_class = -1;  // -1 when unknown (OOD samples)
    int pred_class = -1;  // argmax of the class posterior, no rejection applied
};

using ScoreTable = std::vector<ScoreRow>;

// CSV with header sample_id,score,is_id,true_class,pred_class; scores printed
// with 9 significant digits.
void write_score_csv(std::ostream& out, const ScoreTable& table);

} // namespace udg
