#include "udg/detection.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace udg {

DetectorMethod parse_detector_method(const std::string& name) {
    if (name == "MSP") return DetectorMethod::MSP;
    if (name == "ODIN") return DetectorMethod::ODIN;
    if (name == "EBO") return DetectorMethod::EBO;
    throw std::invalid_argument("unknown detector method: " + name);
}

std::string detector_method_name(DetectorMethod m) {
    switch (m) {
        case DetectorMethod::MSP: return "MSP";
        case DetectorMethod::ODIN: return "ODIN";
        case DetectorMethod::EBO: return "EBO";
    }
    return "MSP";
}

std::string DetectorConfig::name() const { return detector_method_name(method); }

namespace {

Matrix scale_logits(const Matrix& logits, double temperature) {
    Matrix out = logits;
    for (double& x : out.data) x /= temperature;
    return out;
}

std::vector<double> row_max(const Matrix& m) {
    std::vector<double> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        double best = r[0];
        for (std::size_t j = 1; j < m.cols; ++j) best = std::max(best, r[j]);
        out[i] = best;
    }
    return out;
}

} // namespace

std::vector<double> msp_scores(const DualHeadNetwork& net, const Matrix& batch) {
    return row_max(softmax_rows(net.class_logits(net.extract_features(batch))));
}

std::vector<double> odin_scores(const DualHeadNetwork& net, const Matrix& batch,
                                double temperature, double epsilon) {
    if (temperature <= 0.0) throw std::invalid_argument("odin: temperature must be > 0");
    if (epsilon < 0.0) throw std::invalid_argument("odin: epsilon must be >= 0");
    std::vector<double> scores(batch.rows);
    for (std::size_t i = 0; i < batch.rows; ++i) {
        Matrix x(1, batch.cols);
        for (std::size_t j = 0; j < batch.cols; ++j) x(0, j) = batch(i, j);

        const auto trace = net.forward_trace(x);
        const Matrix scaled = scale_logits(trace.class_logits, temperature);
        const Matrix p = softmax_rows(scaled);
        std::size_t cstar = 0;
        for (std::size_t c = 1; c < p.cols; ++c)
            if (p(0, c) > p(0, cstar)) cstar = c;

        if (epsilon > 0.0) {
            // d log p_{c*} / d logits = (onehot(c*) - p) / T, pushed to the input.
            Matrix upstream(1, p.cols);
            for (std::size_t c = 0; c < p.cols; ++c)
                upstream(0, c) = ((c == cstar ? 1.0 : 0.0) - p(0, c)) / temperature;
            const Matrix g = net.input_grad_class(trace, upstream);
            // x~ = x - eps * sign(-g)
            for (std::size_t j = 0; j < x.cols; ++j) {
                const double s = g(0, j) > 0.0 ? 1.0 : (g(0, j) < 0.0 ? -1.0 : 0.0);
                x(0, j) += epsilon * s;
            }
            const Matrix logits2 = net.class_logits(net.extract_features(x));
            scores[i] = row_max(softmax_rows(scale_logits(logits2, temperature)))[0];
        } else {
            scores[i] = row_max(p)[0];
        }
    }
    return scores;
}

std::vector<double> energy_scores(const DualHeadNetwork& net, const Matrix& batch,
                                  double temperature) {
    if (temperature <= 0.0) throw std::invalid_argument("energy: temperature must be > 0");
    const Matrix logits = net.class_logits(net.extract_features(batch));
    std::vector<double> scores(logits.rows);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* z = logits.row(i);
        double m = z[0];
        for (std::size_t j = 1; j < logits.cols; ++j) m = std::max(m, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) sum += std::exp((z[j] - m) / temperature);
        scores[i] = m + temperature * std::log(sum);
    }
    return scores;
}

std::vector<double> detector_scores(const DualHeadNetwork& net, const Matrix& batch,
                                    const DetectorConfig& cfg) {
    switch (cfg.method) {
        case DetectorMethod::MSP: return msp_scores(net, batch);
        case DetectorMethod::ODIN: return odin_scores(net, batch, cfg.temperature, cfg.odin_epsilon);
        case DetectorMethod::EBO: return energy_scores(net, batch, cfg.temperature);
    }
    return msp_scores(net, batch);
}

std::optional<int> predict(const DualHeadNetwork& net, const Matrix& sample, double delta,
                           const DetectorConfig& cfg) {
    const double score = detector_scores(net, sample, cfg).at(0);
    if (score < delta) return std::nullopt;
    const Matrix p = net.class_posterior(sample);
    std::size_t argmax = 0;
    for (std::size_t c = 1; c < p.cols; ++c)
        if (p(0, c) > p(0, argmax)) argmax = c;
    return static_cast<int>(argmax);
}

void write_score_csv(std::ostream& out, const ScoreTable& table) {
    out << "sample_id,score,is_id,true_class,pred_class\n";
    char buf[64];
    for (const auto& row : table) {
        std::snprintf(buf, sizeof(buf), "%.9g", row.score);
        out << row.sample_id << ',' << buf << ',' << (row.is_id ? 1 : 0) << ',' << row.true_class
            << ',' << row.pred_class << '\n';
    }
}

} // namespace udg
