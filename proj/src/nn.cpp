#include "udg/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "udg/errors.hpp"

namespace udg {

void LinearLayer::init_uniform(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
    for (double& w : weight.data) w = rng.uniform(-bound, bound);
    for (double& b : bias) b = rng.uniform(-bound, bound);
}

void LinearLayer::zero_grad() {
    grad_weight.data.assign(grad_weight.data.size(), 0.0);
    grad_bias.assign(grad_bias.size(), 0.0);
}

Matrix linear_forward(const Matrix& input, const LinearLayer& layer) {
    if (input.cols != layer.in_dim())
        throw std::invalid_argument("linear_forward: input dim " + std::to_string(input.cols) +
                                    " != layer in dim " + std::to_string(layer.in_dim()));
    Matrix out = matmul_nt(input, layer.weight);
    for (std::size_t i = 0; i < out.rows; ++i) {
        double* r = out.row(i);
        for (std::size_t j = 0; j < out.cols; ++j) r[j] += layer.bias[j];
    }
    return out;
}

Matrix linear_backward(const Matrix& input, const Matrix& upstream, LinearLayer& layer) {
    if (upstream.cols != layer.out_dim() || input.cols != layer.in_dim() ||
        upstream.rows != input.rows)
        throw std::invalid_argument("linear_backward: shape mismatch");
    // grad_weight += upstream^T * input
    const Matrix gw = matmul_tn(upstream, input);
    for (std::size_t i = 0; i < gw.data.size(); ++i) layer.grad_weight.data[i] += gw.data[i];
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
        double acc = 0.0;
        for (std::size_t b = 0; b < upstream.rows; ++b) acc += upstream(b, j);
        layer.grad_bias[j] += acc;
    }
    return matmul(upstream, layer.weight);
}

Matrix linear_input_grad(const Matrix& upstream, const LinearLayer& layer) {
    return matmul(upstream, layer.weight);
}

Matrix relu(const Matrix& m) {
    Matrix out = m;
    for (double& x : out.data) x = x > 0.0 ? x : 0.0;
    return out;
}

Matrix relu_backward(const Matrix& preact, const Matrix& upstream) {
    if (preact.rows != upstream.rows || preact.cols != upstream.cols)
        throw std::invalid_argument("relu_backward: shape mismatch");
    Matrix out = upstream;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (preact.data[i] <= 0.0) out.data[i] = 0.0;
    return out;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* z = logits.row(i);
        double* p = out.row(i);
        double m = z[0];
        for (std::size_t j = 1; j < logits.cols; ++j) m = std::max(m, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            p[j] = std::exp(z[j] - m);
            sum += p[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < logits.cols; ++j) p[j] *= inv;
    }
    return out;
}

Mlp::Mlp(const std::vector<std::size_t>& widths, bool relu_on_output, Rng& rng)
    : relu_on_output_(relu_on_output) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least in and out widths");
    layers_.reserve(widths.size() - 1);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        layers_.emplace_back(widths[i], widths[i + 1]);
        layers_.back().init_uniform(rng);
    }
}

Matrix Mlp::forward(const Matrix& x) const {
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = linear_forward(h, layers_[l]);
        if (l + 1 < layers_.size() || relu_on_output_) h = relu(h);
    }
    return h;
}

Mlp::Trace Mlp::forward_trace(const Matrix& x) const {
    Trace t;
    t.inputs.reserve(layers_.size());
    t.preacts.reserve(layers_.size());
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        t.inputs.push_back(h);
        Matrix z = linear_forward(h, layers_[l]);
        t.preacts.push_back(z);
        if (l + 1 < layers_.size() || relu_on_output_)
            h = relu(z);
        else
            h = std::move(z);
    }
    t.output = h;
    return t;
}

Matrix Mlp::backward(const Trace& trace, const Matrix& upstream) {
    if (trace.inputs.size() != layers_.size())
        throw std::logic_error("Mlp::backward called without a matching forward trace");
    Matrix g = upstream;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        if (l + 1 < layers_.size() || relu_on_output_) g = relu_backward(trace.preacts[l], g);
        g = linear_backward(trace.inputs[l], g, layers_[l]);
    }
    return g;
}

Matrix Mlp::input_grad(const Trace& trace, const Matrix& upstream) const {
    if (trace.inputs.size() != layers_.size())
        throw std::logic_error("Mlp::input_grad called without a matching forward trace");
    Matrix g = upstream;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        if (l + 1 < layers_.size() || relu_on_output_) g = relu_backward(trace.preacts[l], g);
        g = linear_input_grad(g, layers_[l]);
    }
    return g;
}

void Mlp::zero_grad() {
    for (auto& layer : layers_) layer.zero_grad();
}

SgdOptimizer::SgdOptimizer(std::vector<ParamTensor> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    if (momentum_ < 0.0 || weight_decay_ < 0.0)
        throw std::invalid_argument("SgdOptimizer: momentum and weight_decay must be >= 0");
    velocity_.reserve(params_.size());
    for (const auto& p : params_) velocity_.emplace_back(p.value->size(), 0.0);
}

void SgdOptimizer::step(double lr) {
    if (lr < 0.0) throw std::invalid_argument("SgdOptimizer::step: lr must be >= 0");
    for (std::size_t t = 0; t < params_.size(); ++t) {
        auto& value = *params_[t].value;
        const auto& grad = *params_[t].grad;
        auto& vel = velocity_[t];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            if (!std::isfinite(g))
                throw NumericError("sgd_step: non-finite gradient in tensor " + std::to_string(t) +
                                   " at index " + std::to_string(i));
            vel[i] = momentum_ * vel[i] + (g + weight_decay_ * value[i]);
            value[i] -= lr * vel[i];
        }
    }
}

double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr0) {
    if (total_epochs == 0) throw std::invalid_argument("cosine_lr: total_epochs must be > 0");
    if (epoch > total_epochs) throw std::invalid_argument("cosine_lr: epoch out of range");
    const double x = 3.14159265358979323846 * static_cast<double>(epoch) /
                     static_cast<double>(total_epochs);
    return 0.5 * lr0 * (1.0 + std::cos(x));
}

} // namespace udg
