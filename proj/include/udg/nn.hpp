#pragma once

#include <cstdint>
#include <vector>

#include "udg/matrix.hpp"
#include "udg/rng.hpp"

namespace udg {

// One fully-connected layer. Gradient buffers mirror parameter shapes.
struct LinearLayer {
    Matrix weight;      // out x in
    std::vector<double> bias;
    Matrix grad_weight; // out x in
    std::vector<double> grad_bias;

    LinearLayer() = default;
    LinearLayer(std::size_t in, std::size_t out)
        : weight(out, in), bias(out, 0.0), grad_weight(out, in), grad_bias(out, 0.0) {}

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }

    // Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    void init_uniform(Rng& rng);
    void zero_grad();
};

// output[b] = weight * input[b] + bias
Matrix linear_forward(const Matrix& input, const LinearLayer& layer);

// Accumulates grad_weight/grad_bias from the cached forward input and returns
// the gradient w.r.t. the input.
Matrix linear_backward(const Matrix& input, const Matrix& upstream, LinearLayer& layer);

// Input gradient only; parameter gradients untouched.
Matrix linear_input_grad(const Matrix& upstream, const LinearLayer& layer);

Matrix relu(const Matrix& m);
// upstream masked by preactivation sign (derivative 0 at x <= 0).
Matrix relu_backward(const Matrix& preact, const Matrix& upstream);

// Row-wise softmax with max-subtraction; rows sum to 1 within rounding.
Matrix softmax_rows(const Matrix& logits);

// MLP: linear layers with ReLU after every layer (including the last when
// relu_on_output). Forward/backward state lives in an explicit trace so
// inference stays const and re-entrant.
class Mlp {
public:
    Mlp() = default;
    // widths = {in, h1, ..., out}
    Mlp(const std::vector<std::size_t>& widths, bool relu_on_output, Rng& rng);

    struct Trace {
        std::vector<Matrix> inputs;   // input to each layer
        std::vector<Matrix> preacts;  // pre-activation output of each layer
        Matrix output;
    };

    Matrix forward(const Matrix& x) const;        // no trace
    Trace forward_trace(const Matrix& x) const;
    // Accumulates parameter gradients; returns gradient w.r.t. the trace input.
    Matrix backward(const Trace& trace, const Matrix& upstream);
    // Input gradient only (const); used by input-perturbation scoring.
    Matrix input_grad(const Trace& trace, const Matrix& upstream) const;

    std::vector<LinearLayer>& layers() { return layers_; }
    const std::vector<LinearLayer>& layers() const { return layers_; }
    std::size_t in_dim() const { return layers_.front().in_dim(); }
    std::size_t out_dim() const { return layers_.back().out_dim(); }
    void zero_grad();

private:
    std::vector<LinearLayer> layers_;
    bool relu_on_output_ = true;
};

// A parameter tensor paired with its gradient buffer.
struct ParamTensor {
    std::vector<double>* value;
    std::vector<double>* grad;
};

// SGD with momentum; weight decay is added to the gradient before the
// momentum update (coupled L2): v <- mu*v + (g + wd*theta); theta <- theta - lr*v.
class SgdOptimizer {
public:
    SgdOptimizer(std::vector<ParamTensor> params, double momentum, double weight_decay);

    // Throws NumericError on non-finite gradients.
    void step(double lr);

    double momentum_coef() const { return momentum_; }
    double weight_decay() const { return weight_decay_; }

private:
    std::vector<ParamTensor> params_;
    std::vector<std::vector<double>> velocity_;
    double momentum_;
    double weight_decay_;
};

// lr = 0.5 * lr0 * (1 + cos(pi * epoch / total_epochs)), epoch in [0, total].
double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr0);

} // namespace udg
