#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "udg/nn.hpp"

namespace udg {

// Encoder E feeding a classification head F_C (n_classes logits) and an
// auxiliary head F_A (k_groups logits). Heads share the encoder features.
class DualHeadNetwork {
public:
    DualHeadNetwork() = default;
    DualHeadNetwork(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths,
                    std::size_t n_classes, std::size_t k_groups, Rng& rng);

    std::size_t input_dim() const { return encoder_.in_dim(); }
    std::size_t feature_dim() const { return encoder_.out_dim(); }
    std::size_t n_classes() const { return head_c_.out_dim(); }
    std::size_t k_groups() const { return head_a_.out_dim(); }
    const std::vector<std::size_t>& hidden_widths() const { return hidden_widths_; }

    // Evaluation-mode encoder output.
    Matrix extract_features(const Matrix& batch) const { return encoder_.forward(batch); }

    Matrix class_logits(const Matrix& features) const { return linear_forward(features, head_c_); }
    Matrix group_logits(const Matrix& features) const { return linear_forward(features, head_a_); }

    Matrix class_posterior(const Matrix& batch) const {
        return softmax_rows(class_logits(extract_features(batch)));
    }
    Matrix group_posterior(const Matrix& batch) const {
        return softmax_rows(group_logits(extract_features(batch)));
    }

    struct Trace {
        Mlp::Trace encoder;
        Matrix features;
        Matrix class_logits;
        Matrix group_logits;
    };

    Trace forward_trace(const Matrix& batch) const;

    // Accumulates gradients for every parameter tensor. Either upstream may be
    // empty (no contribution from that head). Returns the input gradient.
    Matrix backward(const Trace& trace, const Matrix& d_class_logits,
                    const Matrix& d_group_logits);

    // Input gradient through encoder + classification head only, no parameter
    // gradient accumulation (ODIN perturbation path).
    Matrix input_grad_class(const Trace& trace, const Matrix& d_class_logits) const;

    void zero_grad();
    std::vector<ParamTensor> parameters();

    Mlp& encoder() { return encoder_; }
    const Mlp& encoder() const { return encoder_; }
    LinearLayer& head_c() { return head_c_; }
    const LinearLayer& head_c() const { return head_c_; }
    LinearLayer& head_a() { return head_a_; }
    const LinearLayer& head_a() const { return head_a_; }

private:
    Mlp encoder_;
    LinearLayer head_c_;
    LinearLayer head_a_;
    std::vector<std::size_t> hidden_widths_;
};

// Versioned checkpoint: magic "UDG1", dims, K, then parameter tensors in
// declaration order as 64-bit little-endian floats.
void save_checkpoint(const DualHeadNetwork& net, const std::string& path);
DualHeadNetwork load_checkpoint(const std::string& path);

void write_checkpoint(const DualHeadNetwork& net, std::ostream& out);
DualHeadNetwork read_checkpoint(std::istream& in);

} // namespace udg
