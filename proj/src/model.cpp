#include "udg/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "udg/errors.hpp"

namespace udg {

namespace {

constexpr char kMagic[4] = {'U', 'D', 'G', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

template <class T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ArtifactError("checkpoint: truncated file");
    return v;
}

void write_tensor(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_tensor(std::istream& in, std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw ArtifactError("checkpoint: truncated tensor data");
}

} // namespace

DualHeadNetwork::DualHeadNetwork(std::size_t input_dim,
                                 const std::vector<std::size_t>& hidden_widths,
                                 std::size_t n_classes, std::size_t k_groups, Rng& rng)
    : hidden_widths_(hidden_widths) {
    if (hidden_widths.empty())
        throw std::invalid_argument("DualHeadNetwork: need at least one hidden width");
    if (n_classes == 0 || k_groups == 0)
        throw std::invalid_argument("DualHeadNetwork: n_classes and k_groups must be >= 1");
    std::vector<std::size_t> widths;
    widths.push_back(input_dim);
    widths.insert(widths.end(), hidden_widths.begin(), hidden_widths.end());
    encoder_ = Mlp(widths, /*relu_on_output=*/true, rng);
    head_c_ = LinearLayer(feature_dim(), n_classes);
    head_c_.init_uniform(rng);
    head_a_ = LinearLayer(feature_dim(), k_groups);
    head_a_.init_uniform(rng);
}

DualHeadNetwork::Trace DualHeadNetwork::forward_trace(const Matrix& batch) const {
    Trace t;
    t.encoder = encoder_.forward_trace(batch);
    t.features = t.encoder.output;
    t.class_logits = linear_forward(t.features, head_c_);
    t.group_logits = linear_forward(t.features, head_a_);
    return t;
}

Matrix DualHeadNetwork::backward(const Trace& trace, const Matrix& d_class_logits,
                                 const Matrix& d_group_logits) {
    Matrix d_features(trace.features.rows, trace.features.cols);
    if (!d_class_logits.empty()) {
        const Matrix g = linear_backward(trace.features, d_class_logits, head_c_);
        for (std::size_t i = 0; i < d_features.data.size(); ++i) d_features.data[i] += g.data[i];
    }
    if (!d_group_logits.empty()) {
        const Matrix g = linear_backward(trace.features, d_group_logits, head_a_);
        for (std::size_t i = 0; i < d_features.data.size(); ++i) d_features.data[i] += g.data[i];
    }
    return encoder_.backward(trace.encoder, d_features);
}

Matrix DualHeadNetwork::input_grad_class(const Trace& trace, const Matrix& d_class_logits) const {
    const Matrix d_features = linear_input_grad(d_class_logits, head_c_);
    return encoder_.input_grad(trace.encoder, d_features);
}

void DualHeadNetwork::zero_grad() {
    encoder_.zero_grad();
    head_c_.zero_grad();
    head_a_.zero_grad();
}

std::vector<ParamTensor> DualHeadNetwork::parameters() {
    std::vector<ParamTensor> out;
    for (auto& layer : encoder_.layers()) {
        out.push_back({&layer.weight.data, &layer.grad_weight.data});
        out.push_back({&layer.bias, &layer.grad_bias});
    }
    out.push_back({&head_c_.weight.data, &head_c_.grad_weight.data});
    out.push_back({&head_c_.bias, &head_c_.grad_bias});
    out.push_back({&head_a_.weight.data, &head_a_.grad_weight.data});
    out.push_back({&head_a_.bias, &head_a_.grad_bias});
    return out;
}

void write_checkpoint(const DualHeadNetwork& net, std::ostream& out) {
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint64_t>(out, net.input_dim());
    write_pod<std::uint64_t>(out, net.hidden_widths().size());
    for (std::size_t w : net.hidden_widths()) write_pod<std::uint64_t>(out, w);
    write_pod<std::uint64_t>(out, net.n_classes());
    write_pod<std::uint64_t>(out, net.k_groups());
    for (const auto& layer : net.encoder().layers()) {
        write_tensor(out, layer.weight.data);
        write_tensor(out, layer.bias);
    }
    write_tensor(out, net.head_c().weight.data);
    write_tensor(out, net.head_c().bias);
    write_tensor(out, net.head_a().weight.data);
    write_tensor(out, net.head_a().bias);
}

DualHeadNetwork read_checkpoint(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ArtifactError("checkpoint: bad magic (expected UDG1)");
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion)
        throw ArtifactError("checkpoint: unsupported version " + std::to_string(version));
    const auto input_dim = read_pod<std::uint64_t>(in);
    const auto n_hidden = read_pod<std::uint64_t>(in);
    std::vector<std::size_t> hidden(n_hidden);
    for (auto& w : hidden) w = read_pod<std::uint64_t>(in);
    const auto n_classes = read_pod<std::uint64_t>(in);
    const auto k_groups = read_pod<std::uint64_t>(in);

    Rng rng(0); // overwritten below
    DualHeadNetwork net(input_dim, hidden, n_classes, k_groups, rng);
    for (auto& layer : net.encoder().layers()) {
        read_tensor(in, layer.weight.data);
        read_tensor(in, layer.bias);
    }
    read_tensor(in, net.head_c().weight.data);
    read_tensor(in, net.head_c().bias);
    read_tensor(in, net.head_a().weight.data);
    read_tensor(in, net.head_a().bias);
    return net;
}

void save_checkpoint(const DualHeadNetwork& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("checkpoint: cannot open for write: " + path);
    write_checkpoint(net, out);
    if (!out) throw ArtifactError("checkpoint: write failed: " + path);
}

DualHeadNetwork load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("checkpoint: cannot open: " + path);
    return read_checkpoint(in);
}

} // namespace udg
