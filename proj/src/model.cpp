#include "vbp/model.hpp"

#include <cmath>
#include <sstream>

namespace vbp {

namespace {

[[noreturn]] void fail(std::size_t layer_index, const std::string& what) {
    std::ostringstream os;
    os << "layer " << layer_index << ": " << what;
    throw ShapeError(os.str());
}

std::string dim3(const std::array<int, 3>& s) {
    std::ostringstream os;
    os << s[0] << "x" << s[1] << "x" << s[2];
    return os.str();
}

}  // namespace

void validate(const Model& m) {
    for (int e : m.input_shape)
        if (e <= 0) throw ShapeError("model input shape must be positive, got " + dim3(m.input_shape));

    std::array<int, 3> cur = m.input_shape;
    bool flat = false;
    int flat_dim = 0;
    bool conv_pending = false;  // conv seen, ReLU not yet

    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const LayerSpec& layer = m.layers[i];
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            if (flat) fail(i, "conv2d after flatten");
            if (conv_pending) fail(i, "conv2d not followed by a ReLU before the next conv2d");
            if (conv->kernel_h < 1 || conv->kernel_w < 1) fail(i, "conv kernel must be >= 1");
            if (conv->stride_h < 1 || conv->stride_w < 1) fail(i, "conv stride must be >= 1");
            if (conv->in_channels != cur[0]) {
                std::ostringstream os;
                os << "conv expects " << conv->in_channels << " input channels, chain provides " << cur[0];
                fail(i, os.str());
            }
            const std::size_t want = static_cast<std::size_t>(conv->out_channels) *
                                     conv->in_channels * conv->kernel_h * conv->kernel_w;
            if (conv->weights.size() != want) fail(i, "conv weight count mismatch");
            if (conv->bias.size() != static_cast<std::size_t>(conv->out_channels))
                fail(i, "conv bias count mismatch");
            if (cur[1] < conv->kernel_h || cur[2] < conv->kernel_w) {
                std::ostringstream os;
                os << "conv kernel " << conv->kernel_h << "x" << conv->kernel_w
                   << " larger than input " << cur[1] << "x" << cur[2];
                fail(i, os.str());
            }
            cur = {conv->out_channels, conv_out(cur[1], conv->kernel_h, conv->stride_h),
                   conv_out(cur[2], conv->kernel_w, conv->stride_w)};
            conv_pending = true;
        } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
            if (flat) fail(i, "batchnorm after flatten");
            if (bn->channels != cur[0]) fail(i, "batchnorm channel mismatch");
            if (bn->eps <= 0.0f) fail(i, "batchnorm eps must be positive");
            const auto n = static_cast<std::size_t>(bn->channels);
            if (bn->gamma.size() != n || bn->beta.size() != n ||
                bn->running_mean.size() != n || bn->running_var.size() != n)
                fail(i, "batchnorm parameter count mismatch");
            for (float v : bn->running_var)
                if (v < 0.0f) fail(i, "batchnorm running_var must be non-negative");
        } else if (std::holds_alternative<ReLU>(layer)) {
            conv_pending = false;
        } else if (std::holds_alternative<Flatten>(layer)) {
            if (flat) fail(i, "double flatten");
            if (conv_pending) fail(i, "conv2d not followed by a ReLU before flatten");
            flat = true;
            flat_dim = cur[0] * cur[1] * cur[2];
        } else if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
            if (!flat) fail(i, "fully-connected layer requires a preceding flatten");
            if (fc->in_dim != flat_dim) {
                std::ostringstream os;
                os << "fc expects " << fc->in_dim << " inputs, chain provides " << flat_dim;
                fail(i, os.str());
            }
            const std::size_t want = static_cast<std::size_t>(fc->out_dim) * fc->in_dim;
            if (fc->weights.size() != want) fail(i, "fc weight count mismatch");
            if (fc->bias.size() != static_cast<std::size_t>(fc->out_dim))
                fail(i, "fc bias count mismatch");
            flat_dim = fc->out_dim;
        }
    }
    if (conv_pending)
        fail(m.layers.size() - 1, "trailing conv2d has no ReLU");
}

int conv_stage_count(const Model& m) {
    int n = 0;
    for (const auto& layer : m.layers)
        if (std::holds_alternative<Conv2d>(layer)) ++n;
    return n;
}

int output_dim(const Model& m) {
    std::array<int, 3> cur = m.input_shape;
    int flat_dim = cur[0] * cur[1] * cur[2];
    for (const auto& layer : m.layers) {
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            cur = {conv->out_channels, conv_out(cur[1], conv->kernel_h, conv->stride_h),
                   conv_out(cur[2], conv->kernel_w, conv->stride_w)};
            flat_dim = cur[0] * cur[1] * cur[2];
        } else if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
            flat_dim = fc->out_dim;
        }
    }
    return flat_dim;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double seeded_unit(std::uint64_t seed, std::uint64_t layer, std::uint64_t param) {
    const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ layer) ^ param);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

namespace {

float seeded_weight(std::uint64_t seed, std::uint64_t layer, std::uint64_t param) {
    return static_cast<float>(-0.1 + 0.2 * seeded_unit(seed, layer, param));
}

Conv2d make_conv(int in, int out, int k, int s, std::uint64_t seed, std::uint64_t layer_index) {
    Conv2d c;
    c.in_channels = in;
    c.out_channels = out;
    c.kernel_h = c.kernel_w = k;
    c.stride_h = c.stride_w = s;
    const std::size_t n = static_cast<std::size_t>(out) * in * k * k;
    c.weights.resize(n);
    for (std::size_t p = 0; p < n; ++p) c.weights[p] = seeded_weight(seed, layer_index, p);
    c.bias.assign(out, 0.01f);
    return c;
}

BatchNorm make_bn(int channels) {
    BatchNorm bn;
    bn.channels = channels;
    bn.gamma.assign(channels, 1.0f);
    bn.beta.assign(channels, 0.0f);
    bn.running_mean.assign(channels, 0.0f);
    bn.running_var.assign(channels, 1.0f);
    bn.eps = 1e-5f;
    return bn;
}

FullyConnected make_fc(int in, int out, std::uint64_t seed, std::uint64_t layer_index) {
    FullyConnected fc;
    fc.in_dim = in;
    fc.out_dim = out;
    const std::size_t n = static_cast<std::size_t>(out) * in;
    fc.weights.resize(n);
    for (std::size_t p = 0; p < n; ++p) fc.weights[p] = seeded_weight(seed, layer_index, p);
    fc.bias.assign(out, 0.01f);
    return fc;
}

/// Conv backbone of bn+conv+relu stages followed by flatten and FC head.
Model stack_net(std::array<int, 3> input, const std::vector<int>& channels,
                const std::vector<int>& strides, const std::vector<int>& fc_dims,
                std::uint64_t seed) {
    Model m;
    m.input_shape = input;
    std::array<int, 3> cur = input;
    std::uint64_t li = 0;
    for (std::size_t s = 0; s < channels.size(); ++s) {
        m.layers.emplace_back(make_bn(cur[0]));
        ++li;
        m.layers.emplace_back(make_conv(cur[0], channels[s], 3, strides[s], seed, li));
        ++li;
        m.layers.emplace_back(ReLU{});
        ++li;
        cur = {channels[s], conv_out(cur[1], 3, strides[s]), conv_out(cur[2], 3, strides[s])};
    }
    m.layers.emplace_back(Flatten{});
    ++li;
    int dim = cur[0] * cur[1] * cur[2];
    for (std::size_t f = 0; f < fc_dims.size(); ++f) {
        m.layers.emplace_back(make_fc(dim, fc_dims[f], seed, li));
        ++li;
        dim = fc_dims[f];
        if (f + 1 < fc_dims.size()) {
            m.layers.emplace_back(ReLU{});
            ++li;
        }
    }
    return m;
}

}  // namespace

Model preset(std::string_view name, std::uint64_t seed) {
    const std::vector<int> svf_channels = {32, 32, 48, 48, 64, 64, 96, 96, 128, 128};
    const std::vector<int> svf_strides = {1, 2, 1, 2, 1, 2, 1, 2, 1, 2};
    Model m;
    if (name == "netsvf") {
        m = stack_net({1, 135, 640}, svf_channels, svf_strides, {1024, 512, 1}, seed);
    } else if (name == "nethvf") {
        m = stack_net({1, 135, 351}, svf_channels, svf_strides, {1024, 512, 1}, seed);
    } else if (name == "gtsdb") {
        m = stack_net({3, 125, 125}, {16, 16, 24, 24, 32, 32, 48, 48},
                      {1, 2, 1, 2, 1, 2, 1, 2}, {64, 43}, seed);
    } else if (name == "tiny") {
        m.input_shape = {1, 6, 6};
        m.layers.emplace_back(make_bn(1));
        m.layers.emplace_back(make_conv(1, 2, 2, 1, seed, 1));
        m.layers.emplace_back(ReLU{});
        m.layers.emplace_back(make_bn(2));
        m.layers.emplace_back(make_conv(2, 2, 2, 1, seed, 4));
        m.layers.emplace_back(ReLU{});
        m.layers.emplace_back(Flatten{});
        m.layers.emplace_back(make_fc(2 * 4 * 4, 1, seed, 7));
    } else {
        throw Error("unknown preset: " + std::string(name));
    }
    validate(m);
    return m;
}

Model conv_relu_backbone(const Model& m) {
    Model out;
    out.input_shape = m.input_shape;
    std::size_t last_keep = 0;
    std::vector<LayerSpec> kept;
    for (const auto& layer : m.layers) {
        if (std::holds_alternative<BatchNorm>(layer)) continue;
        if (std::holds_alternative<Flatten>(layer) ||
            std::holds_alternative<FullyConnected>(layer))
            break;
        kept.push_back(layer);
        if (std::holds_alternative<ReLU>(layer)) last_keep = kept.size();
    }
    kept.resize(last_keep);
    out.layers = std::move(kept);
    validate(out);
    return out;
}

}  // namespace vbp
