#include "vbp/inference.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace vbp {

namespace {

std::atomic<std::uint64_t> g_forward_calls{0};

template <bool Parallel>
Tensor conv2d_impl(const Conv2d& layer, const Tensor& x) {
    if (x.rank() != 3 || x.shape()[0] != layer.in_channels)
        throw ShapeError("conv2d input shape mismatch");
    const int cin = layer.in_channels, hin = x.shape()[1], win = x.shape()[2];
    const int kh = layer.kernel_h, kw = layer.kernel_w;
    const int sh = layer.stride_h, sw = layer.stride_w;
    if (hin < kh || win < kw) {
        std::ostringstream os;
        os << "conv kernel " << kh << "x" << kw << " larger than input " << hin << "x" << win;
        throw ShapeError(os.str());
    }
    const int hout = conv_out(hin, kh, sh), wout = conv_out(win, kw, sw);
    Tensor out({layer.out_channels, hout, wout});

    const float* xd = x.data().data();
    const float* wd = layer.weights.data();
    float* od = out.data().data();

#pragma omp parallel for collapse(2) schedule(static) if (Parallel)
    for (int o = 0; o < layer.out_channels; ++o) {
        for (int i = 0; i < hout; ++i) {
            for (int j = 0; j < wout; ++j) {
                double acc = layer.bias[o];
                for (int c = 0; c < cin; ++c) {
                    const float* xrow = xd + (static_cast<std::size_t>(c) * hin + i * sh) * win + j * sw;
                    const float* wrow = wd + ((static_cast<std::size_t>(o) * cin + c) * kh) * kw;
                    for (int u = 0; u < kh; ++u) {
                        for (int v = 0; v < kw; ++v)
                            acc += static_cast<double>(wrow[v]) * xrow[v];
                        xrow += win;
                        wrow += kw;
                    }
                }
                od[(static_cast<std::size_t>(o) * hout + i) * wout + j] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

}  // namespace

Tensor conv2d_forward(const Conv2d& layer, const Tensor& x) {
    return conv2d_impl<true>(layer, x);
}

Tensor conv2d_forward_serial(const Conv2d& layer, const Tensor& x) {
    return conv2d_impl<false>(layer, x);
}

Tensor batchnorm_forward(const BatchNorm& layer, const Tensor& x) {
    if (x.rank() != 3 || x.shape()[0] != layer.channels)
        throw ShapeError("batchnorm channel mismatch");
    const int h = x.shape()[1], w = x.shape()[2];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor out(x.shape());
    for (int c = 0; c < layer.channels; ++c) {
        const double scale = layer.gamma[c] /
                             std::sqrt(static_cast<double>(layer.running_var[c]) + layer.eps);
        const double shift = layer.beta[c] - scale * layer.running_mean[c];
        const float* src = x.data().data() + c * plane;
        float* dst = out.data().data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i)
            dst[i] = static_cast<float>(scale * src[i] + shift);
    }
    return out;
}

Tensor relu_forward(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
    return out;
}

std::vector<float> fc_forward(const FullyConnected& layer, const std::vector<float>& x) {
    if (x.size() != static_cast<std::size_t>(layer.in_dim))
        throw ShapeError("fc input dimension mismatch");
    std::vector<float> out(layer.out_dim);
    for (int o = 0; o < layer.out_dim; ++o) {
        double acc = layer.bias[o];
        const float* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
        for (int i = 0; i < layer.in_dim; ++i) acc += static_cast<double>(row[i]) * x[i];
        out[o] = static_cast<float>(acc);
    }
    return out;
}

ForwardResult forward(const Model& m, const Tensor& input) {
    g_forward_calls.fetch_add(1, std::memory_order_relaxed);
    if (input.rank() != 3 || input.shape()[0] != m.input_shape[0] ||
        input.shape()[1] != m.input_shape[1] || input.shape()[2] != m.input_shape[2]) {
        std::ostringstream os;
        os << "input shape mismatch: model expects (" << m.input_shape[0] << ","
           << m.input_shape[1] << "," << m.input_shape[2] << ")";
        throw ShapeError(os.str());
    }

    ForwardResult result;
    result.trace.input_shape = m.input_shape;

    Tensor x = input;
    std::vector<float> vec;
    bool flat = false;
    bool conv_pending = false;
    int pending_kh = 0, pending_kw = 0, pending_sh = 1, pending_sw = 1;

    for (const auto& layer : m.layers) {
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            x = conv2d_forward(*conv, x);
            conv_pending = true;
            pending_kh = conv->kernel_h;
            pending_kw = conv->kernel_w;
            pending_sh = conv->stride_h;
            pending_sw = conv->stride_w;
        } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
            x = batchnorm_forward(*bn, x);
        } else if (std::holds_alternative<ReLU>(layer)) {
            if (flat) {
                for (float& v : vec) v = v > 0.0f ? v : 0.0f;
            } else {
                x = relu_forward(x);
                if (conv_pending) {
                    result.trace.stages.push_back(
                        {x, pending_kh, pending_kw, pending_sh, pending_sw});
                    conv_pending = false;
                }
            }
        } else if (std::holds_alternative<Flatten>(layer)) {
            vec = x.data();
            flat = true;
        } else if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
            vec = fc_forward(*fc, vec);
        }
    }

    result.output = flat ? std::move(vec) : x.data();
    return result;
}

std::uint64_t forward_invocations() { return g_forward_calls.load(std::memory_order_relaxed); }

}  // namespace vbp
