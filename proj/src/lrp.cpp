#include "vbp/lrp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vbp {

namespace {

inline double stabilized(double z, double eps) {
    return z + (z < 0.0 ? -eps : eps);
}

}  // namespace

LrpForwardCache lrp_forward(const Model& m, const Tensor& input) {
    LrpForwardCache cache;
    Tensor x = input;
    bool flat = false;
    for (const auto& layer : m.layers) {
        cache.layer_inputs.push_back(x);
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            x = conv2d_forward(*conv, x);
        } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
            x = batchnorm_forward(*bn, x);
        } else if (std::holds_alternative<ReLU>(layer)) {
            x = relu_forward(x);
        } else if (std::holds_alternative<Flatten>(layer)) {
            x = Tensor({static_cast<int>(x.size())}, x.data());
            flat = true;
        } else if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
            x = Tensor({fc->out_dim}, fc_forward(*fc, x.data()));
        }
    }
    (void)flat;
    cache.output = x.data();
    return cache;
}

LrpResult lrp_backward(const Model& m, const LrpForwardCache& cache, const LrpConfig& cfg) {
    if (cfg.epsilon < 0.0f) throw Error("lrp epsilon must be non-negative");
    const int out_dim = static_cast<int>(cache.output.size());
    int idx = cfg.output_index;
    if (idx < 0)
        idx = static_cast<int>(std::max_element(cache.output.begin(), cache.output.end()) -
                               cache.output.begin());
    if (idx >= out_dim) {
        std::ostringstream os;
        os << "output_index " << cfg.output_index << " out of range for " << out_dim << " outputs";
        throw Error(os.str());
    }

    const double eps = cfg.epsilon;

    // Relevance over the current layer's output, walked backward.
    std::vector<double> rel(out_dim, 0.0);
    rel[idx] = cache.output[idx];

    const int n_layers = static_cast<int>(m.layers.size());
    for (int li = n_layers - 1; li >= 0; --li) {
        const Tensor& x = cache.layer_inputs[li];
        const std::vector<float>& z = (li + 1 < n_layers)
                                          ? cache.layer_inputs[li + 1].data()
                                          : cache.output;
        const LayerSpec& layer = m.layers[li];

        if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
            std::vector<double> next(fc->in_dim, 0.0);
            for (int j = 0; j < fc->out_dim; ++j) {
                if (rel[j] == 0.0) continue;
                const double f = rel[j] / stabilized(z[j], eps);
                const float* row = fc->weights.data() + static_cast<std::size_t>(j) * fc->in_dim;
                for (int i = 0; i < fc->in_dim; ++i)
                    next[i] += static_cast<double>(x[i]) * row[i] * f;
            }
            rel = std::move(next);
        } else if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            const int cin = conv->in_channels, hin = x.shape()[1], win = x.shape()[2];
            const int kh = conv->kernel_h, kw = conv->kernel_w;
            const int sh = conv->stride_h, sw = conv->stride_w;
            const int hout = conv_out(hin, kh, sh), wout = conv_out(win, kw, sw);
            std::vector<double> next(x.size(), 0.0);
            const float* xd = x.data().data();
            for (int o = 0; o < conv->out_channels; ++o) {
                const float* wbase = conv->weights.data() +
                                     static_cast<std::size_t>(o) * cin * kh * kw;
                for (int i = 0; i < hout; ++i) {
                    for (int j = 0; j < wout; ++j) {
                        const std::size_t oi = (static_cast<std::size_t>(o) * hout + i) * wout + j;
                        if (rel[oi] == 0.0) continue;
                        const double f = rel[oi] / stabilized(z[oi], eps);
                        for (int c = 0; c < cin; ++c) {
                            const std::size_t xrow0 = (static_cast<std::size_t>(c) * hin + i * sh) * win + j * sw;
                            const float* wrow = wbase + static_cast<std::size_t>(c) * kh * kw;
                            for (int u = 0; u < kh; ++u)
                                for (int v = 0; v < kw; ++v)
                                    next[xrow0 + static_cast<std::size_t>(u) * win + v] +=
                                        static_cast<double>(xd[xrow0 + static_cast<std::size_t>(u) * win + v]) *
                                        wrow[u * kw + v] * f;
                        }
                    }
                }
            }
            rel = std::move(next);
        } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
            const std::size_t plane = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
            std::vector<double> next(x.size(), 0.0);
            for (int c = 0; c < bn->channels; ++c) {
                const double scale = bn->gamma[c] /
                                     std::sqrt(static_cast<double>(bn->running_var[c]) + bn->eps);
                for (std::size_t i = 0; i < plane; ++i) {
                    const std::size_t k = c * plane + i;
                    if (rel[k] == 0.0) continue;
                    next[k] = scale * x[k] / stabilized(z[k], eps) * rel[k];
                }
            }
            rel = std::move(next);
        }
        // ReLU and Flatten pass relevance through; the flat buffer indexes
        // the same elements either way.
    }

    const Tensor& input = cache.layer_inputs.front();
    const int cin = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor raw({h, w});
    for (std::size_t i = 0; i < plane; ++i) {
        double acc = 0.0;
        for (int c = 0; c < cin; ++c) acc += rel[c * plane + i];
        raw[i] = static_cast<float>(acc);
    }

    LrpResult result;
    result.raw = raw;
    result.mask.values = normalize_unit_interval(raw);
    return result;
}

LrpResult lrp_relevance(const Model& m, const Tensor& input, const LrpConfig& cfg) {
    return lrp_backward(m, lrp_forward(m, input), cfg);
}

}  // namespace vbp
