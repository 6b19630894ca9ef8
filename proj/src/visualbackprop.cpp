#include "vbp/visualbackprop.hpp"

#include <sstream>

namespace vbp {

Tensor deconv_unit(const Tensor& map, int kernel_h, int kernel_w,
                   int stride_h, int stride_w, int target_h, int target_w) {
    if (map.rank() != 2) throw ShapeError("deconv_unit expects an (H,W) map");
    const int h = map.shape()[0], w = map.shape()[1];
    const int full_h = (h - 1) * stride_h + kernel_h;
    const int full_w = (w - 1) * stride_w + kernel_w;
    if (target_h < full_h || target_w < full_w) {
        std::ostringstream os;
        os << "deconv target " << target_h << "x" << target_w
           << " smaller than full transposed output " << full_h << "x" << full_w;
        throw ShapeError(os.str());
    }

    Tensor out({target_h, target_w});
    const float* src = map.data().data();
    float* dst = out.data().data();

    // Gather form: out[i,j] sums map[p,q] over placements p*sh+u == i,
    // q*sw+v == j with (u,v) inside the kernel.
#pragma omp parallel for schedule(static)
    for (int i = 0; i < full_h; ++i) {
        const int p_lo = std::max(0, (i - kernel_h + stride_h) / stride_h);
        const int p_hi = std::min(h - 1, i / stride_h);
        for (int j = 0; j < full_w; ++j) {
            const int q_lo = std::max(0, (j - kernel_w + stride_w) / stride_w);
            const int q_hi = std::min(w - 1, j / stride_w);
            double acc = 0.0;
            for (int p = p_lo; p <= p_hi; ++p)
                for (int q = q_lo; q <= q_hi; ++q)
                    acc += src[static_cast<std::size_t>(p) * w + q];
            dst[static_cast<std::size_t>(i) * target_w + j] = static_cast<float>(acc);
        }
    }
    return out;
}

Tensor vbp_raw_from_trace(const ActivationTrace& trace) {
    if (trace.stages.empty())
        throw Error("visualbackprop requires at least one conv stage");

    const int n = static_cast<int>(trace.stages.size());
    Tensor mask = channel_mean(trace.stages[n - 1].post_relu);
    for (int l = n - 2; l >= 0; --l) {
        const TraceStage& below = trace.stages[l];
        const TraceStage& above = trace.stages[l + 1];
        Tensor avg = channel_mean(below.post_relu);
        Tensor up = deconv_unit(mask, above.kernel_h, above.kernel_w,
                                above.stride_h, above.stride_w,
                                avg.shape()[0], avg.shape()[1]);
        mask = pointwise_multiply(avg, up);
    }
    const TraceStage& first = trace.stages[0];
    return deconv_unit(mask, first.kernel_h, first.kernel_w,
                       first.stride_h, first.stride_w,
                       trace.input_shape[1], trace.input_shape[2]);
}

SaliencyMask visualbackprop(const Model& m, const Tensor& input, bool keep_intermediates) {
    ForwardResult fwd = forward(m, input);
    const auto& stages = fwd.trace.stages;
    if (stages.empty())
        throw Error("visualbackprop requires at least one conv stage");

    SaliencyMask result;
    if (!keep_intermediates) {
        result.values = normalize_unit_interval(vbp_raw_from_trace(fwd.trace));
        return result;
    }

    const int n = static_cast<int>(stages.size());
    Tensor mask = channel_mean(stages[n - 1].post_relu);
    result.intermediates.push_back(mask);
    for (int l = n - 2; l >= 0; --l) {
        Tensor avg = channel_mean(stages[l].post_relu);
        Tensor up = deconv_unit(mask, stages[l + 1].kernel_h, stages[l + 1].kernel_w,
                                stages[l + 1].stride_h, stages[l + 1].stride_w,
                                avg.shape()[0], avg.shape()[1]);
        mask = pointwise_multiply(avg, up);
        result.intermediates.push_back(mask);
    }
    Tensor raw = deconv_unit(mask, stages[0].kernel_h, stages[0].kernel_w,
                             stages[0].stride_h, stages[0].stride_w,
                             fwd.trace.input_shape[1], fwd.trace.input_shape[2]);
    result.values = normalize_unit_interval(raw);
    return result;
}

}  // namespace vbp
