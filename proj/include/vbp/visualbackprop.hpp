#pragma once

#include <vector>

#include "vbp/inference.hpp"
#include "vbp/tensor.hpp"

namespace vbp {

struct SaliencyMask {
    Tensor values;                     // (H,W), in [0,1], input resolution
    std::vector<Tensor> intermediates; // per-stage masks, deepest first (optional)
};

/// All-ones transposed convolution used to upsample a map back to the
/// previous stage's resolution. The full transposed output has size
/// ((h-1)*sh + kh, (w-1)*sw + kw); missing bottom/right rows up to
/// (target_h, target_w) are zero-padded. A target smaller than the full
/// output is a geometry error.
Tensor deconv_unit(const Tensor& map, int kernel_h, int kernel_w,
                   int stride_h, int stride_w, int target_h, int target_w);

/// Pre-normalization mask from an already-computed trace. Exposed for
/// benchmarking and for the flow-graph proportionality check.
Tensor vbp_raw_from_trace(const ActivationTrace& trace);

/// The full algorithm: one forward pass, averaged post-ReLU maps combined
/// deepest-to-shallowest by deconv + pointwise product, final mask
/// normalized to [0,1].
SaliencyMask visualbackprop(const Model& m, const Tensor& input,
                            bool keep_intermediates = false);

}  // namespace vbp
