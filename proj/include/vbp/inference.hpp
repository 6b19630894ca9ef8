#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vbp/model.hpp"
#include "vbp/tensor.hpp"

namespace vbp {

/// One conv stage of the trace: the feature maps after the ReLU that
/// follows the conv, plus the conv geometry that produced them.
struct TraceStage {
    Tensor post_relu;  // (C,H,W)
    int kernel_h = 0, kernel_w = 0;
    int stride_h = 1, stride_w = 1;
};

struct ActivationTrace {
    std::vector<TraceStage> stages;     // network order, one per conv stage
    std::array<int, 3> input_shape{};
};

struct ForwardResult {
    std::vector<float> output;
    ActivationTrace trace;
};

/// Full forward pass. Pure function of (model, input); records one trace
/// stage per Conv2d. For conv-only models the output is the flattened
/// final feature maps.
ForwardResult forward(const Model& m, const Tensor& input);

// Per-layer kernels. conv2d_forward parallelizes over output maps with
// OpenMP; conv2d_forward_serial is the reference kept for testing and
// produces bit-identical results (same per-element summation order:
// channel-major, then kernel row, then kernel column, double accumulator).
Tensor conv2d_forward(const Conv2d& layer, const Tensor& x);
Tensor conv2d_forward_serial(const Conv2d& layer, const Tensor& x);
Tensor batchnorm_forward(const BatchNorm& layer, const Tensor& x);
Tensor relu_forward(const Tensor& x);
std::vector<float> fc_forward(const FullyConnected& layer, const std::vector<float>& x);

/// Process-wide count of forward() invocations (test hook).
std::uint64_t forward_invocations();

}  // namespace vbp
