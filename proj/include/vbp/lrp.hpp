#pragma once

#include <vector>

#include "vbp/model.hpp"
#include "vbp/tensor.hpp"
#include "vbp/visualbackprop.hpp"

namespace vbp {

struct LrpConfig {
    float epsilon = 100.0f;  // stabilizer, >= 0
    int output_index = -1;   // -1: argmax logit (index 0 for single-output heads)
};

struct LrpResult {
    Tensor raw;         // (H,W) per-pixel relevance, summed over input channels
    SaliencyMask mask;  // normalized raw
};

/// Forward activations cached for the backward relevance sweep: the input
/// to every layer, in network order, plus the network output.
struct LrpForwardCache {
    std::vector<Tensor> layer_inputs;  // rank 3 before flatten, rank 1 after
    std::vector<float> output;
};

LrpForwardCache lrp_forward(const Model& m, const Tensor& input);

/// Epsilon-rule backward pass over a cached forward. Relevance starts at
/// the chosen output neuron with its activation value; linear layers
/// redistribute by input share z_ij / (z_j + eps*sign(z_j)), ReLU passes
/// relevance through, BatchNorm is treated as per-channel affine, bias
/// relevance is absorbed.
LrpResult lrp_backward(const Model& m, const LrpForwardCache& cache, const LrpConfig& cfg);

/// Convenience wrapper: forward + backward.
LrpResult lrp_relevance(const Model& m, const Tensor& input, const LrpConfig& cfg = {});

}  // namespace vbp
