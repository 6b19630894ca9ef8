#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vbp/tensor.hpp"

namespace vbp {

struct Conv2d {
    int in_channels = 0, out_channels = 0;
    int kernel_h = 0, kernel_w = 0;
    int stride_h = 1, stride_w = 1;
    std::vector<float> weights;  // [out][in][kh][kw]
    std::vector<float> bias;     // [out]
};

struct BatchNorm {
    int channels = 0;
    std::vector<float> gamma, beta, running_mean, running_var;
    float eps = 1e-5f;
};

struct ReLU {};
struct Flatten {};

struct FullyConnected {
    int in_dim = 0, out_dim = 0;
    std::vector<float> weights;  // [out][in]
    std::vector<float> bias;     // [out]
};

using LayerSpec = std::variant<Conv2d, BatchNorm, ReLU, Flatten, FullyConnected>;

struct Model {
    std::vector<LayerSpec> layers;
    std::array<int, 3> input_shape{};  // (C,H,W)
};

/// Valid-convolution output size: floor((in - k) / s) + 1.
inline int conv_out(int in, int k, int s) { return (in - k) / s + 1; }

/// Checks per-layer invariants plus the whole-model shape chain and the
/// rule that every Conv2d is followed by a ReLU before the next Conv2d
/// (and before the end of the network). Throws ShapeError with the
/// offending layer index.
void validate(const Model& m);

/// Number of Conv2d layers.
int conv_stage_count(const Model& m);

/// Output dimension of the full network for a given model.
int output_dim(const Model& m);

/// Deterministic preset architectures with seeded weights.
/// Names: netsvf, nethvf, gtsdb, tiny.
Model preset(std::string_view name, std::uint64_t seed);

/// Drops BatchNorm layers and everything after the last conv-stage ReLU,
/// leaving the pure conv+ReLU backbone the flow graph accepts.
Model conv_relu_backbone(const Model& m);

/// splitmix64 step; also the basis of preset weight generation.
std::uint64_t splitmix64(std::uint64_t x);

/// Uniform [0,1) value from a (seed, layer, parameter) key.
double seeded_unit(std::uint64_t seed, std::uint64_t layer, std::uint64_t param);

}  // namespace vbp
