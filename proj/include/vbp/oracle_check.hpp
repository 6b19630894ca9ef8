#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vbp/flow_graph.hpp"
#include "vbp/model.hpp"

namespace vbp {

/// Spread tolerance for a conclusive proportionality trial.
inline constexpr double kProportionalitySpreadTol = 1e-5;

/// Random conv+ReLU stride-1 model for oracle trials: 1-2 conv stages,
/// channels <= 3, kernels <= 3x3, input up to (max_h, max_w). Weights
/// uniform [-1,1], biases uniform [-0.2,0.2] (or 0 when zero_bias).
Model random_oracle_model(std::mt19937_64& rng, int max_h, int max_w, bool zero_bias = false);

/// Matching random input: uniform [0,1] pixels.
Tensor random_input(std::mt19937_64& rng, const Model& m);

struct OracleTrial {
    int index = 0;
    std::string status;  // "pass" | "fail" | "inconclusive"
    std::string detail;
    ProportionalityReport report;
};

struct OracleCheckResult {
    int passed = 0;
    int failed = 0;
    int inconclusive = 0;
    std::vector<OracleTrial> trials;
    bool ok() const { return failed == 0; }
};

/// Runs `trials` randomized trials. Each trial builds the flow graph,
/// verifies the degree property, the bias-free replay, the phi identity
/// (general closed form vs the transformed graph), and the VisualBackProp
/// proportionality spread. Deterministic for a fixed seed.
OracleCheckResult run_oracle_check(std::uint64_t seed, int trials, int max_h, int max_w);

/// Degree-property check: every non-borderline node of part i-1 has
/// exactly m_i * r_i * f_i out-edges. Returns an empty string on success,
/// a diagnostic otherwise.
std::string check_degree_property(const FlowGraph& g, const Model& m);

}  // namespace vbp
