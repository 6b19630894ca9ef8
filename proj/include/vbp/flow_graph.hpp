#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vbp/model.hpp"
#include "vbp/tensor.hpp"

namespace vbp {

/// Node of the multipartite flow graph. Part 0 is the input image; parts
/// 1..L are conv stages. gamma is the total weighted input flow, bias the
/// flow loss at the node (the negated conv bias), activation the
/// post-ReLU value. Part-0 nodes carry the pixel value in both gamma and
/// activation.
struct FlowNode {
    int part = 0;
    int channel = 0, row = 0, col = 0;
    double gamma = 0.0;
    double activation = 0.0;
    double bias = 0.0;
    bool dead = false;  // zero activation; excluded from path enumeration
};

struct FlowEdge {
    int from = 0;  // node index in part i-1
    int to = 0;    // node index in part i
    double weight = 0.0;
    double amplification = 1.0;  // c_e, filled in by to_bias_free
    bool dead = false;
};

struct FlowGraph {
    std::vector<FlowNode> nodes;
    std::vector<FlowEdge> edges;
    std::vector<std::vector<int>> parts;      // node indices per part, 0..L
    std::vector<std::vector<int>> out_edges;  // edge indices per node
    int num_parts() const { return static_cast<int>(parts.size()); }
    bool bias_free = false;  // amplifications populated
};

inline constexpr std::uint64_t kDefaultPathCap = 10'000'000;

/// Builds the flow graph for a conv+ReLU stride-1 model by running an
/// internal forward pass. Rejects other layer kinds, strides != 1, and
/// graphs whose live-path count exceeds the cap.
FlowGraph build_flow_graph(const Model& m, const Tensor& input,
                           std::uint64_t path_cap = kDefaultPathCap);

/// Number of live source-to-sink paths (paths avoiding dead nodes).
std::uint64_t live_path_count(const FlowGraph& g);

/// Bias-removal transform: each live edge v' -> v gets amplification
/// c_e = a(v') / gamma(v). Errors on a live flow-receiving node with
/// gamma == 0.
FlowGraph to_bias_free(const FlowGraph& g);

/// Replays flow through a bias-free graph (no ReLU, no losses) and
/// returns the resulting per-node activations; dead nodes replay as 0.
std::vector<double> replay_activations(const FlowGraph& g);

enum class PhiVariant {
    no_bias,  // gamma(X) * sum_P prod (c_e * w_e)
    general,  // gamma(X) * sum_P prod [a_e / (a_e + b_e)] * w_e
    vbp,      // sum_P prod a_e, times gamma(X) iff include_source
};

/// Path-sum contribution of one part-0 node. Internally exact (rational
/// arithmetic over a DAG suffix-sum recursion), rounded to double once at
/// the end, so it agrees bit-for-bit with naive enumeration.
double phi(const FlowGraph& g, int source_node, PhiVariant variant, bool include_source);

/// phi for every part-0 node (indices parallel to g.parts[0]); one DP
/// sweep shared by all sources.
std::vector<double> phi_all(const FlowGraph& g, PhiVariant variant, bool include_source);

/// Literal depth-first path enumeration; the independence check for the
/// DP oracle. Only viable on very small graphs.
double phi_naive(const FlowGraph& g, int source_node, PhiVariant variant, bool include_source);

struct ProportionalityReport {
    std::string matched_variant;  // "with_source" | "without_source" | "inconclusive"
    double ratio_mean = 0.0;
    double ratio_spread = 0.0;    // max/min - 1 for the matched variant
    int pixels_evaluated = 0;
    double spread_with_source = 0.0;
    double spread_without_source = 0.0;
};

/// Compares the pre-normalization VisualBackProp mask against the vbp
/// phi variant at every spatial pixel with nonzero oracle value, for both
/// settings of the source factor, and reports which one is proportional.
ProportionalityReport vbp_proportionality_report(const Model& m, const Tensor& input);

}  // namespace vbp
