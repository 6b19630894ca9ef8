#include "vbp/flow_graph.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "vbp/inference.hpp"
#include "vbp/visualbackprop.hpp"

namespace vbp {

namespace {

using Rational = boost::multiprecision::cpp_rational;

constexpr std::uint64_t kCountCeiling = ~0ULL / 4;

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
    return (a > kCountCeiling - b) ? kCountCeiling : a + b;
}

/// Per-edge path factor for a phi variant, as an exact rational.
Rational edge_factor(const FlowGraph& g, const FlowEdge& e, PhiVariant variant) {
    const FlowNode& to = g.nodes[e.to];
    switch (variant) {
        case PhiVariant::vbp:
            return Rational(to.activation);
        case PhiVariant::general: {
            // a_e + b_e equals gamma(v) exactly in exact arithmetic; gamma
            // is the double-accumulated sum, the numerically consistent
            // denominator (it is also what the transform divides by).
            if (to.gamma == 0.0) return Rational(0);  // genuinely dead contribution
            return Rational(to.activation) / Rational(to.gamma) * Rational(e.weight);
        }
        case PhiVariant::no_bias:
            return Rational(e.amplification) * Rational(e.weight);
    }
    return Rational(0);
}

std::vector<Rational> suffix_sums(const FlowGraph& g, PhiVariant variant) {
    const int last = g.num_parts() - 1;
    std::vector<Rational> s(g.nodes.size(), Rational(0));
    for (int node : g.parts[last])
        if (!g.nodes[node].dead) s[node] = 1;
    for (int part = last - 1; part >= 0; --part) {
        for (int node : g.parts[part]) {
            if (g.nodes[node].dead) continue;
            Rational acc(0);
            for (int ei : g.out_edges[node]) {
                const FlowEdge& e = g.edges[ei];
                if (e.dead) continue;
                acc += edge_factor(g, e, variant) * s[e.to];
            }
            s[node] = std::move(acc);
        }
    }
    return s;
}

double finalize(const FlowGraph& g, int source, const Rational& path_sum,
                PhiVariant variant, bool include_source) {
    Rational total = path_sum;
    if (variant != PhiVariant::vbp || include_source)
        total *= Rational(g.nodes[source].gamma);
    return total.convert_to<double>();
}

}  // namespace

FlowGraph build_flow_graph(const Model& m, const Tensor& input, std::uint64_t path_cap) {
    validate(m);
    std::vector<const Conv2d*> convs;
    for (const auto& layer : m.layers) {
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            if (conv->stride_h != 1 || conv->stride_w != 1)
                throw Error("flow graph requires stride 1 convolutions");
            convs.push_back(conv);
        } else if (!std::holds_alternative<ReLU>(layer)) {
            throw Error("flow graph supports conv+ReLU models only");
        }
    }
    if (convs.empty()) throw Error("flow graph requires at least one conv stage");
    if (input.rank() != 3 || input.shape()[0] != m.input_shape[0] ||
        input.shape()[1] != m.input_shape[1] || input.shape()[2] != m.input_shape[2])
        throw ShapeError("flow graph input shape mismatch");

    FlowGraph g;
    g.parts.resize(convs.size() + 1);
    g.out_edges.clear();

    // Part 0: input pixels.
    const int c0 = input.shape()[0], h0 = input.shape()[1], w0 = input.shape()[2];
    for (int c = 0; c < c0; ++c)
        for (int r = 0; r < h0; ++r)
            for (int col = 0; col < w0; ++col) {
                FlowNode node;
                node.part = 0;
                node.channel = c;
                node.row = r;
                node.col = col;
                node.gamma = input.at(c, r, col);
                node.activation = input.at(c, r, col);
                node.dead = node.activation == 0.0;
                g.parts[0].push_back(static_cast<int>(g.nodes.size()));
                g.nodes.push_back(node);
            }

    Tensor x = input;
    int part = 1;
    std::size_t prev_base = 0;  // node index of (0,0,0) in the previous part
    for (const Conv2d* conv : convs) {
        const Tensor pre = conv2d_forward(*conv, x);
        const Tensor post = relu_forward(pre);
        const int hin = x.shape()[1], win = x.shape()[2];
        const int hout = pre.shape()[1], wout = pre.shape()[2];
        const std::size_t base = g.nodes.size();

        for (int o = 0; o < conv->out_channels; ++o)
            for (int i = 0; i < hout; ++i)
                for (int j = 0; j < wout; ++j) {
                    FlowNode node;
                    node.part = part;
                    node.channel = o;
                    node.row = i;
                    node.col = j;
                    node.bias = -static_cast<double>(conv->bias[o]);
                    node.activation = post.at(o, i, j);
                    node.dead = node.activation == 0.0;
                    g.parts[part].push_back(static_cast<int>(g.nodes.size()));
                    g.nodes.push_back(node);
                }

        const int cin = conv->in_channels;
        for (int o = 0; o < conv->out_channels; ++o)
            for (int i = 0; i < hout; ++i)
                for (int j = 0; j < wout; ++j) {
                    const int to = static_cast<int>(
                        base + (static_cast<std::size_t>(o) * hout + i) * wout + j);
                    // gamma is accumulated here over the exact edge values
                    // and order, so the bias-free replay reproduces it
                    // without picking up the conv kernel's float rounding.
                    double gamma = 0.0;
                    for (int c = 0; c < cin; ++c)
                        for (int u = 0; u < conv->kernel_h; ++u)
                            for (int v = 0; v < conv->kernel_w; ++v) {
                                const int from = static_cast<int>(
                                    prev_base +
                                    (static_cast<std::size_t>(c) * hin + i + u) * win + j + v);
                                FlowEdge e;
                                e.from = from;
                                e.to = to;
                                e.weight = conv->weights[((static_cast<std::size_t>(o) * cin + c) *
                                                          conv->kernel_h + u) * conv->kernel_w + v];
                                e.dead = g.nodes[from].dead || g.nodes[to].dead;
                                gamma += e.weight * g.nodes[from].activation;
                                g.edges.push_back(e);
                            }
                    g.nodes[to].gamma = gamma;
                }

        prev_base = base;
        x = post;
        ++part;
    }

    g.out_edges.assign(g.nodes.size(), {});
    for (std::size_t ei = 0; ei < g.edges.size(); ++ei)
        g.out_edges[g.edges[ei].from].push_back(static_cast<int>(ei));

    const std::uint64_t paths = live_path_count(g);
    if (paths > path_cap) {
        std::ostringstream os;
        os << "live path count " << paths << " exceeds enumeration cap " << path_cap;
        throw Error(os.str());
    }
    return g;
}

std::uint64_t live_path_count(const FlowGraph& g) {
    const int last = g.num_parts() - 1;
    std::vector<std::uint64_t> count(g.nodes.size(), 0);
    for (int node : g.parts[last])
        if (!g.nodes[node].dead) count[node] = 1;
    for (int part = last - 1; part >= 0; --part)
        for (int node : g.parts[part]) {
            if (g.nodes[node].dead) continue;
            std::uint64_t acc = 0;
            for (int ei : g.out_edges[node])
                if (!g.edges[ei].dead) acc = sat_add(acc, count[g.edges[ei].to]);
            count[node] = acc;
        }
    std::uint64_t total = 0;
    for (int node : g.parts[0]) total = sat_add(total, count[node]);
    return total;
}

FlowGraph to_bias_free(const FlowGraph& g) {
    FlowGraph out = g;
    // A live flow-receiving node with zero total input flow owes its whole
    // activation to the bias; no edge rescaling can reproduce that, so the
    // transform refuses it up front. This covers nodes whose inputs are
    // all dead, where no live edge would ever reach the check.
    for (const FlowNode& node : out.nodes) {
        if (node.part == 0 || node.dead || node.gamma != 0.0) continue;
        std::ostringstream os;
        os << "degenerate flow: live node (part " << node.part << ", channel " << node.channel
           << ", " << node.row << "," << node.col << ") has zero total input flow";
        throw Error(os.str());
    }
    for (FlowEdge& e : out.edges) {
        if (e.dead) continue;
        const FlowNode& to = out.nodes[e.to];
        if (to.part == 0) continue;
        // c_e = a(v)/gamma(v) of the receiving node: the relative share of
        // v's activation per unit of incoming flow. This is the form that
        // reproduces all activations (and equals a_e/(a_e+b_e) on live
        // nodes, matching the closed-form path factor).
        e.amplification = to.activation / to.gamma;
    }
    for (FlowNode& node : out.nodes)
        if (node.part > 0) node.bias = 0.0;
    out.bias_free = true;
    return out;
}

std::vector<double> replay_activations(const FlowGraph& g) {
    if (!g.bias_free) throw Error("replay_activations expects a bias-free graph");
    std::vector<double> val(g.nodes.size(), 0.0);
    for (int node : g.parts[0])
        val[node] = g.nodes[node].dead ? 0.0 : g.nodes[node].activation;
    std::vector<std::vector<int>> in_edges(g.nodes.size());
    for (std::size_t ei = 0; ei < g.edges.size(); ++ei)
        in_edges[g.edges[ei].to].push_back(static_cast<int>(ei));
    for (int part = 1; part < g.num_parts(); ++part)
        for (int node : g.parts[part]) {
            if (g.nodes[node].dead) continue;
            double acc = 0.0;
            for (int ei : in_edges[node]) {
                const FlowEdge& e = g.edges[ei];
                if (e.dead) continue;
                acc += e.amplification * e.weight * val[e.from];
            }
            // Round to float per node, mirroring the inference kernels, so
            // the bias-free replay of a bias-free network is bit-identical.
            val[node] = static_cast<float>(acc);
        }
    return val;
}

double phi(const FlowGraph& g, int source_node, PhiVariant variant, bool include_source) {
    const FlowNode& src = g.nodes[source_node];
    if (src.part != 0) throw Error("phi source must be a part-0 node");
    const std::vector<Rational> s = suffix_sums(g, variant);
    return finalize(g, source_node, s[source_node], variant, include_source);
}

std::vector<double> phi_all(const FlowGraph& g, PhiVariant variant, bool include_source) {
    const std::vector<Rational> s = suffix_sums(g, variant);
    std::vector<double> out;
    out.reserve(g.parts[0].size());
    for (int node : g.parts[0])
        out.push_back(finalize(g, node, s[node], variant, include_source));
    return out;
}

namespace {

void enumerate_paths(const FlowGraph& g, int node, const Rational& product,
                     Rational& sum, PhiVariant variant) {
    if (g.nodes[node].part == g.num_parts() - 1) {
        sum += product;
        return;
    }
    for (int ei : g.out_edges[node]) {
        const FlowEdge& e = g.edges[ei];
        if (e.dead) continue;
        enumerate_paths(g, e.to, product * edge_factor(g, e, variant), sum, variant);
    }
}

}  // namespace

double phi_naive(const FlowGraph& g, int source_node, PhiVariant variant, bool include_source) {
    const FlowNode& src = g.nodes[source_node];
    if (src.part != 0) throw Error("phi source must be a part-0 node");
    Rational sum(0);
    if (!src.dead) enumerate_paths(g, source_node, Rational(1), sum, variant);
    return finalize(g, source_node, sum, variant, include_source);
}

ProportionalityReport vbp_proportionality_report(const Model& m, const Tensor& input) {
    const FlowGraph g = build_flow_graph(m, input);

    const ForwardResult fwd = forward(m, input);
    const Tensor raw = vbp_raw_from_trace(fwd.trace);

    const std::vector<double> without = phi_all(g, PhiVariant::vbp, false);
    const std::vector<double> with = phi_all(g, PhiVariant::vbp, true);

    const int h = input.shape()[1], w = input.shape()[2];
    const int channels = input.shape()[0];
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    // Part-0 nodes were emitted channel-major, so node k of parts[0] maps
    // to channel k/plane, pixel k%plane. The vbp suffix sum is identical
    // across channels of one pixel; the source factor is summed over them.
    struct Ratios {
        std::vector<double> values;
        void add(double mask, double oracle) {
            if (oracle != 0.0) values.push_back(mask / oracle);
        }
        double spread() const {
            if (values.empty()) return 0.0;
            double lo = values.front(), hi = values.front();
            for (double r : values) {
                lo = std::min(lo, r);
                hi = std::max(hi, r);
            }
            if (lo <= 0.0) return std::numeric_limits<double>::infinity();
            return hi / lo - 1.0;
        }
        double mean() const {
            double acc = 0.0;
            for (double r : values) acc += r;
            return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
        }
    };

    Ratios r_without, r_with;
    for (std::size_t px = 0; px < plane; ++px) {
        const double mask = raw[px];
        double phi_with = 0.0;
        for (int c = 0; c < channels; ++c) phi_with += with[c * plane + px];
        r_without.add(mask, without[px]);
        r_with.add(mask, phi_with);
    }

    ProportionalityReport rep;
    rep.spread_with_source = r_with.spread();
    rep.spread_without_source = r_without.spread();

    if (r_without.values.empty() && r_with.values.empty()) {
        rep.matched_variant = "inconclusive";
        return rep;
    }
    const bool pick_without =
        !r_without.values.empty() &&
        (r_with.values.empty() || rep.spread_without_source <= rep.spread_with_source);
    const Ratios& best = pick_without ? r_without : r_with;
    rep.matched_variant = pick_without ? "without_source" : "with_source";
    rep.ratio_mean = best.mean();
    rep.ratio_spread = best.spread();
    rep.pixels_evaluated = static_cast<int>(best.values.size());
    return rep;
}

}  // namespace vbp
