#include "vbp/oracle_check.hpp"

#include <cmath>
#include <sstream>

namespace vbp {

Model random_oracle_model(std::mt19937_64& rng, int max_h, int max_w, bool zero_bias) {
    std::uniform_int_distribution<int> stages_d(1, 2);
    std::uniform_int_distribution<int> chan_d(1, 3);
    std::uniform_real_distribution<float> weight_d(-1.0f, 1.0f);
    std::uniform_real_distribution<float> bias_d(-0.2f, 0.2f);

    const int stages = stages_d(rng);
    Model m;
    int h = std::uniform_int_distribution<int>(std::min(3, max_h), max_h)(rng);
    int w = std::uniform_int_distribution<int>(std::min(3, max_w), max_w)(rng);
    int channels = chan_d(rng);
    m.input_shape = {channels, h, w};

    for (int s = 0; s < stages; ++s) {
        // Kernel <= 3x3, and small enough that a later stage still fits.
        const int budget_h = h - (stages - 1 - s);
        const int budget_w = w - (stages - 1 - s);
        Conv2d conv;
        conv.in_channels = channels;
        conv.out_channels = chan_d(rng);
        conv.kernel_h = std::uniform_int_distribution<int>(1, std::min(3, budget_h))(rng);
        conv.kernel_w = std::uniform_int_distribution<int>(1, std::min(3, budget_w))(rng);
        conv.stride_h = conv.stride_w = 1;
        const std::size_t n = static_cast<std::size_t>(conv.out_channels) * conv.in_channels *
                              conv.kernel_h * conv.kernel_w;
        conv.weights.resize(n);
        for (float& v : conv.weights) v = weight_d(rng);
        conv.bias.resize(conv.out_channels);
        for (float& v : conv.bias) v = zero_bias ? 0.0f : bias_d(rng);

        h = conv_out(h, conv.kernel_h, 1);
        w = conv_out(w, conv.kernel_w, 1);
        channels = conv.out_channels;
        m.layers.emplace_back(std::move(conv));
        m.layers.emplace_back(ReLU{});
    }
    validate(m);
    return m;
}

Tensor random_input(std::mt19937_64& rng, const Model& m) {
    Tensor t({m.input_shape[0], m.input_shape[1], m.input_shape[2]});
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    for (float& v : t.data()) v = d(rng);
    return t;
}

std::string check_degree_property(const FlowGraph& g, const Model& m) {
    std::vector<const Conv2d*> convs;
    for (const auto& layer : m.layers)
        if (const auto* conv = std::get_if<Conv2d>(&layer)) convs.push_back(conv);

    int hin = m.input_shape[1], win = m.input_shape[2];
    for (std::size_t stage = 0; stage < convs.size(); ++stage) {
        const Conv2d* conv = convs[stage];
        const int kh = conv->kernel_h, kw = conv->kernel_w, f = conv->out_channels;
        for (int node : g.parts[stage]) {
            const FlowNode& v = g.nodes[node];
            const bool interior = v.row >= kh - 1 && v.row <= hin - kh &&
                                  v.col >= kw - 1 && v.col <= win - kw;
            if (!interior) continue;
            const int degree = static_cast<int>(g.out_edges[node].size());
            if (degree != kh * kw * f) {
                std::ostringstream os;
                os << "part " << stage << " node (" << v.channel << "," << v.row << "," << v.col
                   << ") has " << degree << " out-edges, expected " << kh * kw * f;
                return os.str();
            }
        }
        hin = conv_out(hin, kh, 1);
        win = conv_out(win, kw, 1);
    }
    return {};
}

OracleCheckResult run_oracle_check(std::uint64_t seed, int trials, int max_h, int max_w) {
    OracleCheckResult result;
    for (int t = 0; t < trials; ++t) {
        std::mt19937_64 rng(splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * (t + 1))));
        OracleTrial trial;
        trial.index = t;
        try {
            const Model m = random_oracle_model(rng, max_h, max_w);
            const Tensor input = random_input(rng, m);
            const FlowGraph g = build_flow_graph(m, input);

            const std::string degree_err = check_degree_property(g, m);
            if (!degree_err.empty()) throw Error("degree property violated: " + degree_err);

            const FlowGraph bf = to_bias_free(g);
            const std::vector<double> replay = replay_activations(bf);
            for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                const double want = g.nodes[i].dead ? 0.0 : g.nodes[i].activation;
                if (std::abs(replay[i] - want) > 1e-6)
                    throw Error("bias-free replay mismatch at node " + std::to_string(i));
            }

            const std::vector<double> general = phi_all(g, PhiVariant::general, true);
            const std::vector<double> transformed = phi_all(bf, PhiVariant::no_bias, true);
            for (std::size_t i = 0; i < general.size(); ++i) {
                const double scale = std::max({std::abs(general[i]), std::abs(transformed[i]), 1.0});
                if (std::abs(general[i] - transformed[i]) > 1e-6 * scale)
                    throw Error("phi identity mismatch at source " + std::to_string(i));
            }

            trial.report = vbp_proportionality_report(m, input);
            if (trial.report.matched_variant == "inconclusive") {
                trial.status = "inconclusive";
                ++result.inconclusive;
            } else if (trial.report.ratio_spread <= kProportionalitySpreadTol) {
                trial.status = "pass";
                ++result.passed;
            } else {
                trial.status = "fail";
                std::ostringstream os;
                os << "ratio spread " << trial.report.ratio_spread << " exceeds "
                   << kProportionalitySpreadTol;
                trial.detail = os.str();
                ++result.failed;
            }
        } catch (const Error& e) {
            // Degenerate-flow models fall outside the oracle's premises
            // (a bias can carry a live activation with zero input flow);
            // they are recorded, not counted against the check.
            const std::string what = e.what();
            if (what.find("degenerate flow") != std::string::npos) {
                trial.status = "inconclusive";
                trial.detail = what;
                trial.report.matched_variant = "inconclusive";
                ++result.inconclusive;
            } else {
                trial.status = "fail";
                trial.detail = what;
                ++result.failed;
            }
        }
        result.trials.push_back(std::move(trial));
    }
    return result;
}

}  // namespace vbp
