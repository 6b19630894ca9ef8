#include "vbp/bench.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <ctime>

#include "json.hpp"
#include "vbp/inference.hpp"
#include "vbp/lrp.hpp"
#include "vbp/visualbackprop.hpp"

namespace vbp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace

BenchReport run_bench(const Model& m, const Tensor& input, const std::string& method,
                      int runs, int warmup, int threads, const std::string& model_name) {
    if (runs < 1) throw Error("bench requires at least one timed run");
    if (method != "vbp" && method != "lrp") throw Error("unknown bench method: " + method);
    omp_set_num_threads(threads);

    BenchReport r;
    r.method = method;
    r.warmup_runs = warmup;
    r.timed_runs = runs;
    r.model_name = model_name;
    r.input_shape = m.input_shape;
    r.thread_count = threads;
    r.timestamp = utc_now();

    // Shared forward cost, reported for context but outside the timed region.
    const int fwd_runs = std::min(runs, 3);
    double fwd_total = 0.0;
    for (int i = 0; i < fwd_runs; ++i) {
        const auto t0 = Clock::now();
        volatile float sink = forward(m, input).output[0];
        (void)sink;
        fwd_total += ms_since(t0);
    }
    r.forward_mean_ms = fwd_total / fwd_runs;

    if (method == "vbp") {
        r.timed_region = "trace averaging, deconv upsampling, and final normalization; "
                         "forward pass excluded";
        const ForwardResult fwd = forward(m, input);
        auto once = [&] {
            volatile float sink = normalize_unit_interval(vbp_raw_from_trace(fwd.trace))[0];
            (void)sink;
        };
        for (int i = 0; i < warmup; ++i) once();
        for (int i = 0; i < runs; ++i) {
            const auto t0 = Clock::now();
            once();
            r.per_run_ms.push_back(ms_since(t0));
        }
    } else {
        r.timed_region = "epsilon-rule backward relevance sweep over a cached forward; "
                         "forward pass excluded";
        const LrpForwardCache cache = lrp_forward(m, input);
        auto once = [&] {
            volatile float sink = lrp_backward(m, cache, LrpConfig{}).raw[0];
            (void)sink;
        };
        for (int i = 0; i < warmup; ++i) once();
        for (int i = 0; i < runs; ++i) {
            const auto t0 = Clock::now();
            once();
            r.per_run_ms.push_back(ms_since(t0));
        }
    }

    std::vector<double> sorted = r.per_run_ms;
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    for (double v : sorted) total += v;
    r.mean_ms = total / static_cast<double>(sorted.size());
    r.p50_ms = sorted[sorted.size() / 2];
    r.min_ms = sorted.front();
    return r;
}

std::string bench_report_json(const BenchReport& r) {
    nlohmann::json j;
    j["method"] = r.method;
    j["warmup_runs"] = r.warmup_runs;
    j["timed_runs"] = r.timed_runs;
    j["per_run_ms"] = r.per_run_ms;
    j["mean_ms"] = r.mean_ms;
    j["p50_ms"] = r.p50_ms;
    j["min_ms"] = r.min_ms;
    j["model_name"] = r.model_name;
    j["input_shape"] = {r.input_shape[0], r.input_shape[1], r.input_shape[2]};
    j["thread_count"] = r.thread_count;
    j["timestamp"] = r.timestamp;
    j["timed_region"] = r.timed_region;
    j["forward_mean_ms"] = r.forward_mean_ms;
    return j.dump(2);
}

}  // namespace vbp
