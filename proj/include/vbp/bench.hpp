#pragma once

#include <array>
#include <string>
#include <vector>

#include "vbp/model.hpp"
#include "vbp/tensor.hpp"

namespace vbp {

struct BenchReport {
    std::string method;  // "vbp" | "lrp"
    int warmup_runs = 0;
    int timed_runs = 0;
    std::vector<double> per_run_ms;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double min_ms = 0.0;
    std::string model_name;
    std::array<int, 3> input_shape{};
    int thread_count = 1;
    std::string timestamp;     // ISO-8601 UTC
    std::string timed_region;  // what the per-run numbers cover
    double forward_mean_ms = 0.0;  // shared forward cost, measured separately
};

/// Times mask computation with the forward pass excluded: for vbp the
/// trace-to-mask path, for lrp the backward relevance sweep over a cached
/// forward. Wall-clock, steady_clock.
BenchReport run_bench(const Model& m, const Tensor& input, const std::string& method,
                      int runs, int warmup, int threads, const std::string& model_name);

std::string bench_report_json(const BenchReport& r);

}  // namespace vbp
