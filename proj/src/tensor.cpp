#include "vbp/tensor.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace vbp {

namespace {

std::size_t checked_count(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 3)
        throw ShapeError("tensor rank must be 1..3");
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw ShapeError("tensor extents must be positive");
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

void check_finite(const Tensor& t, const char* op) {
    for (float v : t.data())
        if (!std::isfinite(v))
            throw Error(std::string(op) + ": non-finite value in result");
}

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(checked_count(shape_), 0.0f) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_count(shape_) != data_.size())
        throw ShapeError("tensor data length does not match shape " + shape_str(shape_));
}

Tensor channel_mean(const Tensor& t) {
    if (t.rank() != 3)
        throw ShapeError("channel_mean expects a (C,H,W) tensor, got " + shape_str(t.shape()));
    const int c = t.shape()[0], h = t.shape()[1], w = t.shape()[2];
    Tensor out({h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < plane; ++i) {
        double acc = 0.0;
        for (int ch = 0; ch < c; ++ch) acc += t.data()[ch * plane + i];
        out[i] = static_cast<float>(acc / c);
    }
    check_finite(out, "channel_mean");
    return out;
}

Tensor pointwise_multiply(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("pointwise_multiply shape mismatch: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    check_finite(out, "pointwise_multiply");
    return out;
}

Tensor normalize_unit_interval(const Tensor& t) {
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (float v : t.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Tensor out(t.shape());
    if (hi > lo) {
        const double range = static_cast<double>(hi) - lo;
        // Subtract in double so the extremes land exactly on 0 and 1.
        for (std::size_t i = 0; i < t.size(); ++i)
            out[i] = static_cast<float>((static_cast<double>(t[i]) - lo) / range);
    }
    check_finite(out, "normalize_unit_interval");
    return out;
}

}  // namespace vbp
