#include "doctest.h"

#include <cmath>
#include <random>

#include "vbp/inference.hpp"
#include "vbp/model.hpp"

using vbp::Conv2d;
using vbp::Model;
using vbp::Tensor;

namespace {

Conv2d simple_conv(int in, int out, int k, int s, std::vector<float> w, std::vector<float> b) {
    Conv2d c;
    c.in_channels = in;
    c.out_channels = out;
    c.kernel_h = c.kernel_w = k;
    c.stride_h = c.stride_w = s;
    c.weights = std::move(w);
    c.bias = std::move(b);
    return c;
}

}  // namespace

TEST_CASE("conv2d valid convolution, stride 1") {
    Tensor x({1, 3, 3}, std::vector<float>(9, 1.0f));
    Tensor y = vbp::conv2d_forward(simple_conv(1, 1, 2, 1, {1, 1, 1, 1}, {0}), x);
    CHECK(y.shape() == std::vector<int>{1, 2, 2});
    for (float v : y.data()) CHECK(v == 4.0f);
}

TEST_CASE("conv2d stride 2 tiles disjointly") {
    Tensor x({1, 4, 4}, std::vector<float>(16, 1.0f));
    Tensor y = vbp::conv2d_forward(simple_conv(1, 1, 2, 2, {1, 1, 1, 1}, {0}), x);
    CHECK(y.shape() == std::vector<int>{1, 2, 2});
    for (float v : y.data()) CHECK(v == 4.0f);
}

TEST_CASE("conv2d single-tap kernel") {
    Tensor x({1, 2, 2}, {1, 2, 3, 4});
    Tensor y = vbp::conv2d_forward(simple_conv(1, 1, 2, 1, {0, 1, 0, 0}, {0}), x);
    CHECK(y.shape() == std::vector<int>{1, 1, 1});
    CHECK(y[0] == 2.0f);
}

TEST_CASE("conv2d rejects a kernel larger than its input") {
    Tensor x({1, 2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_AS(vbp::conv2d_forward(
                        simple_conv(1, 1, 3, 1, std::vector<float>(9, 1.0f), {0}), x),
                    vbp::ShapeError);
}

TEST_CASE("OpenMP conv kernel is bit-identical to the serial reference") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    Conv2d c = simple_conv(3, 5, 3, 2, std::vector<float>(5 * 3 * 9), std::vector<float>(5));
    for (float& v : c.weights) v = d(rng);
    for (float& v : c.bias) v = d(rng);
    Tensor x({3, 9, 11});
    for (float& v : x.data()) v = d(rng);
    CHECK(vbp::conv2d_forward(c, x).data() == vbp::conv2d_forward_serial(c, x).data());
}

TEST_CASE("conv2d is linear at zero bias") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    Conv2d c = simple_conv(2, 3, 2, 1, std::vector<float>(3 * 2 * 4), std::vector<float>(3, 0.0f));
    for (float& v : c.weights) v = d(rng);
    Tensor x({2, 5, 5}), y({2, 5, 5}), sum({2, 5, 5});
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = d(rng);
        y[i] = d(rng);
        sum[i] = x[i] + y[i];
    }
    Tensor lhs = vbp::conv2d_forward(c, sum);
    Tensor ra = vbp::conv2d_forward(c, x);
    Tensor rb = vbp::conv2d_forward(c, y);
    for (std::size_t i = 0; i < lhs.size(); ++i)
        CHECK(lhs[i] == doctest::Approx(ra[i] + rb[i]).epsilon(1e-5));
}

TEST_CASE("batchnorm affine forms") {
    vbp::BatchNorm bn;
    bn.channels = 1;
    bn.gamma = {1};
    bn.beta = {0};
    bn.running_mean = {0};
    bn.running_var = {1};
    bn.eps = 0.0f;
    Tensor x({1, 1, 1}, {3});
    CHECK(vbp::batchnorm_forward(bn, x)[0] == 3.0f);

    bn.gamma = {2};
    bn.beta = {1};
    CHECK(vbp::batchnorm_forward(bn, x)[0] == 7.0f);

    bn.running_var = {0};
    bn.eps = 1e-5f;
    CHECK(std::isfinite(vbp::batchnorm_forward(bn, x)[0]));
}

TEST_CASE("relu and fc basics") {
    Tensor x({3}, {-1, 0, 2});
    CHECK(vbp::relu_forward(x).data() == std::vector<float>{0, 0, 2});

    vbp::FullyConnected fc;
    fc.in_dim = 2;
    fc.out_dim = 1;
    fc.weights = {1, 1};
    fc.bias = {0};
    CHECK(vbp::fc_forward(fc, {1, 2}) == std::vector<float>{3});
    fc.bias = {0.5f};
    CHECK(vbp::fc_forward(fc, {0, 0}) == std::vector<float>{0.5f});
    CHECK_THROWS_AS(vbp::fc_forward(fc, {1, 2, 3}), vbp::ShapeError);
}

TEST_CASE("forward through a 1x1 identity conv preserves the input") {
    Model m;
    m.input_shape = {1, 3, 3};
    m.layers.emplace_back(simple_conv(1, 1, 1, 1, {1}, {0}));
    m.layers.emplace_back(vbp::ReLU{});
    vbp::validate(m);

    Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    vbp::ForwardResult r = vbp::forward(m, x);
    CHECK(r.output == x.data());
    REQUIRE(r.trace.stages.size() == 1);
    CHECK(r.trace.stages[0].post_relu.data() == x.data());
}

TEST_CASE("forward is deterministic and traces every conv stage") {
    Model m = vbp::preset("tiny", 9);
    Tensor x({1, 6, 6});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(i) / 36.0f;
    vbp::ForwardResult a = vbp::forward(m, x);
    vbp::ForwardResult b = vbp::forward(m, x);
    CHECK(a.output == b.output);
    REQUIRE(a.trace.stages.size() == static_cast<std::size_t>(vbp::conv_stage_count(m)));
    for (std::size_t s = 0; s < a.trace.stages.size(); ++s) {
        CHECK(a.trace.stages[s].post_relu.data() == b.trace.stages[s].post_relu.data());
        for (float v : a.trace.stages[s].post_relu.data()) CHECK(v >= 0.0f);
    }
}

TEST_CASE("tiny preset on zero input: stage maps are constant per channel") {
    Model m = vbp::preset("tiny", 4);
    Tensor x({1, 6, 6});
    vbp::ForwardResult r = vbp::forward(m, x);
    REQUIRE(r.trace.stages.size() == 2);

    // Zero input through identity batchnorm stays zero, so the first conv
    // emits its bias everywhere: post-ReLU value 0.01 in every channel.
    for (float v : r.trace.stages[0].post_relu.data())
        CHECK(v == doctest::Approx(0.01).epsilon(1e-6));

    // Second stage: per-channel constant bias + x_hat * sum(weights),
    // where x_hat is 0.01 through the (identity, eps-adjusted) batchnorm.
    const auto& conv2 = std::get<Conv2d>(m.layers[4]);
    const auto& bn2 = std::get<vbp::BatchNorm>(m.layers[3]);
    const double x_hat = 0.01 * bn2.gamma[0] / std::sqrt(1.0 + static_cast<double>(bn2.eps));
    const Tensor& stage2 = r.trace.stages[1].post_relu;
    const int plane = stage2.shape()[1] * stage2.shape()[2];
    for (int o = 0; o < conv2.out_channels; ++o) {
        double wsum = 0.0;
        for (int i = 0; i < conv2.in_channels * conv2.kernel_h * conv2.kernel_w; ++i)
            wsum += conv2.weights[o * conv2.in_channels * conv2.kernel_h * conv2.kernel_w + i];
        const double expect = std::max(0.0, 0.01 + x_hat * wsum);
        for (int i = 0; i < plane; ++i)
            CHECK(stage2[o * plane + i] == doctest::Approx(expect).epsilon(1e-5));
    }
}

TEST_CASE("forward rejects a mismatched input shape") {
    Model m = vbp::preset("tiny", 1);
    CHECK_THROWS_AS(vbp::forward(m, Tensor({1, 5, 5})), vbp::ShapeError);
}
