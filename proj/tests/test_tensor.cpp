#include "doctest.h"

#include <random>

#include "vbp/tensor.hpp"

using vbp::Tensor;

TEST_CASE("channel_mean averages across channels") {
    Tensor t({2, 1, 2}, {1, 3, 5, 7});
    Tensor m = vbp::channel_mean(t);
    CHECK(m.shape() == std::vector<int>{1, 2});
    CHECK(m[0] == doctest::Approx(3.0));
    CHECK(m[1] == doctest::Approx(5.0));
}

TEST_CASE("channel_mean with one channel is the identity") {
    Tensor t({1, 2, 2}, {1, 2, 3, 4});
    Tensor m = vbp::channel_mean(t);
    for (std::size_t i = 0; i < 4; ++i) CHECK(m[i] == t[i]);
}

TEST_CASE("channel_mean of zeros is zero") {
    Tensor m = vbp::channel_mean(Tensor({3, 2, 2}));
    for (float v : m.data()) CHECK(v == 0.0f);
}

TEST_CASE("channel_mean rejects non-rank-3 input") {
    CHECK_THROWS_AS(vbp::channel_mean(Tensor({2, 2})), vbp::ShapeError);
}

TEST_CASE("channel_mean commutes with scalar multiplication") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> d(-2.0f, 2.0f);
    Tensor t({3, 4, 5});
    for (float& v : t.data()) v = d(rng);
    const float k = 3.5f;
    Tensor scaled = t;
    for (float& v : scaled.data()) v *= k;
    Tensor a = vbp::channel_mean(scaled);
    Tensor b = vbp::channel_mean(t);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(k * b[i]).epsilon(1e-6));
}

TEST_CASE("pointwise_multiply") {
    Tensor a({2, 2}, {0, 1, 2, 3});
    Tensor b({2, 2}, {1, 1, 0, 2});
    Tensor p = vbp::pointwise_multiply(a, b);
    CHECK(p.data() == std::vector<float>{0, 1, 0, 6});

    Tensor ones({2, 2}, {1, 1, 1, 1});
    CHECK(vbp::pointwise_multiply(a, ones).data() == a.data());
    Tensor zeros({2, 2});
    Tensor az = vbp::pointwise_multiply(a, zeros);
    for (float v : az.data()) CHECK(v == 0.0f);

    CHECK_THROWS_AS(vbp::pointwise_multiply(a, Tensor({2, 3})), vbp::ShapeError);
}

TEST_CASE("pointwise_multiply is commutative") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    Tensor a({4, 4}), b({4, 4});
    for (float& v : a.data()) v = d(rng);
    for (float& v : b.data()) v = d(rng);
    CHECK(vbp::pointwise_multiply(a, b).data() == vbp::pointwise_multiply(b, a).data());
}

TEST_CASE("normalize_unit_interval rescales affinely") {
    Tensor t({3}, {2, 4, 6});
    Tensor n = vbp::normalize_unit_interval(t);
    CHECK(n[0] == 0.0f);
    CHECK(n[1] == doctest::Approx(0.5));
    CHECK(n[2] == 1.0f);
}

TEST_CASE("normalize_unit_interval maps a constant tensor to zeros") {
    Tensor n = vbp::normalize_unit_interval(Tensor({2}, {5, 5}));
    CHECK(n.data() == std::vector<float>{0, 0});
}

TEST_CASE("normalize_unit_interval keeps an exact [0,1] map unchanged") {
    Tensor t({2, 2}, {0.0f, 0.25f, 0.75f, 1.0f});
    CHECK(vbp::normalize_unit_interval(t).data() == t.data());
}

TEST_CASE("normalized output spans [0,1] for non-constant input") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<float> d(-100.0f, 100.0f);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor t({5, 7});
        for (float& v : t.data()) v = d(rng);
        Tensor n = vbp::normalize_unit_interval(t);
        float lo = 1.0f, hi = 0.0f;
        for (float v : n.data()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo == 0.0f);
        CHECK(hi == 1.0f);
    }
}

TEST_CASE("tensor shape/data consistency is enforced") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), vbp::ShapeError);
    CHECK_THROWS_AS(Tensor({0, 2}), vbp::ShapeError);
}
